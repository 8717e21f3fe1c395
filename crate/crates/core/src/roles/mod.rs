// Copyright 2026 The VAMS Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! Client-side party roles: agents file requests, providers check them,
//! users look up their own history, auditors replay and publish, monitors
//! re-check published statistics, and brokers answer on users' behalf.

mod audit;
mod broker;
mod detect;
mod keys;
mod publish;
mod user;

pub use audit::{audit, AuditCursor, AuditReport};
pub use broker::{broker_respond, BrokerDecision, BrokerPolicy, BrokerStore, IncomingRequest, Subscription};
pub use detect::{detect, DetectReport, HeadSource};
pub use keys::{KeyFile, KeyFileError};
pub use publish::{
    default_queries, fetch_manifest, monitor, prepare_publication, publish, MonitorRejection, MonitorReport,
    PublishOptions, Published, StatisticsManifest, DEFAULT_DISTRIBUTION_TOLERANCE,
};
pub use user::{
    check, provide, request, verify_map_lookup, CheckEntry, CheckOptions, CheckResult, Provided, RequestBody,
    SessionCounters,
};

use serde::Serialize;
use thiserror::Error;

use crate::api::ApiError;

/// Material backing a suspicion of server misbehaviour.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Suspicion {
    pub reason: String,
    pub material: serde_json::Value,
}

impl Suspicion {
    pub fn new(reason: impl Into<String>, material: impl Serialize) -> Self {
        Self { reason: reason.into(), material: serde_json::to_value(material).unwrap_or_default() }
    }
}

#[derive(Debug, Error)]
pub enum RoleError {
    #[error("EVIDENCE_SUSPECTED: {}", .0.reason)]
    EvidenceSuspected(Box<Suspicion>),
    #[error("REQUEST_NOT_LOGGED: no entry for {0} in the map")]
    RequestNotLogged(String),
    #[error("UNSAFE_ELEMENT_COUNT: {requested} elements requested, at most {max_safe_elements} are safe")]
    UnsafeElementCount { requested: usize, max_safe_elements: u32 },
    #[error("server: {0}")]
    Api(#[from] ApiError),
    #[error("{0}")]
    Invalid(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Identity(#[from] crate::identity::IdentityError),
    #[error(transparent)]
    Ballot(#[from] crate::multiballot::BallotError),
    #[error(transparent)]
    Stats(#[from] crate::stats::StatsError),
    #[error(transparent)]
    Bounds(#[from] crate::bounds::BoundsError),
}

impl RoleError {
    pub(crate) fn suspect(reason: impl Into<String>, material: impl Serialize) -> Self {
        Self::EvidenceSuspected(Box::new(Suspicion::new(reason, material)))
    }

    /// Whether this outcome is a rejection or evidence (exit status 2) rather
    /// than an operational failure.
    pub fn is_rejection(&self) -> bool {
        match self {
            Self::EvidenceSuspected(_) | Self::RequestNotLogged(_) | Self::UnsafeElementCount { .. } => true,
            Self::Api(e) => e.reject_code().is_some(),
            _ => false,
        }
    }
}

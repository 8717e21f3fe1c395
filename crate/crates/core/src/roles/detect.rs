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

//! Cross-checking heads gathered from several sources.

use ed25519_dalek::VerifyingKey;
use serde::Serialize;

use crate::api::{LogApi, SignedHeads};
use crate::merkle::{
    detect_equivocation, detect_map_fork, ConsistencyProof, Detection, DetectionWarning, EquivocationEvidence,
};

/// Heads obtained from one place (a gossip file, another client, a server
/// endpoint), or the reason they could not be obtained.
#[derive(Clone, Debug)]
pub struct HeadSource {
    pub name: String,
    pub heads: Result<Vec<SignedHeads>, String>,
}

impl HeadSource {
    /// Parses a JSON file holding one head bundle or an array of them.
    pub fn parse(name: impl Into<String>, text: &str) -> Self {
        let heads = serde_json::from_str::<Vec<SignedHeads>>(text)
            .or_else(|_| serde_json::from_str::<SignedHeads>(text).map(|h| vec![h]))
            .map_err(|e| format!("not a head bundle: {e}"));
        Self { name: name.into(), heads }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct DetectReport {
    pub evidence: Vec<EquivocationEvidence>,
    pub warnings: Vec<DetectionWarning>,
}

impl DetectReport {
    pub fn is_clean(&self) -> bool {
        self.evidence.is_empty()
    }

    fn absorb(&mut self, d: Detection) {
        self.evidence.extend(d.evidence);
        self.warnings.extend(d.warnings);
    }
}

/// Looks for conflicting request-log heads, map heads and head-log heads.
/// Heads of different sizes are checked with consistency proofs from `api`
/// when one is given.
pub fn detect(sources: &[HeadSource], server: &VerifyingKey, api: Option<&dyn LogApi>) -> DetectReport {
    let mut report = DetectReport::default();
    let mut bundles = Vec::new();
    let mut reachable = 0;
    for s in sources {
        match &s.heads {
            Ok(h) => {
                reachable += 1;
                bundles.extend(h.iter().cloned());
            }
            Err(reason) => {
                tracing::warn!(source = %s.name, %reason, "head source unreachable");
                report
                    .warnings
                    .push(DetectionWarning::SourceUnreachable { source: s.name.clone(), reason: reason.clone() });
            }
        }
    }
    if reachable < 2 {
        report.warnings.push(DetectionWarning::InsufficientSources { sources: reachable });
    }

    let log_oracle = |a: u64, b: u64| -> Option<ConsistencyProof> { api?.log_consistency(a, b).ok() };
    let head_oracle = |a: u64, b: u64| -> Option<ConsistencyProof> { api?.headlog_consistency(a, b).ok() };
    let logs: Vec<_> = bundles.iter().map(|b| b.log).collect();
    let maps: Vec<_> = bundles.iter().map(|b| b.map).collect();
    let head_logs: Vec<_> = bundles.iter().map(|b| b.head_log).collect();
    report.absorb(detect_equivocation(&logs, server, &log_oracle));
    report.absorb(detect_map_fork(&maps, server));
    report.absorb(detect_equivocation(&head_logs, server, &head_oracle));
    report
}

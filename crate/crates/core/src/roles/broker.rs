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

//! A broker answers requests on behalf of subscribed users according to a
//! policy, and logs every decision under its own identifier paired with the
//! user's, so users can review the broker with an ordinary check.

use std::collections::BTreeSet;
use std::path::Path;

use aes_gcm::aead::{Aead, KeyInit};
use aes_gcm::{Aes256Gcm, Nonce};
use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};

use super::{request, RequestBody, RoleError};
use crate::api::{LogApi, SubmitReceipt};
use crate::envelope::PartySigner;
use crate::identity::{CommonIdDeriver, DataProviderIdentifier, EncryptionPublicKey};

/// Request categories a user consents to or refuses. Anything not named is
/// refused.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BrokerPolicy {
    #[serde(default)]
    pub allow: BTreeSet<String>,
    #[serde(default)]
    pub deny: BTreeSet<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BrokerDecision {
    pub allowed: bool,
    pub reason: String,
}

impl BrokerPolicy {
    pub fn decide(&self, category: &str) -> BrokerDecision {
        let (allowed, reason) = if self.deny.contains(category) {
            (false, "category refused by policy")
        } else if self.allow.contains(category) {
            (true, "category allowed by policy")
        } else {
            (false, "category outside policy vocabulary")
        };
        BrokerDecision { allowed, reason: reason.into() }
    }
}

/// A user the broker acts for: the provider identifier paired with the
/// broker's own, where to seal decisions, and the next session counter.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subscription {
    pub user: String,
    pub id_dp: String,
    pub user_public: EncryptionPublicKey,
    #[serde(default)]
    pub next_n: u64,
}

/// Subscriptions, kept encrypted at rest with AES-256-GCM.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BrokerStore {
    pub subscriptions: Vec<Subscription>,
}

const STORE_NONCE: usize = 12;

impl BrokerStore {
    pub fn seal<R: RngCore + CryptoRng>(&self, key: &[u8; 32], rng: &mut R) -> Vec<u8> {
        let mut nonce = [0u8; STORE_NONCE];
        rng.fill_bytes(&mut nonce);
        let plain = serde_json::to_vec(self).expect("store serializes");
        let ct = Aes256Gcm::new(key.into()).encrypt(Nonce::from_slice(&nonce), plain.as_slice()).expect("encrypt");
        [nonce.as_slice(), &ct].concat()
    }

    pub fn open(bytes: &[u8], key: &[u8; 32]) -> Result<Self, RoleError> {
        if bytes.len() < STORE_NONCE {
            return Err(RoleError::Invalid("broker store is truncated".into()));
        }
        let (nonce, ct) = bytes.split_at(STORE_NONCE);
        let plain = Aes256Gcm::new(key.into())
            .decrypt(Nonce::from_slice(nonce), ct)
            .map_err(|_| RoleError::Invalid("broker store does not decrypt under this key".into()))?;
        serde_json::from_slice(&plain).map_err(|e| RoleError::Invalid(format!("broker store: {e}")))
    }

    pub fn load(path: &Path, key: &[u8; 32]) -> Result<Self, RoleError> {
        Self::open(&std::fs::read(path)?, key)
    }

    pub fn save<R: RngCore + CryptoRng>(&self, path: &Path, key: &[u8; 32], rng: &mut R) -> Result<(), RoleError> {
        std::fs::write(path, self.seal(key, rng))?;
        Ok(())
    }
}

/// Metadata of a request the broker must answer.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IncomingRequest {
    pub user: String,
    pub category: String,
    #[serde(default)]
    pub purpose: String,
}

/// Decides on `incoming` and logs the decision for the user to find.
#[allow(clippy::too_many_arguments)]
pub fn broker_respond<R: RngCore + CryptoRng>(
    api: &dyn LogApi,
    signer: &PartySigner,
    broker: &CommonIdDeriver,
    store: &mut BrokerStore,
    policy: &BrokerPolicy,
    incoming: &IncomingRequest,
    auditor: &EncryptionPublicKey,
    timestamp: u64,
    rng: &mut R,
) -> Result<(BrokerDecision, SubmitReceipt), RoleError> {
    let sub = store
        .subscriptions
        .iter_mut()
        .find(|s| s.user == incoming.user)
        .ok_or_else(|| RoleError::Invalid(format!("no subscription for user {:?}", incoming.user)))?;
    let decision = policy.decide(&incoming.category);
    let body = RequestBody {
        category: incoming.category.clone(),
        purpose: incoming.purpose.clone(),
        decision: Some(if decision.allowed { "allow" } else { "deny" }.into()),
    };
    let id_dp = DataProviderIdentifier::new(sub.id_dp.as_bytes())?;
    let (_, receipt) = request(api, signer, broker, &id_dp, sub.next_n, &body, &sub.user_public, auditor, timestamp, rng)?;
    sub.next_n += 1;
    Ok((decision, receipt))
}

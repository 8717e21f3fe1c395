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

//! Requests, provider-side lookups and users' own history checks.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ed25519_dalek::VerifyingKey;
use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};

use super::RoleError;
use crate::api::{LogApi, MapLookup, SubmitReceipt};
use crate::envelope::{request_key_digest, LogRecord, MapValue, PartySigner, RequestEnvelope};
use crate::heads::SignedMapRoot;
use crate::identity::{open_payload, seal_payload, CommonId, CommonIdDeriver, DataProviderIdentifier, EncryptionKeyPair, EncryptionPublicKey};
use crate::merkle::{default_digest, verify_inclusion, verify_map_proof, Digest, MapProof};

/// Plaintext of a request, sealed separately for the user and the auditor.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequestBody {
    pub category: String,
    #[serde(default)]
    pub purpose: String,
    /// Set on entries a broker logs for its own decisions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decision: Option<String>,
}

impl RequestBody {
    pub fn new(category: impl Into<String>, purpose: impl Into<String>) -> Self {
        Self { category: category.into(), purpose: purpose.into(), decision: None }
    }
}

/// Seals `body`, signs the envelope for session `n` and submits it.
#[allow(clippy::too_many_arguments)]
pub fn request<R: RngCore + CryptoRng>(
    api: &dyn LogApi,
    signer: &PartySigner,
    deriver: &CommonIdDeriver,
    id_dp: &DataProviderIdentifier,
    n: u64,
    body: &RequestBody,
    user: &EncryptionPublicKey,
    auditor: &EncryptionPublicKey,
    timestamp: u64,
    rng: &mut R,
) -> Result<(RequestEnvelope, SubmitReceipt), RoleError> {
    let id_c = deriver.derive(id_dp, n)?;
    let plaintext = serde_json::to_vec(body).expect("body serializes");
    let sealed = seal_payload(&plaintext, user, auditor, rng);
    let envelope = signer.sign_request(id_c, sealed, timestamp);
    let receipt = api.submit_request(&envelope)?;
    Ok((envelope, receipt))
}

/// Next unused session counter per data provider, persisted as JSON.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionCounters {
    #[serde(skip)]
    path: Option<PathBuf>,
    next: BTreeMap<String, u64>,
}

impl SessionCounters {
    /// Loads counters from `path`, or starts empty if it does not exist.
    pub fn load(path: &Path) -> Result<Self, RoleError> {
        let mut c: Self = match std::fs::read(path) {
            Ok(bytes) => serde_json::from_slice(&bytes).map_err(|e| RoleError::Invalid(format!("counter file: {e}")))?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Self::default(),
            Err(e) => return Err(e.into()),
        };
        c.path = Some(path.to_owned());
        Ok(c)
    }

    fn key(id_dp: &DataProviderIdentifier) -> String {
        hex::encode(id_dp.as_bytes())
    }

    pub fn peek(&self, id_dp: &DataProviderIdentifier) -> u64 {
        self.next.get(&Self::key(id_dp)).copied().unwrap_or(0)
    }

    /// Marks `n` as used; the next request uses `n + 1` or later.
    pub fn advance(&mut self, id_dp: &DataProviderIdentifier, n: u64) -> Result<(), RoleError> {
        let slot = self.next.entry(Self::key(id_dp)).or_insert(0);
        *slot = (*slot).max(n + 1);
        self.save()
    }

    fn save(&self) -> Result<(), RoleError> {
        if let Some(path) = &self.path {
            std::fs::write(path, serde_json::to_vec_pretty(self).expect("serializes"))?;
        }
        Ok(())
    }
}

/// Checks a map lookup: signed head, valid proof for `key`, and the head
/// itself present in the map-head log.
pub fn verify_map_lookup(api: &dyn LogApi, server: &VerifyingKey, key: &Digest, lookup: &MapLookup) -> Result<(), RoleError> {
    let head = &lookup.head;
    if head.verify(server).is_err() {
        return Err(RoleError::suspect("map head signature does not verify", head));
    }
    if let Err(e) = verify_map_proof(head, key, &lookup.proof) {
        return Err(RoleError::suspect(format!("map proof rejected: {e}"), lookup));
    }
    verify_head_logged(api, server, head)
}

fn verify_head_logged(api: &dyn LogApi, server: &VerifyingKey, head: &SignedMapRoot) -> Result<(), RoleError> {
    if head.revision == 0 {
        if head.root != default_digest(0) || head.log_size_covered != 0 {
            return Err(RoleError::suspect("revision 0 must be the empty map", head));
        }
        return Ok(());
    }
    let log_head = api.headlog_root()?;
    if log_head.verify(server).is_err() {
        return Err(RoleError::suspect("head log root signature does not verify", log_head));
    }
    let index = head.revision - 1;
    if index >= log_head.tree_size {
        return Err(RoleError::suspect("map head is newer than the head log", (head, log_head)));
    }
    let proof = api.headlog_inclusion(index, log_head.tree_size)?;
    if verify_inclusion(&log_head, &head.encode(), &proof).is_err() {
        return Err(RoleError::suspect("map head is not in the head log", (head, log_head, proof)));
    }
    Ok(())
}

fn decode_entry(id_c: &CommonId, proof: &MapProof) -> Result<Option<(MapValue, RequestEnvelope)>, RoleError> {
    let Some(bytes) = &proof.value else { return Ok(None) };
    let value = MapValue::decode(bytes).map_err(|e| RoleError::suspect(format!("undecodable map value: {e}"), proof))?;
    match value.decode_record() {
        Ok(LogRecord::Request(e)) if e.id_c == *id_c => Ok(Some((value, e))),
        _ => Err(RoleError::suspect("map value is not a request for this identifier", proof)),
    }
}

/// A provider's view of a logged request.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Provided {
    pub envelope: RequestEnvelope,
    pub value: MapValue,
    pub lookup: MapLookup,
}

/// Fetches the request filed under `id_c`, refusing unless the server proves
/// it is in the published map.
pub fn provide(api: &dyn LogApi, server: &VerifyingKey, id_c: &CommonId) -> Result<Provided, RoleError> {
    let key = request_key_digest(id_c);
    let lookup = api.map_proof(&key, None)?;
    verify_map_lookup(api, server, &key, &lookup)?;
    match decode_entry(id_c, &lookup.proof)? {
        Some((value, envelope)) => Ok(Provided { envelope, value, lookup }),
        None => Err(RoleError::RequestNotLogged(id_c.to_hex())),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CheckOptions {
    /// Consecutive absent sessions after which the scan stops.
    pub lookahead: u64,
    /// Map lookups in flight at once.
    pub parallelism: usize,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self { lookahead: 3, parallelism: 4 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CheckEntry {
    pub n: u64,
    pub id_c: CommonId,
    pub log_index: u64,
    /// The same identifier was logged more than once; only the latest entry
    /// is in the map.
    pub duplicate: bool,
    pub agent_key_id: String,
    pub timestamp: u64,
    pub body: Option<RequestBody>,
    /// Why `body` is missing, if it is.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub proof: MapProof,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CheckResult {
    pub head: SignedMapRoot,
    pub entries: Vec<CheckEntry>,
    /// Proof that the first session after the last hit is absent.
    pub terminal: Option<MapProof>,
}

/// Walks sessions `n = 0, 1, …` for one agent/provider pair against a single
/// pinned map revision, stopping after `lookahead` consecutive misses.
pub fn check(
    api: &dyn LogApi,
    server: &VerifyingKey,
    deriver: &CommonIdDeriver,
    id_dp: &DataProviderIdentifier,
    user: &EncryptionKeyPair,
    opts: CheckOptions,
) -> Result<CheckResult, RoleError> {
    let lookahead = opts.lookahead.max(1);
    let width = opts.parallelism.max(1) as u64;
    let head = api.map_root()?;
    let pinned = Some(head.revision);
    let fetch = |n: u64| -> Result<(CommonId, MapLookup), RoleError> {
        let id_c = deriver.derive(id_dp, n)?;
        let key = request_key_digest(&id_c);
        let lookup = api.map_proof(&key, pinned)?;
        Ok((id_c, lookup))
    };

    let mut head_checked = false;
    let mut entries = Vec::new();
    let mut misses = 0;
    let mut terminal = None;
    let mut n = 0;
    while misses < lookahead {
        let batch: Vec<_> = if width == 1 {
            vec![fetch(n)]
        } else {
            std::thread::scope(|s| {
                let handles: Vec<_> = (n..n + width).map(|i| s.spawn(move || fetch(i))).collect();
                handles.into_iter().map(|h| h.join().expect("lookup thread")).collect()
            })
        };
        for result in batch {
            let (id_c, lookup) = result?;
            let key = request_key_digest(&id_c);
            if lookup.head != head {
                return Err(RoleError::suspect("server answered from a different map head", (&head, &lookup.head)));
            }
            if !head_checked {
                verify_map_lookup(api, server, &key, &lookup)?;
                head_checked = true;
            } else if let Err(e) = verify_map_proof(&head, &key, &lookup.proof) {
                return Err(RoleError::suspect(format!("map proof rejected: {e}"), &lookup));
            }
            match decode_entry(&id_c, &lookup.proof)? {
                None => {
                    if misses == 0 {
                        terminal = Some(lookup.proof);
                    }
                    misses += 1;
                }
                Some((value, env)) => {
                    misses = 0;
                    terminal = None;
                    let (body, error) = match open_payload(&env.sealed.user_ct, user) {
                        Err(e) => (None, Some(e.to_string())),
                        Ok(plain) => match serde_json::from_slice::<RequestBody>(&plain) {
                            Ok(b) => (Some(b), None),
                            Err(e) => (None, Some(format!("body is not a request: {e}"))),
                        },
                    };
                    entries.push(CheckEntry {
                        n,
                        id_c,
                        log_index: value.log_index,
                        duplicate: value.superseded > 0,
                        agent_key_id: env.agent_key_id,
                        timestamp: env.timestamp,
                        body,
                        error,
                        proof: lookup.proof,
                    });
                }
            }
            n += 1;
            if misses >= lookahead {
                break;
            }
        }
    }
    Ok(CheckResult { head, entries, terminal })
}

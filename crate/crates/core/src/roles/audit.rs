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

//! Auditing: replay the request log against every published map head and
//! classify what the log contains.

use std::collections::BTreeMap;

use ed25519_dalek::VerifyingKey;
use serde::{Deserialize, Serialize};

use super::{RequestBody, RoleError};
use crate::api::LogApi;
use crate::envelope::LogRecord;
use crate::heads::SignedMapRoot;
use crate::identity::{open_payload, EncryptionKeyPair};
use crate::merkle::{empty_log_root, verify_consistency_roots, Digest, MerkleLog};
use crate::replay::MapReplayer;

/// Where the previous audit stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditCursor {
    pub log_size: u64,
    pub log_root: Digest,
}

impl Default for AuditCursor {
    fn default() -> Self {
        Self { log_size: 0, log_root: empty_log_root() }
    }
}

/// Classification of log entries `[from_size, covered_log_size)`.
/// `valid + invalid + manifests` equals the number of entries covered;
/// `undecryptable` counts the subset of `invalid` the auditor could not open.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditReport {
    pub from_size: u64,
    pub covered_log_size: u64,
    pub map_heads_checked: u64,
    pub valid: u64,
    pub invalid: u64,
    pub undecryptable: u64,
    pub manifests: u64,
    pub categories: BTreeMap<String, u64>,
    pub invalid_indices: Vec<u64>,
}

/// Audits the log from `cursor` onward. The whole map is replayed every
/// time (it is cheap next to fetching), but only new entries are classified.
pub fn audit(
    api: &dyn LogApi,
    server: &VerifyingKey,
    auditor: &EncryptionKeyPair,
    cursor: &AuditCursor,
) -> Result<(AuditReport, AuditCursor), RoleError> {
    // Head log first: every head in it covers a prefix of the log as fetched next.
    let head_log = api.headlog_root()?;
    let log = api.log_root()?;
    for h in [&head_log, &log] {
        if h.verify(server).is_err() {
            return Err(RoleError::suspect("log head signature does not verify", h));
        }
    }

    if cursor.log_size > log.tree_size {
        return Err(RoleError::suspect("log is shorter than at the last audit", (cursor, log)));
    }
    if cursor.log_size > 0 {
        let proof = api.log_consistency(cursor.log_size, log.tree_size)?;
        if verify_consistency_roots(cursor.log_size, &cursor.log_root, log.tree_size, &log.root, &proof.path).is_err() {
            return Err(RoleError::suspect("log is not an extension of the last audited log", (cursor, log, proof)));
        }
    }

    let entries: Vec<Vec<u8>> = (0..log.tree_size).map(|i| api.log_entry(i)).collect::<Result<_, _>>()?;
    let rebuilt = MerkleLog::from_payloads(entries.iter().map(Vec::as_slice));
    if rebuilt.root() != log.root {
        return Err(RoleError::suspect("served entries do not hash to the signed log root", log));
    }

    let raw_heads: Vec<Vec<u8>> = (0..head_log.tree_size).map(|i| api.headlog_entry(i)).collect::<Result<_, _>>()?;
    if MerkleLog::from_payloads(raw_heads.iter().map(Vec::as_slice)).root() != head_log.root {
        return Err(RoleError::suspect("served map heads do not hash to the signed head-log root", head_log));
    }
    let mut replayer = MapReplayer::new();
    for (i, raw) in raw_heads.iter().enumerate() {
        let head = SignedMapRoot::decode(raw).map_err(|e| RoleError::suspect(format!("undecodable map head {i}: {e}"), hex::encode(raw)))?;
        if head.verify(server).is_err() {
            return Err(RoleError::suspect("map head signature does not verify", head));
        }
        let from = replayer.covered();
        if head.revision != i as u64 + 1 || head.log_size_covered < from || head.log_size_covered > log.tree_size {
            return Err(RoleError::suspect("map head out of sequence", head));
        }
        let rev = replayer
            .apply_batch(&entries[from as usize..head.log_size_covered as usize])
            .map_err(|e| RoleError::Invalid(e.to_string()))?;
        if rev.root != head.root {
            #[derive(Serialize)]
            struct Mismatch {
                head: SignedMapRoot,
                replayed_root: Digest,
            }
            return Err(RoleError::suspect(
                format!("replay disagrees with published map head at revision {}", head.revision),
                Mismatch { head, replayed_root: rev.root },
            ));
        }
    }

    let mut report = AuditReport {
        from_size: cursor.log_size,
        covered_log_size: log.tree_size,
        map_heads_checked: head_log.tree_size,
        ..Default::default()
    };
    for (index, raw) in entries.iter().enumerate().skip(cursor.log_size as usize) {
        let verdict = match LogRecord::decode(raw) {
            Err(_) => Err(false),
            Ok(LogRecord::Audit(_)) => {
                report.manifests += 1;
                continue;
            }
            Ok(LogRecord::Request(e)) => match open_payload(&e.sealed.auditor_ct, auditor) {
                Err(_) => Err(true),
                Ok(plain) => serde_json::from_slice::<RequestBody>(&plain).map_err(|_| false),
            },
        };
        match verdict {
            Ok(body) => {
                report.valid += 1;
                *report.categories.entry(body.category).or_default() += 1;
            }
            Err(undecryptable) => {
                report.invalid += 1;
                report.undecryptable += undecryptable as u64;
                report.invalid_indices.push(index as u64);
            }
        }
    }
    Ok((report, AuditCursor { log_size: log.tree_size, log_root: log.root }))
}

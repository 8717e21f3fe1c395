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

//! Equivocation detection over gossiped signed heads.
//!
//! Two signed heads of equal size with different roots are self-contained
//! evidence. Heads of different sizes are only evidence together with a
//! consistency proof from the server that fails to verify; a server that
//! refuses to produce one is recorded as suspicious, nothing more.

use std::collections::BTreeMap;

use ed25519_dalek::VerifyingKey;
use serde::{Deserialize, Serialize};

use super::log::{verify_consistency, ConsistencyProof};
use crate::heads::{SignedLogRoot, SignedMapRoot};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EvidenceKind {
    SameSizeFork,
    BadConsistency,
    SameRevisionFork,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "heads", rename_all = "snake_case")]
pub enum EquivocationEvidence {
    Log {
        kind: EvidenceKind,
        head_a: SignedLogRoot,
        head_b: SignedLogRoot,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        proof: Option<ConsistencyProof>,
    },
    Map { kind: EvidenceKind, head_a: SignedMapRoot, head_b: SignedMapRoot },
}

impl EquivocationEvidence {
    pub fn kind(&self) -> EvidenceKind {
        match self {
            Self::Log { kind, .. } | Self::Map { kind, .. } => *kind,
        }
    }

    /// Re-checks the evidence from scratch: both heads must be signed by `key`
    /// and actually conflict.
    pub fn is_valid(&self, key: &VerifyingKey) -> bool {
        match self {
            Self::Log { kind, head_a, head_b, proof } => {
                if head_a.verify(key).is_err() || head_b.verify(key).is_err() {
                    return false;
                }
                match (kind, proof) {
                    (EvidenceKind::SameSizeFork, _) => {
                        head_a.tree_size == head_b.tree_size && head_a.root != head_b.root
                    }
                    (EvidenceKind::BadConsistency, Some(p)) => {
                        verify_consistency(head_a, head_b, p).is_err()
                    }
                    _ => false,
                }
            }
            Self::Map { head_a, head_b, .. } => {
                head_a.verify(key).is_ok()
                    && head_b.verify(key).is_ok()
                    && head_a.revision == head_b.revision
                    && (head_a.root, head_a.log_size_covered) != (head_b.root, head_b.log_size_covered)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "warning", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DetectionWarning {
    /// The head at this input position failed signature verification and was ignored.
    BadSignature { position: usize },
    /// The server did not supply a consistency proof between these sizes.
    ConsistencyRefused { old_size: u64, new_size: u64 },
    InsufficientSources { sources: usize },
    SourceUnreachable { source: String, reason: String },
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Detection {
    pub evidence: Option<EquivocationEvidence>,
    pub warnings: Vec<DetectionWarning>,
}

/// Supplies consistency proofs between two sizes of one log.
pub trait ConsistencySource {
    fn consistency_proof(&self, old_size: u64, new_size: u64) -> Option<ConsistencyProof>;
}

impl<F> ConsistencySource for F
where
    F: Fn(u64, u64) -> Option<ConsistencyProof>,
{
    fn consistency_proof(&self, old_size: u64, new_size: u64) -> Option<ConsistencyProof> {
        self(old_size, new_size)
    }
}

pub fn detect_equivocation(
    heads: &[SignedLogRoot],
    key: &VerifyingKey,
    oracle: &dyn ConsistencySource,
) -> Detection {
    let mut out = Detection::default();
    let mut by_size: BTreeMap<u64, SignedLogRoot> = BTreeMap::new();
    for (position, head) in heads.iter().enumerate() {
        if head.verify(key).is_err() {
            tracing::warn!(position, "discarding head with bad signature");
            out.warnings.push(DetectionWarning::BadSignature { position });
            continue;
        }
        match by_size.get(&head.tree_size) {
            Some(seen) if seen.root != head.root => {
                out.evidence = Some(EquivocationEvidence::Log {
                    kind: EvidenceKind::SameSizeFork,
                    head_a: *seen,
                    head_b: *head,
                    proof: None,
                });
                return out;
            }
            Some(_) => {}
            None => {
                by_size.insert(head.tree_size, *head);
            }
        }
    }

    let distinct: Vec<SignedLogRoot> = by_size.into_values().collect();
    for pair in distinct.windows(2) {
        let (old, new) = (pair[0], pair[1]);
        if old.tree_size == 0 {
            continue;
        }
        match oracle.consistency_proof(old.tree_size, new.tree_size) {
            None => out.warnings.push(DetectionWarning::ConsistencyRefused {
                old_size: old.tree_size,
                new_size: new.tree_size,
            }),
            Some(proof) => {
                if verify_consistency(&old, &new, &proof).is_err() {
                    out.evidence = Some(EquivocationEvidence::Log {
                        kind: EvidenceKind::BadConsistency,
                        head_a: old,
                        head_b: new,
                        proof: Some(proof),
                    });
                    return out;
                }
            }
        }
    }
    out
}

/// Map heads sharing a revision must agree on root and covered log size.
pub fn detect_map_fork(heads: &[SignedMapRoot], key: &VerifyingKey) -> Detection {
    let mut out = Detection::default();
    let mut seen: BTreeMap<u64, SignedMapRoot> = BTreeMap::new();
    for (position, head) in heads.iter().enumerate() {
        if head.verify(key).is_err() {
            out.warnings.push(DetectionWarning::BadSignature { position });
            continue;
        }
        if let Some(prev) = seen.get(&head.revision) {
            if (prev.root, prev.log_size_covered) != (head.root, head.log_size_covered) {
                out.evidence = Some(EquivocationEvidence::Map {
                    kind: EvidenceKind::SameRevisionFork,
                    head_a: *prev,
                    head_b: *head,
                });
                return out;
            }
        } else {
            seen.insert(head.revision, *head);
        }
    }
    out
}

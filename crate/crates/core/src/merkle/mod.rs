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

//! Transparency structures: an append-only Merkle log, a sparse Merkle map and
//! equivocation detection over signed heads.
//!
//! Hashing follows the Certificate Transparency convention: leaves are
//! `SHA-256(0x00 ‖ payload)` and interior nodes `SHA-256(0x01 ‖ left ‖ right)`.

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};

pub mod equivocation;
pub mod log;
pub mod map;

pub use equivocation::{
    detect_equivocation, detect_map_fork, ConsistencySource, Detection, DetectionWarning, EquivocationEvidence,
    EvidenceKind,
};
pub use log::{
    verify_consistency, verify_consistency_roots, verify_inclusion, verify_inclusion_hash,
    ConsistencyProof, InclusionProof, MerkleLog, ProofError,
};
pub use map::{
    brute_force_root, default_digest, verify_map_proof, MapError, MapProof, MapRevision,
    SparseMap, MAP_DEPTH,
};

const LEAF_PREFIX: u8 = 0x00;
const NODE_PREFIX: u8 = 0x01;

/// A 32-byte SHA-256 output.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct Digest(#[serde(with = "crate::codec::hex_array")] pub [u8; 32]);

impl Digest {
    pub const LEN: usize = 32;

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self, hex::FromHexError> {
        let mut out = [0u8; 32];
        hex::decode_to_slice(s, &mut out)?;
        Ok(Self(out))
    }

    /// Plain SHA-256 of `data`, with no domain prefix.
    pub fn sha256(data: &[u8]) -> Self {
        Self(Sha256::digest(data).into())
    }

    /// Bit `i` counted from the most significant bit of byte 0.
    pub fn bit(&self, i: usize) -> bool {
        (self.0[i / 8] >> (7 - i % 8)) & 1 == 1
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({})", self.to_hex())
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl From<[u8; 32]> for Digest {
    fn from(b: [u8; 32]) -> Self {
        Self(b)
    }
}

pub fn leaf_hash(payload: &[u8]) -> Digest {
    let mut h = Sha256::new();
    h.update([LEAF_PREFIX]);
    h.update(payload);
    Digest(h.finalize().into())
}

pub fn node_hash(left: &Digest, right: &Digest) -> Digest {
    let mut h = Sha256::new();
    h.update([NODE_PREFIX]);
    h.update(left.0);
    h.update(right.0);
    Digest(h.finalize().into())
}

/// Root of the empty log, `SHA-256("")`.
pub fn empty_log_root() -> Digest {
    Digest::sha256(b"")
}

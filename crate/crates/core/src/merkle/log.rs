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

//! Append-only Merkle log with inclusion and consistency proofs.
//!
//! Trees of any size use the usual unbalanced construction: the left child
//! always covers the largest power of two strictly smaller than the range.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{empty_log_root, leaf_hash, node_hash, Digest};
use crate::heads::SignedLogRoot;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ProofError {
    #[error("leaf index {index} out of range for tree size {size}")]
    IndexOutOfRange { index: u64, size: u64 },
    #[error("tree size {requested} exceeds current size {current}")]
    SizeOutOfRange { requested: u64, current: u64 },
    #[error("old size {old} is larger than new size {new}")]
    SizesReversed { old: u64, new: u64 },
    #[error("proof is for tree size {proof}, root is for {root}")]
    SizeMismatch { proof: u64, root: u64 },
    #[error("proof path has the wrong length")]
    BadPathLength,
    #[error("recomputed root does not match")]
    RootMismatch,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InclusionProof {
    pub leaf_index: u64,
    pub tree_size: u64,
    /// Sibling hashes, leaf to root.
    pub path: Vec<Digest>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsistencyProof {
    pub old_size: u64,
    pub new_size: u64,
    pub path: Vec<Digest>,
}

/// Largest power of two strictly less than `n` (`n >= 2`).
fn split_point(n: u64) -> u64 {
    debug_assert!(n >= 2);
    1 << (63 - (n - 1).leading_zeros())
}

/// Hash-only Merkle accumulator.
///
/// `levels[h][i]` holds the root of the complete subtree covering leaves
/// `[i·2^h, (i+1)·2^h)`, so any subtree hash is available in `O(log n)`.
#[derive(Clone, Debug, Default)]
pub struct MerkleLog {
    levels: Vec<Vec<Digest>>,
}

impl MerkleLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_payloads<'a>(payloads: impl IntoIterator<Item = &'a [u8]>) -> Self {
        let mut log = Self::new();
        for p in payloads {
            log.append(p);
        }
        log
    }

    pub fn len(&self) -> u64 {
        self.levels.first().map_or(0, |l| l.len() as u64)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn append(&mut self, payload: &[u8]) -> u64 {
        self.push_leaf_hash(leaf_hash(payload))
    }

    pub fn push_leaf_hash(&mut self, hash: Digest) -> u64 {
        if self.levels.is_empty() {
            self.levels.push(Vec::new());
        }
        let index = self.len();
        self.levels[0].push(hash);
        let mut h = 0;
        while self.levels[h].len() % 2 == 0 {
            let n = self.levels[h].len();
            let parent = node_hash(&self.levels[h][n - 2], &self.levels[h][n - 1]);
            if self.levels.len() == h + 1 {
                self.levels.push(Vec::new());
            }
            self.levels[h + 1].push(parent);
            h += 1;
        }
        index
    }

    pub fn leaf(&self, index: u64) -> Option<Digest> {
        self.levels.first()?.get(index as usize).copied()
    }

    pub fn root(&self) -> Digest {
        self.subtree(0, self.len())
    }

    pub fn root_at(&self, size: u64) -> Result<Digest, ProofError> {
        self.check_size(size)?;
        Ok(self.subtree(0, size))
    }

    fn check_size(&self, size: u64) -> Result<(), ProofError> {
        if size > self.len() {
            return Err(ProofError::SizeOutOfRange { requested: size, current: self.len() });
        }
        Ok(())
    }

    fn subtree(&self, start: u64, end: u64) -> Digest {
        let n = end - start;
        if n == 0 {
            return empty_log_root();
        }
        if n.is_power_of_two() && start % n == 0 {
            let h = n.trailing_zeros() as usize;
            return self.levels[h][(start >> h) as usize];
        }
        let k = split_point(n);
        node_hash(&self.subtree(start, start + k), &self.subtree(start + k, end))
    }

    pub fn prove_inclusion(&self, index: u64, size: u64) -> Result<InclusionProof, ProofError> {
        self.check_size(size)?;
        if index >= size {
            return Err(ProofError::IndexOutOfRange { index, size });
        }
        let mut path = Vec::new();
        self.inclusion_path(index, 0, size, &mut path);
        Ok(InclusionProof { leaf_index: index, tree_size: size, path })
    }

    fn inclusion_path(&self, m: u64, start: u64, end: u64, out: &mut Vec<Digest>) {
        let n = end - start;
        if n <= 1 {
            return;
        }
        let k = split_point(n);
        if m < k {
            self.inclusion_path(m, start, start + k, out);
            out.push(self.subtree(start + k, end));
        } else {
            self.inclusion_path(m - k, start + k, end, out);
            out.push(self.subtree(start, start + k));
        }
    }

    pub fn prove_consistency(&self, old_size: u64, new_size: u64) -> Result<ConsistencyProof, ProofError> {
        self.check_size(new_size)?;
        if old_size > new_size {
            return Err(ProofError::SizesReversed { old: old_size, new: new_size });
        }
        let mut path = Vec::new();
        if old_size > 0 && old_size < new_size {
            self.subproof(old_size, 0, new_size, true, &mut path);
        }
        Ok(ConsistencyProof { old_size, new_size, path })
    }

    fn subproof(&self, m: u64, start: u64, end: u64, complete: bool, out: &mut Vec<Digest>) {
        let n = end - start;
        if m == n {
            if !complete {
                out.push(self.subtree(start, end));
            }
            return;
        }
        let k = split_point(n);
        if m <= k {
            self.subproof(m, start, start + k, complete, out);
            out.push(self.subtree(start + k, end));
        } else {
            self.subproof(m - k, start + k, end, false, out);
            out.push(self.subtree(start, start + k));
        }
    }
}

/// Checks `proof` for the payload against a signed root. The signature itself
/// is checked separately with [`SignedLogRoot::verify`].
pub fn verify_inclusion(
    root: &SignedLogRoot,
    leaf_payload: &[u8],
    proof: &InclusionProof,
) -> Result<(), ProofError> {
    if proof.tree_size != root.tree_size {
        return Err(ProofError::SizeMismatch { proof: proof.tree_size, root: root.tree_size });
    }
    verify_inclusion_hash(&root.root, &leaf_hash(leaf_payload), proof)
}

pub fn verify_inclusion_hash(
    root: &Digest,
    leaf: &Digest,
    proof: &InclusionProof,
) -> Result<(), ProofError> {
    let (index, size) = (proof.leaf_index, proof.tree_size);
    if index >= size {
        return Err(ProofError::IndexOutOfRange { index, size });
    }
    let mut f = index;
    let mut s = size - 1;
    let mut r = *leaf;
    for p in &proof.path {
        if s == 0 {
            return Err(ProofError::BadPathLength);
        }
        if f & 1 == 1 || f == s {
            r = node_hash(p, &r);
            while f & 1 == 0 && f != 0 {
                f >>= 1;
                s >>= 1;
            }
        } else {
            r = node_hash(&r, p);
        }
        f >>= 1;
        s >>= 1;
    }
    if s != 0 {
        return Err(ProofError::BadPathLength);
    }
    if r != *root {
        return Err(ProofError::RootMismatch);
    }
    Ok(())
}

pub fn verify_consistency(
    old: &SignedLogRoot,
    new: &SignedLogRoot,
    proof: &ConsistencyProof,
) -> Result<(), ProofError> {
    if proof.old_size != old.tree_size {
        return Err(ProofError::SizeMismatch { proof: proof.old_size, root: old.tree_size });
    }
    if proof.new_size != new.tree_size {
        return Err(ProofError::SizeMismatch { proof: proof.new_size, root: new.tree_size });
    }
    verify_consistency_roots(old.tree_size, &old.root, new.tree_size, &new.root, &proof.path)
}

pub fn verify_consistency_roots(
    old_size: u64,
    old_root: &Digest,
    new_size: u64,
    new_root: &Digest,
    path: &[Digest],
) -> Result<(), ProofError> {
    if old_size > new_size {
        return Err(ProofError::SizesReversed { old: old_size, new: new_size });
    }
    if old_size == new_size {
        if !path.is_empty() {
            return Err(ProofError::BadPathLength);
        }
        return if old_root == new_root { Ok(()) } else { Err(ProofError::RootMismatch) };
    }
    if old_size == 0 {
        // Every tree extends the empty tree.
        return if path.is_empty() && *old_root == empty_log_root() {
            Ok(())
        } else {
            Err(ProofError::BadPathLength)
        };
    }
    if path.is_empty() {
        return Err(ProofError::BadPathLength);
    }

    let mut nodes = path.iter();
    let seed = if old_size.is_power_of_two() { *old_root } else { *nodes.next().unwrap() };
    let mut f = old_size - 1;
    let mut s = new_size - 1;
    while f & 1 == 1 {
        f >>= 1;
        s >>= 1;
    }
    let (mut fr, mut sr) = (seed, seed);
    for c in nodes {
        if s == 0 {
            return Err(ProofError::BadPathLength);
        }
        if f & 1 == 1 || f == s {
            fr = node_hash(c, &fr);
            sr = node_hash(c, &sr);
            while f & 1 == 0 && f != 0 {
                f >>= 1;
                s >>= 1;
            }
        } else {
            sr = node_hash(&sr, c);
        }
        f >>= 1;
        s >>= 1;
    }
    if s != 0 {
        return Err(ProofError::BadPathLength);
    }
    if fr != *old_root || sr != *new_root {
        return Err(ProofError::RootMismatch);
    }
    Ok(())
}

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

//! Sparse Merkle map over 256-bit key digests.
//!
//! The tree has [`MAP_DEPTH`] levels; a key's path is the bits of its digest,
//! most significant first. Empty subtrees hash to a per-level default derived
//! from the empty-leaf hash `SHA-256(0x00)`, so only non-empty subtrees are
//! stored. A subtree holding exactly one key is kept as a single leaf node
//! carrying the hash it would have at that depth.
//!
//! Every committed revision is retained and stays provable.

use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{leaf_hash, node_hash, Digest};
use crate::heads::SignedMapRoot;

pub const MAP_DEPTH: usize = 256;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MapError {
    #[error("unknown revision {requested} (latest is {latest})")]
    UnknownRevision { requested: u64, latest: u64 },
    #[error("empty values cannot be stored")]
    EmptyValue,
    #[error("proof carries {0} siblings, more than the tree depth")]
    PathTooLong(usize),
    #[error("proof sibling count does not match its default-sibling mask")]
    MaskMismatch,
    #[error("proof is for a different key")]
    KeyMismatch,
    #[error("recomputed root does not match")]
    RootMismatch,
}

/// `default_digest(d)` is the hash of an empty subtree rooted at depth `d`
/// (`d = 256` is a single empty leaf).
pub fn default_digest(depth: usize) -> Digest {
    static TABLE: OnceLock<Vec<Digest>> = OnceLock::new();
    let table = TABLE.get_or_init(|| {
        let mut t = vec![Digest::default(); MAP_DEPTH + 1];
        t[MAP_DEPTH] = leaf_hash(b"");
        for d in (0..MAP_DEPTH).rev() {
            t[d] = node_hash(&t[d + 1], &t[d + 1]);
        }
        t
    });
    table[depth]
}

fn combine(key: &Digest, depth: usize, child: &Digest, sibling: &Digest) -> Digest {
    if key.bit(depth) {
        node_hash(sibling, child)
    } else {
        node_hash(child, sibling)
    }
}

/// Hash of a subtree at `depth` that contains only `key` with leaf hash `leaf`.
fn lift(key: &Digest, leaf: Digest, depth: usize) -> Digest {
    let mut h = leaf;
    for d in (depth..MAP_DEPTH).rev() {
        h = combine(key, d, &h, &default_digest(d + 1));
    }
    h
}

#[derive(Debug)]
enum Node {
    Leaf { key: Digest, value: Arc<[u8]>, hash: Digest },
    Branch { left: Link, right: Link, hash: Digest },
}

type Link = Option<Arc<Node>>;

impl Node {
    fn hash(&self) -> Digest {
        match self {
            Node::Leaf { hash, .. } | Node::Branch { hash, .. } => *hash,
        }
    }
}

fn link_hash(link: &Link, depth: usize) -> Digest {
    link.as_ref().map_or_else(|| default_digest(depth), |n| n.hash())
}

fn new_leaf(key: Digest, value: Arc<[u8]>, depth: usize) -> Arc<Node> {
    let hash = lift(&key, leaf_hash(&value), depth);
    Arc::new(Node::Leaf { key, value, hash })
}

fn new_branch(left: Link, right: Link, depth: usize) -> Arc<Node> {
    let hash = node_hash(&link_hash(&left, depth + 1), &link_hash(&right, depth + 1));
    Arc::new(Node::Branch { left, right, hash })
}

fn insert(link: &Link, depth: usize, key: Digest, value: Arc<[u8]>) -> Arc<Node> {
    match link.as_deref() {
        None => new_leaf(key, value, depth),
        Some(Node::Leaf { key: k, .. }) if *k == key => new_leaf(key, value, depth),
        Some(Node::Leaf { key: k, value: v, .. }) => {
            // Push the resident leaf one level down and retry.
            let resident = new_leaf(*k, v.clone(), depth + 1);
            let (l, r) = if k.bit(depth) { (None, Some(resident)) } else { (Some(resident), None) };
            let split = new_branch(l, r, depth);
            insert(&Some(split), depth, key, value)
        }
        Some(Node::Branch { left, right, .. }) => {
            if key.bit(depth) {
                let r = insert(right, depth + 1, key, value);
                new_branch(left.clone(), Some(r), depth)
            } else {
                let l = insert(left, depth + 1, key, value);
                new_branch(Some(l), right.clone(), depth)
            }
        }
    }
}

/// Inclusion or non-inclusion proof for one key.
///
/// Bit `d` of `default_mask` (MSB-first, as for key bits) is set when the
/// sibling at depth `d + 1` on the key's path is the empty-subtree default;
/// those siblings are omitted from `path`, which lists the rest leaf to root.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MapProof {
    pub key_digest: Digest,
    /// `None` proves the key is absent.
    #[serde(default, skip_serializing_if = "Option::is_none", with = "opt_hex")]
    pub value: Option<Vec<u8>>,
    #[serde(with = "crate::codec::hex_array")]
    pub default_mask: [u8; 32],
    pub path: Vec<Digest>,
}

mod opt_hex {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<Vec<u8>>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(b) => s.serialize_some(&hex::encode(b)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<u8>>, D::Error> {
        Option::<String>::deserialize(d)?
            .map(|s| hex::decode(s).map_err(serde::de::Error::custom))
            .transpose()
    }
}

impl MapProof {
    pub fn is_inclusion(&self) -> bool {
        self.value.is_some()
    }

    fn mask_bit(&self, depth: usize) -> bool {
        (self.default_mask[depth / 8] >> (7 - depth % 8)) & 1 == 1
    }

    /// Root implied by this proof.
    pub fn compute_root(&self) -> Result<Digest, MapError> {
        if self.path.len() > MAP_DEPTH {
            return Err(MapError::PathTooLong(self.path.len()));
        }
        let explicit = (0..MAP_DEPTH).filter(|&d| !self.mask_bit(d)).count();
        if explicit != self.path.len() {
            return Err(MapError::MaskMismatch);
        }
        let mut h = match &self.value {
            Some(v) if v.is_empty() => return Err(MapError::EmptyValue),
            Some(v) => leaf_hash(v),
            None => default_digest(MAP_DEPTH),
        };
        let mut siblings = self.path.iter();
        for d in (0..MAP_DEPTH).rev() {
            let sib = if self.mask_bit(d) {
                default_digest(d + 1)
            } else {
                *siblings.next().expect("counted above")
            };
            h = combine(&self.key_digest, d, &h, &sib);
        }
        Ok(h)
    }
}

pub fn verify_map_proof(
    map_root: &SignedMapRoot,
    key_digest: &Digest,
    proof: &MapProof,
) -> Result<(), MapError> {
    if proof.key_digest != *key_digest {
        return Err(MapError::KeyMismatch);
    }
    if proof.compute_root()? != map_root.root {
        return Err(MapError::RootMismatch);
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MapRevision {
    pub revision: u64,
    pub root: Digest,
}

/// Versioned sparse Merkle map. Revision 0 is the empty map.
#[derive(Clone, Debug)]
pub struct SparseMap {
    roots: Vec<Link>,
}

impl Default for SparseMap {
    fn default() -> Self {
        Self { roots: vec![None] }
    }
}

impl SparseMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn latest_revision(&self) -> u64 {
        self.roots.len() as u64 - 1
    }

    fn link(&self, revision: u64) -> Result<&Link, MapError> {
        self.roots.get(revision as usize).ok_or(MapError::UnknownRevision {
            requested: revision,
            latest: self.latest_revision(),
        })
    }

    pub fn root(&self, revision: u64) -> Result<Digest, MapError> {
        Ok(link_hash(self.link(revision)?, 0))
    }

    pub fn latest(&self) -> MapRevision {
        let revision = self.latest_revision();
        MapRevision { revision, root: link_hash(&self.roots[revision as usize], 0) }
    }

    /// Applies `pairs` in order as one new revision. A key repeated within the
    /// batch keeps its last value. An empty batch still creates a revision.
    pub fn set_batch<I, V>(&mut self, pairs: I) -> Result<MapRevision, MapError>
    where
        I: IntoIterator<Item = (Digest, V)>,
        V: Into<Arc<[u8]>>,
    {
        let mut root = self.roots.last().cloned().flatten();
        for (key, value) in pairs {
            let value: Arc<[u8]> = value.into();
            if value.is_empty() {
                return Err(MapError::EmptyValue);
            }
            root = Some(insert(&root, 0, key, value));
        }
        self.roots.push(root);
        Ok(self.latest())
    }

    pub fn get(&self, key: &Digest, revision: u64) -> Result<Option<Arc<[u8]>>, MapError> {
        let mut node = self.link(revision)?.as_deref();
        let mut depth = 0;
        while let Some(n) = node {
            match n {
                Node::Leaf { key: k, value, .. } => {
                    return Ok((k == key).then(|| value.clone()));
                }
                Node::Branch { left, right, .. } => {
                    node = if key.bit(depth) { right.as_deref() } else { left.as_deref() };
                    depth += 1;
                }
            }
        }
        Ok(None)
    }

    pub fn prove(&self, key: &Digest, revision: u64) -> Result<MapProof, MapError> {
        // Siblings indexed by the depth of the parent they hang off.
        let mut siblings: Vec<Option<Digest>> = vec![None; MAP_DEPTH];
        let mut value = None;
        let mut node = self.link(revision)?.as_deref();
        let mut depth = 0;
        while let Some(n) = node {
            match n {
                Node::Branch { left, right, .. } => {
                    let (next, other) = if key.bit(depth) { (right, left) } else { (left, right) };
                    siblings[depth] = other.as_ref().map(|o| o.hash());
                    node = next.as_deref();
                    depth += 1;
                }
                Node::Leaf { key: k, value: v, .. } => {
                    if k == key {
                        value = Some(v.to_vec());
                    } else {
                        // The resident leaf becomes a sibling where the paths part.
                        let split = (depth..MAP_DEPTH).find(|&d| k.bit(d) != key.bit(d)).unwrap();
                        siblings[split] = Some(lift(k, leaf_hash(v), split + 1));
                    }
                    break;
                }
            }
        }

        let mut default_mask = [0u8; 32];
        let mut path = Vec::new();
        for d in (0..MAP_DEPTH).rev() {
            match siblings[d] {
                Some(h) if h != default_digest(d + 1) => path.push(h),
                _ => default_mask[d / 8] |= 1 << (7 - d % 8),
            }
        }
        Ok(MapProof { key_digest: *key, value, default_mask, path })
    }

    /// All present `(key, value)` pairs at `revision`, in key order.
    pub fn entries(&self, revision: u64) -> Result<Vec<(Digest, Arc<[u8]>)>, MapError> {
        fn walk(link: &Link, out: &mut Vec<(Digest, Arc<[u8]>)>) {
            match link.as_deref() {
                None => {}
                Some(Node::Leaf { key, value, .. }) => out.push((*key, value.clone())),
                Some(Node::Branch { left, right, .. }) => {
                    walk(left, out);
                    walk(right, out);
                }
            }
        }
        let mut out = Vec::new();
        walk(self.link(revision)?, &mut out);
        Ok(out)
    }
}

/// Full-tree root recomputed from scratch by recursive partitioning, with no
/// shared state with [`SparseMap`]. Later duplicates win.
pub fn brute_force_root(pairs: &[(Digest, Vec<u8>)]) -> Digest {
    let mut dedup = std::collections::BTreeMap::new();
    for (k, v) in pairs {
        dedup.insert(*k, v.as_slice());
    }
    let items: Vec<(Digest, &[u8])> = dedup.into_iter().collect();

    fn rec(items: &[(Digest, &[u8])], depth: usize) -> Digest {
        if items.is_empty() {
            return default_digest(depth);
        }
        if depth == MAP_DEPTH {
            return leaf_hash(items[0].1);
        }
        // Keys are sorted, so the left half is a prefix.
        let mid = items.partition_point(|(k, _)| !k.bit(depth));
        node_hash(&rec(&items[..mid], depth + 1), &rec(&items[mid..], depth + 1))
    }
    rec(&items, 0)
}

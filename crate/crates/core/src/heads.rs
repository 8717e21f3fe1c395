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

//! Signed log and map heads.
//!
//! Canonical log head bytes: `version u8 ‖ tree_size u64 ‖ timestamp u64 ‖ root[32]`.
//! Canonical map head bytes: `version u8 ‖ revision u64 ‖ log_size_covered u64 ‖
//! timestamp u64 ‖ root[32]`. Integers are big-endian. Signatures are Ed25519
//! over these bytes.

use std::fmt;

use ed25519_dalek::{Signer, SigningKey, Verifier, VerifyingKey};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{DecodeError, Reader, Writer};
use crate::merkle::Digest;

pub const HEAD_VERSION: u8 = 1;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SignatureError {
    #[error("signature does not verify")]
    Invalid,
    #[error("malformed public key")]
    BadKey,
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Signature(#[serde(with = "crate::codec::hex_array")] pub [u8; 64]);

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Signature({}…)", hex::encode(&self.0[..8]))
    }
}

impl Signature {
    pub fn verify(&self, key: &VerifyingKey, msg: &[u8]) -> Result<(), SignatureError> {
        let sig = ed25519_dalek::Signature::from_bytes(&self.0);
        key.verify(msg, &sig).map_err(|_| SignatureError::Invalid)
    }
}

/// Public half of an Ed25519 key, hex on the wire.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PublicKey(#[serde(with = "crate::codec::hex_array")] pub [u8; 32]);

impl PublicKey {
    pub fn verifying_key(&self) -> Result<VerifyingKey, SignatureError> {
        VerifyingKey::from_bytes(&self.0).map_err(|_| SignatureError::BadKey)
    }

    /// SHA-256 of the key bytes, hex encoded.
    pub fn fingerprint(&self) -> String {
        Digest::sha256(&self.0).to_hex()
    }
}

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PublicKey({})", hex::encode(self.0))
    }
}

impl From<VerifyingKey> for PublicKey {
    fn from(k: VerifyingKey) -> Self {
        Self(k.to_bytes())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignedLogRoot {
    pub tree_size: u64,
    pub root: Digest,
    /// Milliseconds since the Unix epoch.
    pub timestamp: u64,
    pub signature: Signature,
}

impl SignedLogRoot {
    pub const CANONICAL_LEN: usize = 1 + 8 + 8 + 32;

    pub fn canonical_bytes(&self) -> Vec<u8> {
        log_head_bytes(self.tree_size, self.timestamp, &self.root)
    }

    pub fn verify(&self, key: &VerifyingKey) -> Result<(), SignatureError> {
        self.signature.verify(key, &self.canonical_bytes())
    }
}

fn log_head_bytes(tree_size: u64, timestamp: u64, root: &Digest) -> Vec<u8> {
    let mut w = Writer::new();
    w.u8(HEAD_VERSION).u64(tree_size).u64(timestamp).fixed(&root.0);
    w.finish()
}

fn map_head_bytes(revision: u64, covered: u64, timestamp: u64, root: &Digest) -> Vec<u8> {
    let mut w = Writer::new();
    w.u8(HEAD_VERSION).u64(revision).u64(covered).u64(timestamp).fixed(&root.0);
    w.finish()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignedMapRoot {
    pub revision: u64,
    pub root: Digest,
    /// Number of request-log entries folded into this revision.
    pub log_size_covered: u64,
    pub timestamp: u64,
    pub signature: Signature,
}

impl SignedMapRoot {
    pub const ENCODED_LEN: usize = 1 + 8 + 8 + 8 + 32 + 64;

    pub fn canonical_bytes(&self) -> Vec<u8> {
        map_head_bytes(self.revision, self.log_size_covered, self.timestamp, &self.root)
    }

    pub fn verify(&self, key: &VerifyingKey) -> Result<(), SignatureError> {
        self.signature.verify(key, &self.canonical_bytes())
    }

    /// Canonical bytes followed by the signature: the map-head log entry format.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = self.canonical_bytes();
        out.extend_from_slice(&self.signature.0);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = Reader::new(bytes);
        if r.u8()? != HEAD_VERSION {
            return Err(DecodeError::Invalid("map head version"));
        }
        let revision = r.u64()?;
        let log_size_covered = r.u64()?;
        let timestamp = r.u64()?;
        let root = Digest(r.array()?);
        let signature = Signature(r.array()?);
        r.finish()?;
        Ok(Self { revision, root, log_size_covered, timestamp, signature })
    }
}

/// The log server's signing key.
pub struct HeadSigner {
    key: SigningKey,
}

impl HeadSigner {
    pub fn new(key: SigningKey) -> Self {
        Self { key }
    }

    pub fn from_seed(seed: [u8; 32]) -> Self {
        Self::new(SigningKey::from_bytes(&seed))
    }

    pub fn public_key(&self) -> PublicKey {
        self.key.verifying_key().into()
    }

    pub fn verifying_key(&self) -> VerifyingKey {
        self.key.verifying_key()
    }

    pub fn sign(&self, msg: &[u8]) -> Signature {
        Signature(self.key.sign(msg).to_bytes())
    }

    pub fn sign_log_root(&self, tree_size: u64, root: Digest, timestamp: u64) -> SignedLogRoot {
        let signature = self.sign(&log_head_bytes(tree_size, timestamp, &root));
        SignedLogRoot { tree_size, root, timestamp, signature }
    }

    pub fn sign_map_root(
        &self,
        revision: u64,
        root: Digest,
        log_size_covered: u64,
        timestamp: u64,
    ) -> SignedMapRoot {
        let signature = self.sign(&map_head_bytes(revision, log_size_covered, timestamp, &root));
        SignedMapRoot { revision, root, log_size_covered, timestamp, signature }
    }
}

impl fmt::Debug for HeadSigner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HeadSigner").field("public", &self.public_key()).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_log_head_layout() {
        let signer = HeadSigner::from_seed([9; 32]);
        let root = Digest([0xab; 32]);
        let head = signer.sign_log_root(0x0102, root, 0x0a0b);
        let bytes = head.canonical_bytes();
        assert_eq!(bytes.len(), SignedLogRoot::CANONICAL_LEN);
        assert_eq!(bytes[0], HEAD_VERSION);
        assert_eq!(&bytes[1..9], &[0, 0, 0, 0, 0, 0, 1, 2]);
        assert_eq!(&bytes[9..17], &[0, 0, 0, 0, 0, 0, 0x0a, 0x0b]);
        assert_eq!(&bytes[17..], &[0xab; 32]);
        head.verify(&signer.verifying_key()).unwrap();
    }

    #[test]
    fn tampered_heads_fail() {
        let signer = HeadSigner::from_seed([1; 32]);
        let other = HeadSigner::from_seed([2; 32]);
        let mut head = signer.sign_log_root(4, Digest([1; 32]), 10);
        assert_eq!(head.verify(&other.verifying_key()), Err(SignatureError::Invalid));
        head.tree_size = 5;
        assert_eq!(head.verify(&signer.verifying_key()), Err(SignatureError::Invalid));

        let m = signer.sign_map_root(3, Digest([7; 32]), 12, 99);
        let decoded = SignedMapRoot::decode(&m.encode()).unwrap();
        assert_eq!(decoded, m);
        decoded.verify(&signer.verifying_key()).unwrap();
        assert!(SignedMapRoot::decode(&m.encode()[1..]).is_err());
    }
}

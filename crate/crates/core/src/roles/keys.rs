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

//! Party key files: one `<name> <hex>` pair per line, `#` comments allowed.
//!
//! Names in use: `signing` (Ed25519 seed), `encryption` (X25519 secret),
//! `user-public` and `auditor-public` (X25519 public keys), `server-public`
//! (Ed25519 head key), `kdf-salt` (16 bytes) and `store-key` (32 bytes).

use std::collections::BTreeMap;
use std::path::Path;

use ed25519_dalek::VerifyingKey;
use thiserror::Error;

use crate::envelope::PartySigner;
use crate::heads::PublicKey;
use crate::identity::{EncryptionKeyPair, EncryptionPublicKey};

#[derive(Debug, Error)]
pub enum KeyFileError {
    #[error("line {0}: expected `<name> <hex>`")]
    Syntax(usize),
    #[error("missing key `{0}`")]
    Missing(String),
    #[error("key `{name}` must be {expected} bytes")]
    Length { name: String, expected: usize },
    #[error("key `{0}` is not a valid public key")]
    BadKey(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct KeyFile {
    entries: BTreeMap<String, Vec<u8>>,
}

impl KeyFile {
    pub fn parse(text: &str) -> Result<Self, KeyFileError> {
        let mut entries = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let (Some(name), Some(value), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(KeyFileError::Syntax(n + 1));
            };
            let bytes = hex::decode(value).map_err(|_| KeyFileError::Syntax(n + 1))?;
            entries.insert(name.to_string(), bytes);
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self, KeyFileError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn set(&mut self, name: &str, bytes: &[u8]) {
        self.entries.insert(name.to_string(), bytes.to_vec());
    }

    pub fn get(&self, name: &str) -> Option<&[u8]> {
        self.entries.get(name).map(Vec::as_slice)
    }

    pub fn fixed<const N: usize>(&self, name: &str) -> Result<[u8; N], KeyFileError> {
        let v = self.get(name).ok_or_else(|| KeyFileError::Missing(name.into()))?;
        v.try_into().map_err(|_| KeyFileError::Length { name: name.into(), expected: N })
    }

    pub fn signer(&self) -> Result<PartySigner, KeyFileError> {
        Ok(PartySigner::from_seed(self.fixed("signing")?))
    }

    pub fn encryption(&self) -> Result<EncryptionKeyPair, KeyFileError> {
        Ok(EncryptionKeyPair::from_secret(self.fixed("encryption")?))
    }

    pub fn encryption_public(&self, name: &str) -> Result<EncryptionPublicKey, KeyFileError> {
        Ok(EncryptionPublicKey(self.fixed(name)?))
    }

    pub fn server_key(&self) -> Result<VerifyingKey, KeyFileError> {
        PublicKey(self.fixed("server-public")?).verifying_key().map_err(|_| KeyFileError::BadKey("server-public".into()))
    }

    pub fn to_text(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k} {}\n", hex::encode(v))).collect()
    }
}

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

//! Server configuration, the party key registry and the admission clock.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{SystemTime, UNIX_EPOCH};

use ed25519_dalek::{SigningKey, VerifyingKey};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::heads::PublicKey;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parsing config: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("{0}")]
    Invalid(String),
}

fn read(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_owned(), source })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerConfig {
    /// Requests per map revision.
    pub batch_size: usize,
    /// Longest a request waits for a map revision, in milliseconds.
    pub batch_timeout_ms: u64,
    /// Hex Ed25519 seed used to sign heads.
    pub signing_key: PathBuf,
    /// Party registry, see [`AgentRegistry::parse`].
    pub registry: PathBuf,
    pub listen: String,
    pub data_dir: PathBuf,
    /// Deployment-wide PBKDF2 salt (32 hex chars), handed to agents.
    pub kdf_salt: String,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            batch_size: 300,
            batch_timeout_ms: 1000,
            signing_key: "server.key".into(),
            registry: "registry.txt".into(),
            listen: "127.0.0.1:8420".into(),
            data_dir: "data".into(),
            kdf_salt: "00".repeat(16),
        }
    }
}

impl ServerConfig {
    /// Loads a TOML file. Relative paths resolve against the file's directory,
    /// then `VAMS_LISTEN` and `VAMS_DATA_DIR` override.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let mut cfg: Self = toml::from_str(&read(path)?)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.signing_key, &mut cfg.registry, &mut cfg.data_dir] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        cfg.apply_env(|k| std::env::var(k).ok());
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply_env(&mut self, var: impl Fn(&str) -> Option<String>) {
        if let Some(v) = var("VAMS_LISTEN") {
            self.listen = v;
        }
        if let Some(v) = var("VAMS_DATA_DIR") {
            self.data_dir = v.into();
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.batch_size == 0 {
            return Err(ConfigError::Invalid("batch_size must be at least 1".into()));
        }
        self.salt()?;
        Ok(())
    }

    pub fn salt(&self) -> Result<[u8; 16], ConfigError> {
        hex::decode(&self.kdf_salt)
            .ok()
            .and_then(|v| v.try_into().ok())
            .ok_or_else(|| ConfigError::Invalid("kdf_salt must be 32 hex characters".into()))
    }

    pub fn load_signing_key(&self) -> Result<SigningKey, ConfigError> {
        parse_seed(&read(&self.signing_key)?).map(|s| SigningKey::from_bytes(&s))
    }

    pub fn load_registry(&self) -> Result<AgentRegistry, ConfigError> {
        AgentRegistry::parse(&read(&self.registry)?)
    }
}

/// Parses a 32-byte hex seed, ignoring surrounding whitespace.
pub fn parse_seed(text: &str) -> Result<[u8; 32], ConfigError> {
    hex::decode(text.trim())
        .ok()
        .and_then(|v| v.try_into().ok())
        .ok_or_else(|| ConfigError::Invalid("expected 64 hex characters".into()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Agent,
    Broker,
    Auditor,
    Provider,
}

impl std::str::FromStr for Role {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "agent" => Role::Agent,
            "broker" => Role::Broker,
            "auditor" => Role::Auditor,
            "provider" => Role::Provider,
            other => return Err(ConfigError::Invalid(format!("unknown role {other:?}"))),
        })
    }
}

#[derive(Clone, Debug)]
pub struct RegisteredKey {
    pub role: Role,
    pub key: VerifyingKey,
}

/// Public keys allowed to write to the log, indexed by fingerprint.
#[derive(Clone, Debug, Default)]
pub struct AgentRegistry {
    keys: HashMap<String, RegisteredKey>,
}

impl AgentRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// One `<role> <public key hex>` pair per line; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut reg = Self::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let bad = || ConfigError::Invalid(format!("registry line {}: expected `<role> <hex key>`", n + 1));
            let mut parts = line.split_whitespace();
            let (Some(role), Some(key), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(bad());
            };
            let bytes: [u8; 32] = hex::decode(key).ok().and_then(|v| v.try_into().ok()).ok_or_else(bad)?;
            let key = PublicKey(bytes).verifying_key().map_err(|_| bad())?;
            reg.register(role.parse()?, key);
        }
        Ok(reg)
    }

    pub fn register(&mut self, role: Role, key: VerifyingKey) -> String {
        let id = PublicKey::from(key).fingerprint();
        self.keys.insert(id.clone(), RegisteredKey { role, key });
        id
    }

    pub fn lookup(&self, key_id: &str) -> Option<&RegisteredKey> {
        self.keys.get(key_id)
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }
}

/// Milliseconds since the Unix epoch.
pub trait Clock: Send + Sync {
    fn now_ms(&self) -> u64;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now_ms(&self) -> u64 {
        SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
    }
}

/// A clock that only moves when told to.
#[derive(Debug, Default)]
pub struct ManualClock(AtomicU64);

impl ManualClock {
    pub fn new(ms: u64) -> Self {
        Self(AtomicU64::new(ms))
    }

    pub fn set(&self, ms: u64) {
        self.0.store(ms, Ordering::SeqCst);
    }

    pub fn advance(&self, ms: u64) {
        self.0.fetch_add(ms, Ordering::SeqCst);
    }
}

impl Clock for ManualClock {
    fn now_ms(&self) -> u64 {
        self.0.load(Ordering::SeqCst)
    }
}

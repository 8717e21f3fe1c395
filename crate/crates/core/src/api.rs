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

//! The log server's client-facing interface, shared by the in-process
//! server and the HTTP client.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::envelope::{RequestEnvelope, SignedManifest};
use crate::heads::{SignedLogRoot, SignedMapRoot};
use crate::merkle::{ConsistencyProof, Digest, InclusionProof, MapProof};

/// Why the server refused to admit an entry.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RejectCode {
    RejectedSignature,
    RejectedTimestamp,
    RejectedFormat,
}

impl RejectCode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::RejectedSignature => "REJECTED_SIGNATURE",
            Self::RejectedTimestamp => "REJECTED_TIMESTAMP",
            Self::RejectedFormat => "REJECTED_FORMAT",
        }
    }
}

impl std::fmt::Display for RejectCode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum ApiError {
    #[error("{code}: {detail}")]
    Rejected { code: RejectCode, detail: String },
    #[error("not found: {0}")]
    NotFound(String),
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("server error: {0}")]
    Internal(String),
    #[error("transport: {0}")]
    Transport(String),
}

impl ApiError {
    pub fn rejected(code: RejectCode, detail: impl Into<String>) -> Self {
        Self::Rejected { code, detail: detail.into() }
    }

    pub fn reject_code(&self) -> Option<RejectCode> {
        match self {
            Self::Rejected { code, .. } => Some(*code),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubmitReceipt {
    pub index: u64,
    pub log_root: SignedLogRoot,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MapLookup {
    pub head: SignedMapRoot,
    pub proof: MapProof,
}

/// Latest request-log head, latest map head and latest map-head-log head.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignedHeads {
    pub log: SignedLogRoot,
    pub map: SignedMapRoot,
    pub head_log: SignedLogRoot,
}

pub trait LogApi: Send + Sync {
    fn submit_request(&self, envelope: &RequestEnvelope) -> Result<SubmitReceipt, ApiError>;
    fn submit_audit(&self, manifest: &SignedManifest) -> Result<SubmitReceipt, ApiError>;

    fn log_root(&self) -> Result<SignedLogRoot, ApiError>;
    fn log_entry(&self, index: u64) -> Result<Vec<u8>, ApiError>;
    fn log_inclusion(&self, index: u64, size: u64) -> Result<InclusionProof, ApiError>;
    fn log_consistency(&self, old_size: u64, new_size: u64) -> Result<ConsistencyProof, ApiError>;

    fn map_root(&self) -> Result<SignedMapRoot, ApiError>;
    /// Proof for `key` at `revision`, or at the latest revision if `None`.
    fn map_proof(&self, key: &Digest, revision: Option<u64>) -> Result<MapLookup, ApiError>;

    fn headlog_root(&self) -> Result<SignedLogRoot, ApiError>;
    /// Encoded map head stored at `index` (revision `index + 1`).
    fn headlog_entry(&self, index: u64) -> Result<Vec<u8>, ApiError>;
    fn headlog_inclusion(&self, index: u64, size: u64) -> Result<InclusionProof, ApiError>;
    fn headlog_consistency(&self, old_size: u64, new_size: u64) -> Result<ConsistencyProof, ApiError>;

    fn signed_heads(&self) -> Result<SignedHeads, ApiError> {
        Ok(SignedHeads { log: self.log_root()?, map: self.map_root()?, head_log: self.headlog_root()? })
    }
}

impl<T: LogApi + ?Sized> LogApi for std::sync::Arc<T> {
    fn submit_request(&self, e: &RequestEnvelope) -> Result<SubmitReceipt, ApiError> {
        (**self).submit_request(e)
    }
    fn submit_audit(&self, m: &SignedManifest) -> Result<SubmitReceipt, ApiError> {
        (**self).submit_audit(m)
    }
    fn log_root(&self) -> Result<SignedLogRoot, ApiError> {
        (**self).log_root()
    }
    fn log_entry(&self, index: u64) -> Result<Vec<u8>, ApiError> {
        (**self).log_entry(index)
    }
    fn log_inclusion(&self, index: u64, size: u64) -> Result<InclusionProof, ApiError> {
        (**self).log_inclusion(index, size)
    }
    fn log_consistency(&self, old_size: u64, new_size: u64) -> Result<ConsistencyProof, ApiError> {
        (**self).log_consistency(old_size, new_size)
    }
    fn map_root(&self) -> Result<SignedMapRoot, ApiError> {
        (**self).map_root()
    }
    fn map_proof(&self, key: &Digest, revision: Option<u64>) -> Result<MapLookup, ApiError> {
        (**self).map_proof(key, revision)
    }
    fn headlog_root(&self) -> Result<SignedLogRoot, ApiError> {
        (**self).headlog_root()
    }
    fn headlog_entry(&self, index: u64) -> Result<Vec<u8>, ApiError> {
        (**self).headlog_entry(index)
    }
    fn headlog_inclusion(&self, index: u64, size: u64) -> Result<InclusionProof, ApiError> {
        (**self).headlog_inclusion(index, size)
    }
    fn headlog_consistency(&self, old_size: u64, new_size: u64) -> Result<ConsistencyProof, ApiError> {
        (**self).headlog_consistency(old_size, new_size)
    }
    fn signed_heads(&self) -> Result<SignedHeads, ApiError> {
        (**self).signed_heads()
    }
}

/// Error body of the HTTP API: a machine-readable code and a message.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireError {
    pub code: String,
    pub detail: String,
}

impl From<&ApiError> for WireError {
    fn from(e: &ApiError) -> Self {
        let (code, detail) = match e {
            ApiError::Rejected { code, detail } => (code.as_str(), detail.clone()),
            ApiError::NotFound(d) => ("NOT_FOUND", d.clone()),
            ApiError::BadRequest(d) => ("BAD_REQUEST", d.clone()),
            ApiError::Internal(d) => ("INTERNAL", d.clone()),
            ApiError::Transport(d) => ("TRANSPORT", d.clone()),
        };
        Self { code: code.into(), detail }
    }
}

impl From<WireError> for ApiError {
    fn from(w: WireError) -> Self {
        let code = serde_json::from_value::<RejectCode>(serde_json::Value::String(w.code.clone()));
        match (code, w.code.as_str()) {
            (Ok(code), _) => Self::Rejected { code, detail: w.detail },
            (_, "NOT_FOUND") => Self::NotFound(w.detail),
            (_, "BAD_REQUEST") => Self::BadRequest(w.detail),
            (_, "TRANSPORT") => Self::Transport(w.detail),
            _ => Self::Internal(w.detail),
        }
    }
}

/// Parses a map key given either as a common identifier (32 hex digits) or
/// as a key digest (64 hex digits).
pub fn parse_map_key(s: &str) -> Result<Digest, ApiError> {
    match s.len() {
        32 => s
            .parse::<crate::identity::CommonId>()
            .map(|id| crate::envelope::request_key_digest(&id))
            .map_err(|e| ApiError::BadRequest(e.to_string())),
        64 => Digest::from_hex(s).map_err(|e| ApiError::BadRequest(e.to_string())),
        n => Err(ApiError::BadRequest(format!("map key must be 32 or 64 hex digits, got {n}"))),
    }
}

/// A raw log entry as served over HTTP.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntryResponse {
    pub index: u64,
    #[serde(with = "crate::codec::hex_vec")]
    pub entry: Vec<u8>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wire_errors_roundtrip() {
        let cases = [
            ApiError::rejected(RejectCode::RejectedTimestamp, "late"),
            ApiError::NotFound("x".into()),
            ApiError::BadRequest("y".into()),
            ApiError::Internal("z".into()),
        ];
        for e in cases {
            let w = WireError::from(&e);
            let back: WireError = serde_json::from_str(&serde_json::to_string(&w).unwrap()).unwrap();
            assert_eq!(ApiError::from(back), e);
        }
        assert_eq!(WireError::from(&ApiError::rejected(RejectCode::RejectedFormat, "")).code, "REJECTED_FORMAT");
    }

    #[test]
    fn map_keys_accept_both_forms() {
        let id = crate::identity::CommonId([7; 16]);
        let digest = crate::envelope::request_key_digest(&id);
        assert_eq!(parse_map_key(&id.to_hex()).unwrap(), digest);
        assert_eq!(parse_map_key(&digest.to_hex()).unwrap(), digest);
        assert!(parse_map_key("abc").is_err());
        assert!(parse_map_key(&"zz".repeat(16)).is_err());
    }
}

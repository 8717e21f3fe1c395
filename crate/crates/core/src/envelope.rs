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

//! Log records: signed request envelopes and signed audit manifests, their
//! canonical encodings, and the map entries derived from them.

use ed25519_dalek::{SigningKey, VerifyingKey};
use serde::{Deserialize, Serialize};

use crate::codec::{DecodeError, Reader, Writer};
use crate::heads::{PublicKey, Signature, SignatureError};
use crate::identity::{CommonId, SealedPayload};
use crate::merkle::Digest;

const REQUEST_TAG: u8 = 0x01;
const AUDIT_TAG: u8 = 0x02;
const SIGNED_VERSION: u8 = 1;
/// First byte of map keys reserved for audit manifests; request keys are
/// 16-byte identifiers so the two never collide.
const AUDIT_KEY_PREFIX: &[u8] = b"\xffaudit";

/// An agent's signed, dual-encrypted access request.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequestEnvelope {
    pub id_c: CommonId,
    #[serde(flatten)]
    pub sealed: SealedPayload,
    pub agent_key_id: String,
    pub timestamp: u64,
    pub signature: Signature,
}

fn request_signed_bytes(id_c: &CommonId, sealed: &SealedPayload, timestamp: u64) -> Vec<u8> {
    let mut w = Writer::new();
    w.u8(SIGNED_VERSION)
        .fixed(&id_c.0)
        .bytes(&sealed.user_ct)
        .bytes(&sealed.auditor_ct)
        .u64(timestamp);
    w.finish()
}

impl RequestEnvelope {
    pub fn signed_bytes(&self) -> Vec<u8> {
        request_signed_bytes(&self.id_c, &self.sealed, self.timestamp)
    }

    pub fn verify(&self, key: &VerifyingKey) -> Result<(), SignatureError> {
        self.signature.verify(key, &self.signed_bytes())
    }

    pub fn map_key_digest(&self) -> Digest {
        request_key_digest(&self.id_c)
    }
}

/// Map key digest for a common identifier: `SHA-256(id_c)`.
pub fn request_key_digest(id_c: &CommonId) -> Digest {
    Digest::sha256(&id_c.0)
}

/// Map key digest for the audit manifest stored at log position `index`.
pub fn audit_key_digest(index: u64) -> Digest {
    let mut key = AUDIT_KEY_PREFIX.to_vec();
    key.extend_from_slice(&index.to_be_bytes());
    Digest::sha256(&key)
}

/// An auditor-signed audit manifest. `manifest` holds the JSON document as
/// published; the signature covers it byte for byte.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignedManifest {
    pub auditor_key_id: String,
    pub timestamp: u64,
    pub manifest: String,
    pub signature: Signature,
}

fn manifest_signed_bytes(manifest: &str, timestamp: u64) -> Vec<u8> {
    let mut w = Writer::new();
    w.u8(SIGNED_VERSION).bytes(manifest.as_bytes()).u64(timestamp);
    w.finish()
}

impl SignedManifest {
    pub fn verify(&self, key: &VerifyingKey) -> Result<(), SignatureError> {
        self.signature.verify(key, &manifest_signed_bytes(&self.manifest, self.timestamp))
    }
}

/// A party's Ed25519 signing key plus the id it is registered under.
pub struct PartySigner {
    pub key_id: String,
    key: SigningKey,
}

impl PartySigner {
    /// Registers under the key's fingerprint, as the server registry does.
    pub fn new(key: SigningKey) -> Self {
        let key_id = PublicKey::from(key.verifying_key()).fingerprint();
        Self { key_id, key }
    }

    pub fn from_seed(seed: [u8; 32]) -> Self {
        Self::new(SigningKey::from_bytes(&seed))
    }

    pub fn generate<R: rand::RngCore + rand::CryptoRng>(rng: &mut R) -> Self {
        Self::new(SigningKey::generate(rng))
    }

    pub fn seed(&self) -> [u8; 32] {
        self.key.to_bytes()
    }

    pub fn public_key(&self) -> PublicKey {
        self.key.verifying_key().into()
    }

    fn sign(&self, msg: &[u8]) -> Signature {
        use ed25519_dalek::Signer;
        Signature(self.key.sign(msg).to_bytes())
    }

    pub fn sign_request(&self, id_c: CommonId, sealed: SealedPayload, timestamp: u64) -> RequestEnvelope {
        let signature = self.sign(&request_signed_bytes(&id_c, &sealed, timestamp));
        RequestEnvelope { id_c, sealed, agent_key_id: self.key_id.clone(), timestamp, signature }
    }

    pub fn sign_manifest(&self, manifest: String, timestamp: u64) -> SignedManifest {
        let signature = self.sign(&manifest_signed_bytes(&manifest, timestamp));
        SignedManifest { auditor_key_id: self.key_id.clone(), timestamp, manifest, signature }
    }
}

impl std::fmt::Debug for PartySigner {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PartySigner").field("key_id", &self.key_id).finish()
    }
}

/// One request-log entry.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LogRecord {
    Request(RequestEnvelope),
    Audit(SignedManifest),
}

impl LogRecord {
    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::new();
        match self {
            LogRecord::Request(e) => {
                w.u8(REQUEST_TAG)
                    .fixed(&e.id_c.0)
                    .bytes(e.agent_key_id.as_bytes())
                    .u64(e.timestamp)
                    .bytes(&e.sealed.user_ct)
                    .bytes(&e.sealed.auditor_ct)
                    .fixed(&e.signature.0);
            }
            LogRecord::Audit(m) => {
                w.u8(AUDIT_TAG)
                    .bytes(m.auditor_key_id.as_bytes())
                    .u64(m.timestamp)
                    .bytes(m.manifest.as_bytes())
                    .fixed(&m.signature.0);
            }
        }
        w.finish()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = Reader::new(bytes);
        let utf8 = |b: &[u8], what| String::from_utf8(b.to_vec()).map_err(|_| DecodeError::Invalid(what));
        let record = match r.u8()? {
            REQUEST_TAG => {
                let id_c = CommonId(r.array()?);
                let agent_key_id = utf8(r.bytes()?, "agent key id")?;
                let timestamp = r.u64()?;
                let user_ct = r.bytes()?.to_vec();
                let auditor_ct = r.bytes()?.to_vec();
                let signature = Signature(r.array()?);
                LogRecord::Request(RequestEnvelope {
                    id_c,
                    sealed: SealedPayload { user_ct, auditor_ct },
                    agent_key_id,
                    timestamp,
                    signature,
                })
            }
            AUDIT_TAG => {
                let auditor_key_id = utf8(r.bytes()?, "auditor key id")?;
                let timestamp = r.u64()?;
                let manifest = utf8(r.bytes()?, "manifest")?;
                let signature = Signature(r.array()?);
                LogRecord::Audit(SignedManifest { auditor_key_id, timestamp, manifest, signature })
            }
            tag => return Err(DecodeError::UnknownTag(tag)),
        };
        r.finish()?;
        Ok(record)
    }

    /// Map key for this record when stored at log position `index`.
    pub fn map_key_digest(&self, index: u64) -> Digest {
        match self {
            LogRecord::Request(e) => e.map_key_digest(),
            LogRecord::Audit(_) => audit_key_digest(index),
        }
    }
}

/// Value stored in the map: the record, where it sits in the log, and how
/// many earlier log entries carried the same key.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MapValue {
    pub log_index: u64,
    pub superseded: u32,
    pub record: Vec<u8>,
}

impl MapValue {
    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.u64(self.log_index).u32(self.superseded).bytes(&self.record);
        w.finish()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = Reader::new(bytes);
        let log_index = r.u64()?;
        let superseded = r.u32()?;
        let record = r.bytes()?.to_vec();
        r.finish()?;
        Ok(Self { log_index, superseded, record })
    }

    pub fn decode_record(&self) -> Result<LogRecord, DecodeError> {
        LogRecord::decode(&self.record)
    }
}

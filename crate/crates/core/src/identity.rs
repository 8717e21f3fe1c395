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

//! Common identifiers, share identifiers and dual-recipient payload sealing.
//!
//! A common identifier is one AES-256 block: the agent identifier is
//! stretched with PBKDF2-HMAC-SHA256 into the cipher key, and the plaintext
//! block is the first 10 bytes of `SHA-256(id_dp)` followed by the session
//! counter as a 48-bit big-endian integer.

use std::fmt;
use std::str::FromStr;

use aes::cipher::{BlockEncrypt, KeyInit};
use aes::Aes256;
use aes_gcm::aead::{Aead, Payload};
use aes_gcm::{Aes256Gcm, Nonce};
use hkdf::Hkdf;
use num_bigint::BigUint;
use num_rational::Ratio;
use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};
use thiserror::Error;
use x25519_dalek::{PublicKey as X25519Public, StaticSecret};

use crate::merkle::Digest;

pub const DEFAULT_KDF_ITERATIONS: u32 = 100_000;
pub const MAX_SESSION: u64 = (1 << 48) - 1;

const SEAL_INFO: &[u8] = b"vams seal v1";
const EPHEMERAL_LEN: usize = 32;
const NONCE_LEN: usize = 12;
/// Bytes a sealed ciphertext adds to its plaintext: ephemeral key, nonce, tag.
pub const SEAL_OVERHEAD: usize = EPHEMERAL_LEN + NONCE_LEN + 16;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum IdentityError {
    #[error("identifier must not be empty")]
    EmptyIdentifier,
    #[error("session counter {0} does not fit in 48 bits")]
    SessionOverflow(u64),
    #[error("set sizes must be at least 1")]
    EmptySet,
    #[error("authenticated decryption failed")]
    Decryption,
    #[error("malformed identifier: {0}")]
    Malformed(String),
}

/// The agent's private identifier for a user, `id_a`.
#[derive(Clone, PartialEq, Eq)]
pub struct AgentIdentifier {
    bytes: Vec<u8>,
    bit_len: usize,
}

impl AgentIdentifier {
    pub fn new(bytes: impl Into<Vec<u8>>) -> Result<Self, IdentityError> {
        let bytes = bytes.into();
        if bytes.is_empty() {
            return Err(IdentityError::EmptyIdentifier);
        }
        let bit_len = bytes.len() * 8;
        Ok(Self { bytes, bit_len })
    }

    /// Identifier drawn from a space of `bit_len` bits (for brute-force cost accounting).
    pub fn with_bit_len(bytes: impl Into<Vec<u8>>, bit_len: usize) -> Result<Self, IdentityError> {
        let mut id = Self::new(bytes)?;
        id.bit_len = bit_len;
        Ok(id)
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn bit_len(&self) -> usize {
        self.bit_len
    }
}

impl fmt::Debug for AgentIdentifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AgentIdentifier({} bits)", self.bit_len)
    }
}

/// The data provider's private identifier for a user, `id_dp`.
#[derive(Clone, PartialEq, Eq)]
pub struct DataProviderIdentifier(Vec<u8>);

impl DataProviderIdentifier {
    pub fn new(bytes: impl Into<Vec<u8>>) -> Result<Self, IdentityError> {
        let bytes = bytes.into();
        if bytes.is_empty() {
            return Err(IdentityError::EmptyIdentifier);
        }
        Ok(Self(bytes))
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }
}

impl fmt::Debug for DataProviderIdentifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("DataProviderIdentifier(..)")
    }
}

/// Unlinkable per-request key, 32 hex characters on the wire.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CommonId(#[serde(with = "crate::codec::hex_array")] pub [u8; 16]);

impl CommonId {
    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl FromStr for CommonId {
    type Err = IdentityError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut out = [0u8; 16];
        if s.len() != 32 {
            return Err(IdentityError::Malformed(format!("id_c must be 32 hex chars, got {}", s.len())));
        }
        hex::decode_to_slice(s, &mut out).map_err(|e| IdentityError::Malformed(e.to_string()))?;
        Ok(Self(out))
    }
}

impl fmt::Display for CommonId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for CommonId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CommonId({})", self.to_hex())
    }
}

/// `Hash(id_c ‖ i)`, 64 hex characters on the wire.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ShareId(pub Digest);

impl fmt::Display for ShareId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.to_hex())
    }
}

/// Deployment-wide KDF settings.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KdfParams {
    #[serde(with = "crate::codec::hex_array")]
    pub salt: [u8; 16],
    pub iterations: u32,
}

impl KdfParams {
    pub fn new(salt: [u8; 16]) -> Self {
        Self { salt, iterations: DEFAULT_KDF_ITERATIONS }
    }
}

/// A PBKDF2-stretched agent identifier, usable as an AES-256 key.
#[derive(Clone)]
pub struct StrengthenedKey([u8; 32]);

impl StrengthenedKey {
    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }
}

pub fn strengthen_key(id_a: &AgentIdentifier, params: &KdfParams) -> StrengthenedKey {
    let mut out = [0u8; 32];
    pbkdf2::pbkdf2_hmac::<Sha256>(id_a.as_bytes(), &params.salt, params.iterations, &mut out);
    StrengthenedKey(out)
}

/// Derives common identifiers for one agent identifier; the expensive KDF
/// runs once at construction.
#[derive(Clone)]
pub struct CommonIdDeriver {
    cipher: Aes256,
}

impl CommonIdDeriver {
    pub fn new(key: &StrengthenedKey) -> Self {
        Self { cipher: Aes256::new(key.as_bytes().into()) }
    }

    pub fn for_agent(id_a: &AgentIdentifier, params: &KdfParams) -> Self {
        Self::new(&strengthen_key(id_a, params))
    }

    pub fn derive(&self, id_dp: &DataProviderIdentifier, n: u64) -> Result<CommonId, IdentityError> {
        if n > MAX_SESSION {
            return Err(IdentityError::SessionOverflow(n));
        }
        let mut block = [0u8; 16];
        block[..10].copy_from_slice(&Sha256::digest(id_dp.as_bytes())[..10]);
        block[10..].copy_from_slice(&n.to_be_bytes()[2..]);
        let mut b = block.into();
        self.cipher.encrypt_block(&mut b);
        Ok(CommonId(b.into()))
    }
}

pub fn derive_common_id(
    id_a: &AgentIdentifier,
    id_dp: &DataProviderIdentifier,
    n: u64,
    params: &KdfParams,
) -> Result<CommonId, IdentityError> {
    CommonIdDeriver::for_agent(id_a, params).derive(id_dp, n)
}

/// Share index `i` starts at 1.
pub fn derive_share_id(id_c: &CommonId, i: u32) -> ShareId {
    let mut h = Sha256::new();
    h.update(id_c.0);
    h.update(i.to_be_bytes());
    ShareId(Digest(h.finalize().into()))
}

/// X25519 key pair used to receive sealed request bodies.
#[derive(Clone)]
pub struct EncryptionKeyPair {
    secret: StaticSecret,
}

impl EncryptionKeyPair {
    pub fn from_secret(bytes: [u8; 32]) -> Self {
        Self { secret: StaticSecret::from(bytes) }
    }

    pub fn generate<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        Self { secret: StaticSecret::random_from_rng(rng) }
    }

    pub fn public(&self) -> EncryptionPublicKey {
        EncryptionPublicKey(X25519Public::from(&self.secret).to_bytes())
    }

    pub fn secret_bytes(&self) -> [u8; 32] {
        self.secret.to_bytes()
    }
}

impl fmt::Debug for EncryptionKeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EncryptionKeyPair").field("public", &self.public()).finish()
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncryptionPublicKey(#[serde(with = "crate::codec::hex_array")] pub [u8; 32]);

impl fmt::Debug for EncryptionPublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "EncryptionPublicKey({})", hex::encode(self.0))
    }
}

/// The same request body sealed separately to the user and to the auditors.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SealedPayload {
    #[serde(with = "crate::codec::hex_vec")]
    pub user_ct: Vec<u8>,
    #[serde(with = "crate::codec::hex_vec")]
    pub auditor_ct: Vec<u8>,
}

fn seal_key(shared: &[u8; 32], ephemeral: &[u8; 32], recipient: &[u8; 32]) -> Aes256Gcm {
    let mut salt = [0u8; 64];
    salt[..32].copy_from_slice(ephemeral);
    salt[32..].copy_from_slice(recipient);
    let hk = Hkdf::<Sha256>::new(Some(&salt), shared);
    let mut key = [0u8; 32];
    hk.expand(SEAL_INFO, &mut key).expect("32 bytes is a valid HKDF length");
    Aes256Gcm::new(&key.into())
}

/// Ciphertext layout: `ephemeral_public[32] ‖ nonce[12] ‖ AES-GCM(body)`.
pub fn seal_for<R: RngCore + CryptoRng>(
    body: &[u8],
    recipient: &EncryptionPublicKey,
    rng: &mut R,
) -> Vec<u8> {
    let ephemeral = StaticSecret::random_from_rng(&mut *rng);
    let ephemeral_pub = X25519Public::from(&ephemeral).to_bytes();
    let shared = ephemeral.diffie_hellman(&X25519Public::from(recipient.0));
    let cipher = seal_key(shared.as_bytes(), &ephemeral_pub, &recipient.0);
    let mut nonce = [0u8; NONCE_LEN];
    rng.fill_bytes(&mut nonce);
    let ct = cipher
        .encrypt(Nonce::from_slice(&nonce), Payload { msg: body, aad: &ephemeral_pub })
        .expect("AES-GCM encryption of an in-memory buffer");
    let mut out = Vec::with_capacity(EPHEMERAL_LEN + NONCE_LEN + ct.len());
    out.extend_from_slice(&ephemeral_pub);
    out.extend_from_slice(&nonce);
    out.extend_from_slice(&ct);
    out
}

pub fn seal_payload<R: RngCore + CryptoRng>(
    body: &[u8],
    user: &EncryptionPublicKey,
    auditor: &EncryptionPublicKey,
    rng: &mut R,
) -> SealedPayload {
    SealedPayload { user_ct: seal_for(body, user, rng), auditor_ct: seal_for(body, auditor, rng) }
}

pub fn open_payload(ciphertext: &[u8], key: &EncryptionKeyPair) -> Result<Vec<u8>, IdentityError> {
    if ciphertext.len() < EPHEMERAL_LEN + NONCE_LEN {
        return Err(IdentityError::Decryption);
    }
    let (ephemeral_pub, rest) = ciphertext.split_at(EPHEMERAL_LEN);
    let (nonce, ct) = rest.split_at(NONCE_LEN);
    let ephemeral_pub: [u8; 32] = ephemeral_pub.try_into().unwrap();
    let shared = key.secret.diffie_hellman(&X25519Public::from(ephemeral_pub));
    let cipher = seal_key(shared.as_bytes(), &ephemeral_pub, &key.public().0);
    cipher
        .decrypt(Nonce::from_slice(nonce), Payload { msg: ct, aad: &ephemeral_pub })
        .map_err(|_| IdentityError::Decryption)
}

/// Chance of guessing which agent/data-provider pair is behind a request:
/// `1 / (|A|·|DP|)`.
pub fn pair_linkability(num_agents: u64, num_providers: u64) -> Result<Ratio<u128>, IdentityError> {
    if num_agents == 0 || num_providers == 0 {
        return Err(IdentityError::EmptySet);
    }
    Ok(Ratio::new(1, num_agents as u128 * num_providers as u128))
}

/// Encryptions needed to recover an unknown `b`-bit identifier by brute force:
/// `2^b · session_range`.
pub fn brute_force_cost(bits: u32, session_range: u64) -> BigUint {
    (BigUint::from(1u8) << bits) * BigUint::from(session_range)
}

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

//! A single-process deployment: an in-memory log server with registered
//! agent, broker and auditor keys and a manually driven clock. Used by the
//! examples, the tests and the experiment harness.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use ed25519_dalek::VerifyingKey;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::envelope::PartySigner;
use crate::heads::HeadSigner;
use crate::identity::{AgentIdentifier, CommonIdDeriver, EncryptionKeyPair, KdfParams};
use crate::server::{AgentRegistry, LogServer, ManualClock, Role, ServerConfig};

pub const SANDBOX_EPOCH_MS: u64 = 1_767_225_600_000;

pub struct Sandbox {
    pub server: Arc<LogServer>,
    pub clock: Arc<ManualClock>,
    pub agent: PartySigner,
    pub broker: PartySigner,
    pub auditor: PartySigner,
    pub auditor_keys: EncryptionKeyPair,
    pub kdf: KdfParams,
    pub rng: ChaCha20Rng,
    derivers: Mutex<HashMap<Vec<u8>, CommonIdDeriver>>,
}

impl Sandbox {
    /// All keys derive from `seed`, so two sandboxes with the same seed sign
    /// with the same server key.
    pub fn new(batch_size: usize, seed: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut key = || {
            let mut k = [0u8; 32];
            rand::RngCore::fill_bytes(&mut rng, &mut k);
            k
        };
        let head_signer = HeadSigner::from_seed(key());
        let agent = PartySigner::from_seed(key());
        let broker = PartySigner::from_seed(key());
        let auditor = PartySigner::from_seed(key());
        let auditor_keys = EncryptionKeyPair::from_secret(key());
        let mut salt = [0u8; 16];
        salt.copy_from_slice(&key()[..16]);
        let mut registry = AgentRegistry::new();
        registry.register(Role::Agent, agent.public_key().verifying_key().expect("valid key"));
        registry.register(Role::Broker, broker.public_key().verifying_key().expect("valid key"));
        registry.register(Role::Auditor, auditor.public_key().verifying_key().expect("valid key"));
        let clock = Arc::new(ManualClock::new(SANDBOX_EPOCH_MS));
        let cfg = ServerConfig { batch_size, ..Default::default() };
        let server = Arc::new(LogServer::in_memory(&cfg, head_signer, registry, clock.clone()));
        Self { server, clock, agent, broker, auditor, auditor_keys, kdf: KdfParams::new(salt), rng, derivers: Mutex::default() }
    }

    pub fn verifying_key(&self) -> VerifyingKey {
        self.server.verifying_key()
    }

    pub fn now(&self) -> u64 {
        use crate::server::Clock;
        self.clock.now_ms()
    }

    /// Deriver for `id_a`, cached since the key stretching is deliberately slow.
    pub fn deriver(&self, id_a: &[u8]) -> CommonIdDeriver {
        let mut cache = self.derivers.lock().expect("cache lock");
        cache
            .entry(id_a.to_vec())
            .or_insert_with(|| {
                CommonIdDeriver::for_agent(&AgentIdentifier::new(id_a).expect("non-empty identifier"), &self.kdf)
            })
            .clone()
    }

    /// Commits everything pending.
    pub fn flush(&self) {
        self.server.flush().expect("in-memory commit");
    }
}

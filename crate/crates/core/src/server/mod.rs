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

//! The log server: a request log, the map derived from it in batches, and a
//! second log of signed map heads.
//!
//! Appends go through one sequencer lock. A single committer turns pending
//! log entries into map revisions; each revision becomes visible only after
//! its signed head is durably in the head log, so a crash mid-batch leaves
//! nothing partial behind and the revision is rebuilt from the log on the
//! next start.

mod config;

pub use config::{
    parse_seed, AgentRegistry, Clock, ConfigError, ManualClock, RegisteredKey, Role, ServerConfig,
    SystemClock,
};

use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{channel, Receiver, Sender};
use std::sync::{Arc, Condvar, Mutex, RwLock};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use ed25519_dalek::VerifyingKey;
use thiserror::Error;

use crate::api::{ApiError, LogApi, MapLookup, RejectCode, SignedHeads, SubmitReceipt};
use crate::envelope::{LogRecord, RequestEnvelope, SignedManifest};
use crate::heads::{HeadSigner, SignedLogRoot, SignedMapRoot};
use crate::identity::SEAL_OVERHEAD;
use crate::merkle::{
    ConsistencyProof, Digest, InclusionProof, MapProof, MerkleLog, SparseMap,
};
use crate::replay::MapReplayer;
use crate::storage::{EntryStore, FileStore, MemoryStore};

/// Admission window around the server clock.
pub const MAX_CLOCK_SKEW_MS: u64 = 24 * 60 * 60 * 1000;

#[derive(Debug, Error)]
pub enum ServerError {
    #[error("storage: {0}")]
    Io(#[from] std::io::Error),
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("stored state is inconsistent: {0}")]
    Corrupt(String),
}

impl From<ServerError> for ApiError {
    fn from(e: ServerError) -> Self {
        ApiError::Internal(e.to_string())
    }
}

struct LogState {
    tree: MerkleLog,
    store: Box<dyn EntryStore>,
    head: SignedLogRoot,
}

struct MapState {
    map: SparseMap,
    /// Signed head per revision; index 0 is the empty map.
    heads: Vec<SignedMapRoot>,
    head_tree: MerkleLog,
    head_log_head: SignedLogRoot,
}

struct Committer {
    replayer: MapReplayer,
    head_store: Box<dyn EntryStore>,
}

#[derive(Default)]
struct BatchControl {
    first_pending: Option<Instant>,
    stop: bool,
}

pub struct LogServer {
    batch_size: usize,
    batch_timeout: Duration,
    signer: HeadSigner,
    registry: AgentRegistry,
    clock: Arc<dyn Clock>,
    log: RwLock<LogState>,
    map: RwLock<MapState>,
    committer: Mutex<Committer>,
    log_len: AtomicU64,
    covered: AtomicU64,
    control: Mutex<BatchControl>,
    wake: Condvar,
    subscribers: Mutex<Vec<Sender<SignedMapRoot>>>,
}

impl LogServer {
    /// A server with in-memory storage.
    pub fn in_memory(
        cfg: &ServerConfig,
        signer: HeadSigner,
        registry: AgentRegistry,
        clock: Arc<dyn Clock>,
    ) -> Self {
        Self::with_stores(cfg, signer, registry, clock, Box::new(MemoryStore::new()), Box::new(MemoryStore::new()))
            .expect("empty stores are consistent")
    }

    /// A server persisted under `cfg.data_dir`, recovering any existing state.
    pub fn open(
        cfg: &ServerConfig,
        signer: HeadSigner,
        registry: AgentRegistry,
        clock: Arc<dyn Clock>,
    ) -> Result<Self, ServerError> {
        let dir: &Path = &cfg.data_dir;
        let log = FileStore::open(dir, "requests")?;
        let heads = FileStore::open(dir, "map-heads")?;
        Self::with_stores(cfg, signer, registry, clock, Box::new(log), Box::new(heads))
    }

    /// Rebuilds state from existing stores. Every stored map head must carry
    /// this server's signature and match a replay of the log prefix it covers.
    pub fn with_stores(
        cfg: &ServerConfig,
        signer: HeadSigner,
        registry: AgentRegistry,
        clock: Arc<dyn Clock>,
        log_store: Box<dyn EntryStore>,
        head_store: Box<dyn EntryStore>,
    ) -> Result<Self, ServerError> {
        cfg.validate()?;
        let entries = log_store.read_all()?;
        let tree = MerkleLog::from_payloads(entries.iter().map(Vec::as_slice));
        let now = clock.now_ms();
        let log_head = signer.sign_log_root(tree.len(), tree.root(), now);

        let vk = signer.verifying_key();
        let mut replayer = MapReplayer::new();
        let mut heads = vec![signer.sign_map_root(0, replayer.map().latest().root, 0, 0)];
        let mut head_tree = MerkleLog::new();
        for (i, raw) in head_store.read_all()?.into_iter().enumerate() {
            let head = SignedMapRoot::decode(&raw)
                .map_err(|e| ServerError::Corrupt(format!("map head {i}: {e}")))?;
            head.verify(&vk).map_err(|_| ServerError::Corrupt(format!("map head {i}: bad signature")))?;
            let (from, to) = (replayer.covered(), head.log_size_covered);
            if head.revision != i as u64 + 1 || to < from || to > entries.len() as u64 {
                return Err(ServerError::Corrupt(format!("map head {i} out of sequence")));
            }
            let rev = replayer
                .apply_batch(&entries[from as usize..to as usize])
                .map_err(|e| ServerError::Corrupt(e.to_string()))?;
            if rev.root != head.root {
                return Err(ServerError::Corrupt(format!("map head {i} does not match log replay")));
            }
            head_tree.append(&raw);
            heads.push(head);
        }
        let head_log_head = signer.sign_log_root(head_tree.len(), head_tree.root(), now);
        let covered = replayer.covered();
        let pending = tree.len() > covered;
        Ok(Self {
            batch_size: cfg.batch_size,
            batch_timeout: Duration::from_millis(cfg.batch_timeout_ms),
            log_len: AtomicU64::new(tree.len()),
            covered: AtomicU64::new(covered),
            log: RwLock::new(LogState { tree, store: log_store, head: log_head }),
            map: RwLock::new(MapState { map: replayer.map().clone(), heads, head_tree, head_log_head }),
            committer: Mutex::new(Committer { replayer, head_store }),
            control: Mutex::new(BatchControl { first_pending: pending.then(Instant::now), stop: false }),
            wake: Condvar::new(),
            subscribers: Mutex::new(Vec::new()),
            signer,
            registry,
            clock,
        })
    }

    pub fn verifying_key(&self) -> VerifyingKey {
        self.signer.verifying_key()
    }

    pub fn get_signed_heads(&self) -> SignedHeads {
        let log = self.log.read().unwrap().head.clone();
        let map = self.map.read().unwrap();
        SignedHeads { log, map: map.heads.last().unwrap().clone(), head_log: map.head_log_head.clone() }
    }

    /// Log entries not yet folded into a map revision.
    pub fn pending(&self) -> u64 {
        self.log_len.load(Ordering::SeqCst) - self.covered.load(Ordering::SeqCst)
    }

    fn check_admission(&self, key_id: &str, roles: &[Role], timestamp: u64) -> Result<VerifyingKey, ApiError> {
        let entry = self
            .registry
            .lookup(key_id)
            .filter(|k| roles.contains(&k.role))
            .ok_or_else(|| ApiError::rejected(RejectCode::RejectedSignature, format!("key {key_id} not registered for this entry type")))?;
        let now = self.clock.now_ms();
        if timestamp.abs_diff(now) > MAX_CLOCK_SKEW_MS {
            return Err(ApiError::rejected(
                RejectCode::RejectedTimestamp,
                format!("timestamp {timestamp} is more than 24h from server time {now}"),
            ));
        }
        Ok(entry.key)
    }

    fn append(&self, record: &LogRecord) -> Result<SubmitReceipt, ApiError> {
        let bytes = record.encode();
        let receipt = {
            let mut log = self.log.write().unwrap();
            let index = log.store.append(&bytes).map_err(ServerError::from)?;
            log.tree.append(&bytes);
            debug_assert_eq!(index + 1, log.tree.len());
            log.head = self.signer.sign_log_root(log.tree.len(), log.tree.root(), self.clock.now_ms());
            self.log_len.store(log.tree.len(), Ordering::SeqCst);
            SubmitReceipt { index, log_root: log.head.clone() }
        };
        let mut ctl = self.control.lock().unwrap();
        ctl.first_pending.get_or_insert_with(Instant::now);
        self.wake.notify_all();
        Ok(receipt)
    }

    fn admit_request(&self, e: &RequestEnvelope) -> Result<SubmitReceipt, ApiError> {
        if e.sealed.user_ct.len() < SEAL_OVERHEAD || e.sealed.auditor_ct.len() < SEAL_OVERHEAD {
            return Err(ApiError::rejected(RejectCode::RejectedFormat, "ciphertext shorter than a sealed payload"));
        }
        let key = self.check_admission(&e.agent_key_id, &[Role::Agent, Role::Broker], e.timestamp)?;
        e.verify(&key).map_err(|_| ApiError::rejected(RejectCode::RejectedSignature, "envelope signature does not verify"))?;
        self.append(&LogRecord::Request(e.clone()))
    }

    fn admit_audit(&self, m: &SignedManifest) -> Result<SubmitReceipt, ApiError> {
        if serde_json::from_str::<serde_json::Value>(&m.manifest).is_err() {
            return Err(ApiError::rejected(RejectCode::RejectedFormat, "manifest is not JSON"));
        }
        let key = self.check_admission(&m.auditor_key_id, &[Role::Auditor], m.timestamp)?;
        m.verify(&key).map_err(|_| ApiError::rejected(RejectCode::RejectedSignature, "manifest signature does not verify"))?;
        self.append(&LogRecord::Audit(m.clone()))
    }

    /// Folds up to `max` pending entries into one new map revision and
    /// publishes its head. Returns `None` if nothing was pending.
    pub fn commit(&self, max: usize) -> Result<Option<SignedMapRoot>, ServerError> {
        let mut c = self.committer.lock().unwrap();
        let from = c.replayer.covered();
        let entries = {
            let log = self.log.read().unwrap();
            let to = log.tree.len().min(from + max as u64);
            (from..to)
                .map(|i| log.store.get(i).map(|e| e.expect("index below log size")))
                .collect::<Result<Vec<_>, _>>()?
        };
        if entries.is_empty() {
            return Ok(None);
        }
        let rev = c.replayer.apply_batch(&entries).map_err(|e| ServerError::Corrupt(e.to_string()))?;
        let head = self.signer.sign_map_root(rev.revision, rev.root, c.replayer.covered(), self.clock.now_ms());
        let raw = head.encode();
        c.head_store.append(&raw)?;
        {
            let mut m = self.map.write().unwrap();
            m.map = c.replayer.map().clone();
            m.heads.push(head.clone());
            m.head_tree.append(&raw);
            m.head_log_head = self.signer.sign_log_root(m.head_tree.len(), m.head_tree.root(), self.clock.now_ms());
        }
        self.covered.store(c.replayer.covered(), Ordering::SeqCst);
        drop(c);
        tracing::debug!(revision = head.revision, covered = head.log_size_covered, "published map head");
        self.subscribers.lock().unwrap().retain(|tx| tx.send(head.clone()).is_ok());
        Ok(Some(head))
    }

    /// Commits everything pending, in batches of at most `batch_size`.
    pub fn flush(&self) -> Result<Vec<SignedMapRoot>, ServerError> {
        let mut out = Vec::new();
        while let Some(h) = self.commit(self.batch_size)? {
            out.push(h);
        }
        self.control.lock().unwrap().first_pending = None;
        Ok(out)
    }

    /// Stream of map heads published from now on.
    pub fn subscribe(&self) -> Receiver<SignedMapRoot> {
        let (tx, rx) = channel();
        self.subscribers.lock().unwrap().push(tx);
        rx
    }

    /// Starts the background batcher: a revision whenever `batch_size`
    /// entries are pending, or when the oldest pending entry has waited
    /// `batch_timeout`.
    pub fn run_batcher(self: &Arc<Self>) -> Batcher {
        let server = Arc::clone(self);
        server.control.lock().unwrap().stop = false;
        let handle = std::thread::Builder::new()
            .name("vams-batcher".into())
            .spawn(move || server.batch_loop())
            .expect("spawn batcher");
        Batcher { server: Arc::clone(self), handle: Some(handle) }
    }

    fn batch_loop(&self) {
        loop {
            let mut ctl = self.control.lock().unwrap();
            loop {
                if ctl.stop {
                    return;
                }
                let pending = self.pending();
                if pending >= self.batch_size as u64 {
                    break;
                }
                match ctl.first_pending {
                    Some(t) if pending > 0 => {
                        let waited = t.elapsed();
                        if waited >= self.batch_timeout {
                            break;
                        }
                        ctl = self.wake.wait_timeout(ctl, self.batch_timeout - waited).unwrap().0;
                    }
                    _ => ctl = self.wake.wait(ctl).unwrap(),
                }
            }
            drop(ctl);
            if let Err(e) = self.commit(self.batch_size) {
                tracing::error!(error = %e, "map commit failed; batcher stopping");
                return;
            }
            let mut ctl = self.control.lock().unwrap();
            ctl.first_pending = (self.pending() > 0).then(Instant::now);
        }
    }

    fn stop_batcher(&self) {
        self.control.lock().unwrap().stop = true;
        self.wake.notify_all();
    }

    pub fn map_head(&self, revision: u64) -> Option<SignedMapRoot> {
        self.map.read().unwrap().heads.get(revision as usize).cloned()
    }

    fn map_prove(&self, key: &Digest, revision: Option<u64>) -> Result<MapLookup, ApiError> {
        let m = self.map.read().unwrap();
        let revision = revision.unwrap_or(m.heads.len() as u64 - 1);
        let head = m
            .heads
            .get(revision as usize)
            .cloned()
            .ok_or_else(|| ApiError::NotFound(format!("map revision {revision}")))?;
        let proof: MapProof = m.map.prove(key, revision).map_err(|e| ApiError::NotFound(e.to_string()))?;
        Ok(MapLookup { head, proof })
    }
}

/// Handle to the background batcher; stops it on drop.
pub struct Batcher {
    server: Arc<LogServer>,
    handle: Option<JoinHandle<()>>,
}

impl Batcher {
    pub fn stop(mut self) {
        self.shutdown();
    }

    fn shutdown(&mut self) {
        self.server.stop_batcher();
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

impl Drop for Batcher {
    fn drop(&mut self) {
        self.shutdown();
    }
}

fn proof_err(e: crate::merkle::ProofError) -> ApiError {
    ApiError::BadRequest(e.to_string())
}

impl LogApi for LogServer {
    fn submit_request(&self, envelope: &RequestEnvelope) -> Result<SubmitReceipt, ApiError> {
        self.admit_request(envelope)
    }

    fn submit_audit(&self, manifest: &SignedManifest) -> Result<SubmitReceipt, ApiError> {
        self.admit_audit(manifest)
    }

    fn log_root(&self) -> Result<SignedLogRoot, ApiError> {
        Ok(self.log.read().unwrap().head.clone())
    }

    fn log_entry(&self, index: u64) -> Result<Vec<u8>, ApiError> {
        self.log
            .read()
            .unwrap()
            .store
            .get(index)
            .map_err(|e| ApiError::Internal(e.to_string()))?
            .ok_or_else(|| ApiError::NotFound(format!("log entry {index}")))
    }

    fn log_inclusion(&self, index: u64, size: u64) -> Result<InclusionProof, ApiError> {
        self.log.read().unwrap().tree.prove_inclusion(index, size).map_err(proof_err)
    }

    fn log_consistency(&self, old_size: u64, new_size: u64) -> Result<ConsistencyProof, ApiError> {
        self.log.read().unwrap().tree.prove_consistency(old_size, new_size).map_err(proof_err)
    }

    fn map_root(&self) -> Result<SignedMapRoot, ApiError> {
        Ok(self.map.read().unwrap().heads.last().unwrap().clone())
    }

    fn map_proof(&self, key: &Digest, revision: Option<u64>) -> Result<MapLookup, ApiError> {
        self.map_prove(key, revision)
    }

    fn headlog_root(&self) -> Result<SignedLogRoot, ApiError> {
        Ok(self.map.read().unwrap().head_log_head.clone())
    }

    fn headlog_entry(&self, index: u64) -> Result<Vec<u8>, ApiError> {
        self.map
            .read()
            .unwrap()
            .heads
            .get(index as usize + 1)
            .map(SignedMapRoot::encode)
            .ok_or_else(|| ApiError::NotFound(format!("head log entry {index}")))
    }

    fn headlog_inclusion(&self, index: u64, size: u64) -> Result<InclusionProof, ApiError> {
        self.map.read().unwrap().head_tree.prove_inclusion(index, size).map_err(proof_err)
    }

    fn headlog_consistency(&self, old_size: u64, new_size: u64) -> Result<ConsistencyProof, ApiError> {
        self.map.read().unwrap().head_tree.prove_consistency(old_size, new_size).map_err(proof_err)
    }

    fn signed_heads(&self) -> Result<SignedHeads, ApiError> {
        Ok(self.get_signed_heads())
    }
}

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

//! Sustained submission throughput and map-visibility latency of a local,
//! file-backed log server, one fresh server per batch size.

use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::api::LogApi;
use crate::envelope::PartySigner;
use crate::heads::HeadSigner;
use crate::identity::{seal_payload, CommonId, EncryptionKeyPair};
use crate::server::{AgentRegistry, Clock, LogServer, Role, ServerConfig, SystemClock};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchOptions {
    pub batch_sizes: Vec<usize>,
    /// Submission window per batch size; zero yields an empty report.
    pub duration: Duration,
    pub clients: usize,
    pub batch_timeout_ms: u64,
    /// Keep the stores on disk (with a sync per append) rather than in memory.
    pub file_backed: bool,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            batch_sizes: vec![1, 10, 50, 100, 200, 300, 500, 1000],
            duration: Duration::from_secs(3),
            clients: 4,
            batch_timeout_ms: 1000,
            file_backed: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub batch_size: usize,
    pub duration_s: f64,
    pub submitted: u64,
    /// Entries covered by the last map head published inside the window.
    pub committed: u64,
    /// Committed entries per second up to that head.
    pub throughput_tps: f64,
    /// Mean time from acceptance to the first map head covering the entry.
    pub mean_latency_ms: f64,
    pub max_latency_ms: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    pub fn write_csv(&self, path: &Path) -> Result<(), ExperimentError> {
        let mut w = csv::Writer::from_path(path)?;
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Throughput rises (allowing `slack` relative noise per step) up to its
    /// peak and then stays within `slack` of it.
    pub fn rises_then_plateaus(&self, slack: f64) -> bool {
        let tps: Vec<f64> = self.rows.iter().map(|r| r.throughput_tps).collect();
        let Some(peak) = tps.iter().cloned().reduce(f64::max) else { return false };
        let at = tps.iter().position(|&x| x == peak).expect("peak present");
        let rising = tps[..=at].windows(2).all(|w| w[1] >= w[0] * (1.0 - slack));
        let flat = tps[at..].iter().all(|&x| x >= peak * (1.0 - slack));
        rising && flat && tps[0] < peak
    }
}

pub fn bench_throughput(opts: &BenchOptions) -> Result<BenchReport, ExperimentError> {
    let mut report = BenchReport::default();
    if opts.duration.is_zero() {
        return Ok(report);
    }
    for &b in &opts.batch_sizes {
        report.rows.push(bench_one(b, opts)?);
    }
    Ok(report)
}

fn bench_one(batch_size: usize, opts: &BenchOptions) -> Result<BenchRow, ExperimentError> {
    if batch_size == 0 {
        return Err(ExperimentError::Bench("batch size must be positive".into()));
    }
    let agents: Vec<PartySigner> = (0..opts.clients.max(1)).map(|c| PartySigner::from_seed([c as u8 + 1; 32])).collect();
    let mut registry = AgentRegistry::new();
    for a in &agents {
        registry.register(Role::Agent, a.public_key().verifying_key().expect("valid key"));
    }
    let dir = tempfile::tempdir()?;
    let cfg = ServerConfig {
        batch_size,
        batch_timeout_ms: opts.batch_timeout_ms,
        data_dir: dir.path().to_owned(),
        ..Default::default()
    };
    let signer = HeadSigner::from_seed([99; 32]);
    let clock: Arc<dyn Clock> = Arc::new(SystemClock);
    let server = Arc::new(if opts.file_backed {
        LogServer::open(&cfg, signer, registry, clock.clone()).map_err(|e| ExperimentError::Bench(e.to_string()))?
    } else {
        LogServer::in_memory(&cfg, signer, registry, clock.clone())
    });

    let mut rng = ChaCha20Rng::seed_from_u64(batch_size as u64);
    let user = EncryptionKeyPair::generate(&mut rng);
    let auditor = EncryptionKeyPair::generate(&mut rng);
    let sealed = seal_payload(b"{\"category\":\"bench\"}", &user.public(), &auditor.public(), &mut rng);

    let heads = server.subscribe();
    let batcher = server.run_batcher();
    let stop = AtomicBool::new(false);
    let start = Instant::now();
    let (accepted, visible) = std::thread::scope(|s| {
        let workers: Vec<_> = agents
            .iter()
            .enumerate()
            .map(|(c, agent)| {
                let (server, sealed, stop, clock) = (&server, &sealed, &stop, &clock);
                s.spawn(move || {
                    let mut out = Vec::new();
                    let mut seq = 0u64;
                    while !stop.load(Ordering::Relaxed) {
                        let mut id = [0u8; 16];
                        id[..8].copy_from_slice(&(c as u64).to_be_bytes());
                        id[8..].copy_from_slice(&seq.to_be_bytes());
                        seq += 1;
                        let e = agent.sign_request(CommonId(id), sealed.clone(), clock.now_ms());
                        if let Ok(receipt) = server.submit_request(&e) {
                            out.push((receipt.index, Instant::now()));
                        }
                    }
                    out
                })
            })
            .collect();
        let stop = &stop;
        let collector = s.spawn(move || {
            let mut seen = Vec::new();
            while !stop.load(Ordering::Relaxed) {
                if let Ok(h) = heads.recv_timeout(Duration::from_millis(5)) {
                    seen.push((h.log_size_covered, Instant::now()));
                }
            }
            seen
        });
        std::thread::sleep(opts.duration);
        stop.store(true, Ordering::Relaxed);
        let accepted: Vec<Vec<(u64, Instant)>> = workers.into_iter().map(|w| w.join().expect("client thread")).collect();
        (accepted, collector.join().expect("collector thread"))
    });
    let elapsed = start.elapsed();
    batcher.stop();
    // Rate up to the last head seen, so a batch left unfilled when the
    // window closes does not count against large batch sizes.
    let (committed, busy) = visible
        .last()
        .map_or((0, elapsed), |(covered, at)| (*covered, at.duration_since(start)));

    let mut latencies = Vec::new();
    for (index, at) in accepted.iter().flatten() {
        let first = visible.partition_point(|(covered, _)| *covered <= *index);
        if let Some((_, seen)) = visible.get(first) {
            latencies.push(seen.saturating_duration_since(*at).as_secs_f64() * 1e3);
        }
    }
    let submitted = accepted.iter().map(Vec::len).sum::<usize>() as u64;
    let (mean, max) = if latencies.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        (latencies.iter().sum::<f64>() / latencies.len() as f64, latencies.iter().cloned().fold(0.0, f64::max))
    };
    Ok(BenchRow {
        batch_size,
        duration_s: elapsed.as_secs_f64(),
        submitted,
        committed,
        throughput_tps: if committed == 0 { 0.0 } else { committed as f64 / busy.as_secs_f64() },
        mean_latency_ms: mean,
        max_latency_ms: max,
    })
}

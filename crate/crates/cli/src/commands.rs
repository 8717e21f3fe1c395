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

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use anyhow::{anyhow, bail, Context, Result};
use ed25519_dalek::VerifyingKey;
use rand::rngs::OsRng;
use rand::RngCore;
use serde::Serialize;
use vams::api::LogApi;
use vams::bounds::{max_safe_elements, reconstruction_success_direct_f64, table2, write_table2_csv};
use vams::envelope::PartySigner;
use vams::experiments::{bench_throughput, run_fig6, run_fig7, run_fig8, BenchOptions, ExperimentConfig};
use vams::heads::{HeadSigner, PublicKey};
use vams::identity::{AgentIdentifier, CommonId, CommonIdDeriver, DataProviderIdentifier, EncryptionKeyPair, KdfParams};
use vams::multiballot::{PrivDataset, RecordSet};
use vams::roles::{
    audit, broker_respond, check, detect, fetch_manifest, monitor, provide, publish, request, AuditCursor, BrokerPolicy,
    BrokerStore, CheckOptions, HeadSource, IncomingRequest, KeyFile, PublishOptions, RequestBody, SessionCounters,
    Subscription,
};
use vams::server::{Clock, LogServer, Role, ServerConfig, SystemClock};
use vams_server::{HttpLogClient, ServerHandle};

use crate::{
    AgentCmd, AuditorCmd, BoundsArgs, BrokerCmd, Command, DetectArgs, ExpCmd, ExpCommon, HeadsArgs, KeygenArgs,
    MonitorArgs, Outcome, Pair, ProviderCmd, PublishArgs, ServerCmd, UserCmd,
};

pub fn dispatch(server: &str, command: Command) -> Result<Outcome> {
    match command {
        Command::Keygen(a) => keygen(a),
        Command::Server(c) => server_cmd(c),
        Command::Agent(AgentCmd::Request { pair, n, counters, category, purpose, user_public }) => {
            agent_request(server, pair, n, &counters, category, purpose, &user_public)
        }
        Command::Provider(ProviderCmd::Fetch { keys, id_c }) => provider_fetch(server, &keys, &id_c),
        Command::User(UserCmd::Check { pair, lookahead, parallelism }) => {
            user_check(server, pair, CheckOptions { lookahead, parallelism })
        }
        Command::User(UserCmd::Monitor(a)) => user_monitor(server, a),
        Command::Auditor(AuditorCmd::Audit { keys, from_size, cursor }) => {
            auditor_audit(server, &keys, from_size, cursor.as_deref())
        }
        Command::Auditor(AuditorCmd::Publish(a)) => auditor_publish(server, a),
        Command::Broker(c) => broker_cmd(server, c),
        Command::Heads(a) => heads(server, a),
        Command::Detect(a) => detect_cmd(server, a),
        Command::Bounds(a) => bounds(a),
        Command::Exp(c) => exp(c),
    }
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

fn client(server: &str) -> Result<HttpLogClient> {
    Ok(HttpLogClient::new(server)?)
}

/// Pretty JSON on stdout. A reader that stops early (`| head`) is not an error.
fn emit<T: Serialize>(value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn load_keys(path: &Path) -> Result<KeyFile> {
    KeyFile::load(path).with_context(|| format!("key file {}", path.display()))
}

fn parse_hex32(name: &str, s: &str) -> Result<[u8; 32]> {
    hex::decode(s.trim())
        .ok()
        .and_then(|v| v.try_into().ok())
        .ok_or_else(|| anyhow!("{name} must be 64 hex digits"))
}

fn deriver(keys: &KeyFile, id_a: &str) -> Result<CommonIdDeriver> {
    let salt = keys.fixed::<16>("kdf-salt")?;
    let id_a = AgentIdentifier::new(id_a.as_bytes())?;
    Ok(CommonIdDeriver::for_agent(&id_a, &KdfParams::new(salt)))
}

fn keygen(a: KeygenArgs) -> Result<Outcome> {
    if a.out.exists() && !a.force {
        bail!("{} exists; pass --force to overwrite", a.out.display());
    }
    let mut rng = OsRng;
    let signer = PartySigner::generate(&mut rng);
    let enc = EncryptionKeyPair::generate(&mut rng);
    let mut store_key = [0u8; 32];
    rng.fill_bytes(&mut store_key);

    let mut keys = KeyFile::default();
    keys.set("signing", &signer.seed());
    keys.set("encryption", &enc.secret_bytes());
    keys.set("store-key", &store_key);
    for entry in &a.set {
        let (name, value) = entry.split_once('=').ok_or_else(|| anyhow!("--set takes NAME=HEX, got {entry:?}"))?;
        keys.set(name, &hex::decode(value).with_context(|| format!("--set {name}"))?);
    }
    std::fs::write(&a.out, keys.to_text()).with_context(|| format!("writing {}", a.out.display()))?;
    println!("signing-public {}", hex::encode(signer.public_key().0));
    println!("encryption-public {}", hex::encode(enc.public().0));
    println!("key-id {}", signer.public_key().fingerprint());
    Ok(Outcome::Accept)
}

fn server_cmd(c: ServerCmd) -> Result<Outcome> {
    match c {
        ServerCmd::Init { dir } => {
            std::fs::create_dir_all(&dir)?;
            let config = dir.join("server.toml");
            if config.exists() {
                bail!("{} exists", config.display());
            }
            let mut rng = OsRng;
            let mut seed = [0u8; 32];
            rng.fill_bytes(&mut seed);
            let mut salt = [0u8; 16];
            rng.fill_bytes(&mut salt);
            let cfg = ServerConfig { kdf_salt: hex::encode(salt), ..Default::default() };
            std::fs::write(dir.join(&cfg.signing_key), hex::encode(seed))?;
            std::fs::write(dir.join(&cfg.registry), "# <role> <ed25519 public key hex>\n")?;
            std::fs::write(&config, toml::to_string(&cfg)?)?;
            println!("server-public {}", hex::encode(HeadSigner::from_seed(seed).public_key().0));
            println!("kdf-salt {}", cfg.kdf_salt);
            Ok(Outcome::Accept)
        }
        ServerCmd::Register { config, role, key } => {
            let cfg = ServerConfig::load(&config)?;
            let role: Role = role.parse()?;
            let vk = PublicKey(parse_hex32("--key", &key)?).verifying_key().map_err(|_| anyhow!("--key is not an Ed25519 key"))?;
            // Parse first so a malformed registry is not appended to.
            cfg.load_registry()?;
            let mut f = std::fs::OpenOptions::new().append(true).open(&cfg.registry)?;
            let name = serde_json::to_value(role)?.as_str().unwrap_or_default().to_string();
            writeln!(f, "{name} {}", hex::encode(vk.as_bytes()))?;
            println!("key-id {}", PublicKey::from(vk).fingerprint());
            Ok(Outcome::Accept)
        }
        ServerCmd::Run { config } => {
            let cfg = ServerConfig::load(&config)?;
            let signer = HeadSigner::new(cfg.load_signing_key()?);
            let registry = cfg.load_registry()?;
            std::fs::create_dir_all(&cfg.data_dir)?;
            let clock: Arc<dyn Clock> = Arc::new(SystemClock);
            let server = Arc::new(LogServer::open(&cfg, signer, registry, clock)?);
            let _batcher = server.run_batcher();
            let handle = ServerHandle::spawn(&cfg.listen, server.clone())?;
            println!("listening on {}", handle.url());
            std::io::stdout().flush()?;
            handle.join()?;
            Ok(Outcome::Accept)
        }
    }
}

fn agent_request(
    server: &str,
    pair: Pair,
    n: Option<u64>,
    counters: &Path,
    category: String,
    purpose: String,
    user_public: &str,
) -> Result<Outcome> {
    let keys = load_keys(&pair.keys)?;
    let deriver = deriver(&keys, &pair.id_a)?;
    let id_dp = DataProviderIdentifier::new(pair.id_dp.as_bytes())?;
    let mut counters = SessionCounters::load(counters)?;
    let n = n.unwrap_or_else(|| counters.peek(&id_dp));
    let user = vams::identity::EncryptionPublicKey(parse_hex32("--user-public", user_public)?);
    let auditor = keys.encryption_public("auditor-public")?;
    let api = client(server)?;
    let body = RequestBody::new(category, purpose);
    let (envelope, receipt) =
        request(&api, &keys.signer()?, &deriver, &id_dp, n, &body, &user, &auditor, now_ms(), &mut OsRng)?;
    counters.advance(&id_dp, n)?;

    #[derive(Serialize)]
    struct Out {
        id_c: CommonId,
        n: u64,
        index: u64,
        agent_key_id: String,
    }
    emit(&Out { id_c: envelope.id_c, n, index: receipt.index, agent_key_id: envelope.agent_key_id })?;
    Ok(Outcome::Accept)
}

fn provider_fetch(server: &str, keys: &Path, id_c: &str) -> Result<Outcome> {
    let keys = load_keys(keys)?;
    let id_c: CommonId = id_c.parse()?;
    let provided = provide(&client(server)?, &keys.server_key()?, &id_c)?;

    #[derive(Serialize)]
    struct Out {
        log_index: u64,
        map_revision: u64,
        superseded: u32,
        envelope: vams::envelope::RequestEnvelope,
    }
    emit(&Out {
        log_index: provided.value.log_index,
        map_revision: provided.lookup.head.revision,
        superseded: provided.value.superseded,
        envelope: provided.envelope,
    })?;
    Ok(Outcome::Accept)
}

fn user_check(server: &str, pair: Pair, opts: CheckOptions) -> Result<Outcome> {
    let keys = load_keys(&pair.keys)?;
    let deriver = deriver(&keys, &pair.id_a)?;
    let id_dp = DataProviderIdentifier::new(pair.id_dp.as_bytes())?;
    let result = check(&client(server)?, &keys.server_key()?, &deriver, &id_dp, &keys.encryption()?, opts)?;
    emit(&result)?;
    Ok(Outcome::Accept)
}

fn user_monitor(server: &str, a: MonitorArgs) -> Result<Outcome> {
    let manifest = match (&a.manifest, a.log_index) {
        (Some(path), _) => serde_json::from_slice(&std::fs::read(path).with_context(|| format!("reading {}", path.display()))?)
            .with_context(|| format!("parsing {}", path.display()))?,
        (None, Some(index)) => {
            let keys = load_keys(a.keys.as_deref().ok_or_else(|| anyhow!("--log-index needs --keys"))?)?;
            let auditor = auditor_signing_key(&keys)?;
            fetch_manifest(&client(server)?, &keys.server_key()?, auditor.as_ref(), index)?
        }
        (None, None) => bail!("one of --manifest or --log-index is required"),
    };
    let dpriv = PrivDataset::read_csv(&a.dpriv, manifest.scheme.k)?;
    let own = match (&a.record, &a.id_c) {
        (Some(path), Some(id)) => {
            let id: CommonId = id.parse()?;
            let records = RecordSet::read_csv(path)?;
            let r = records.records.iter().find(|r| r.id_c == id).ok_or_else(|| anyhow!("{id} is not in {}", path.display()))?;
            Some((id, r.bits))
        }
        _ => None,
    };
    let report = monitor(&manifest, &dpriv, own, a.distribution_tolerance);
    emit(&report)?;
    Ok(if report.accepted { Outcome::Accept } else { Outcome::Reject })
}

/// The auditor's Ed25519 key, if the key file names one.
fn auditor_signing_key(keys: &KeyFile) -> Result<Option<VerifyingKey>> {
    match keys.get("auditor-signing-public") {
        None => Ok(None),
        Some(_) => {
            let pk = PublicKey(keys.fixed("auditor-signing-public")?);
            Ok(Some(pk.verifying_key().map_err(|_| anyhow!("auditor-signing-public is not an Ed25519 key"))?))
        }
    }
}

fn auditor_audit(server: &str, keys: &Path, from_size: Option<u64>, cursor_path: Option<&Path>) -> Result<Outcome> {
    let keys = load_keys(keys)?;
    let api = client(server)?;
    let cursor = match (from_size, cursor_path) {
        (Some(0), _) => AuditCursor::default(),
        (Some(size), _) => {
            // Trust-on-first-use at an explicit size: its root comes from the served entries.
            let entries: Vec<Vec<u8>> = (0..size).map(|i| api.log_entry(i)).collect::<Result<_, _>>()?;
            let log = vams::merkle::MerkleLog::from_payloads(entries.iter().map(Vec::as_slice));
            AuditCursor { log_size: size, log_root: log.root() }
        }
        (None, Some(p)) if p.exists() => serde_json::from_slice(&std::fs::read(p)?).context("cursor file")?,
        (None, _) => AuditCursor::default(),
    };
    let (report, next) = audit(&api, &keys.server_key()?, &keys.encryption()?, &cursor)?;
    if let Some(p) = cursor_path {
        std::fs::write(p, serde_json::to_vec_pretty(&next)?)?;
    }
    emit(&report)?;
    Ok(Outcome::Accept)
}

fn auditor_publish(server: &str, a: PublishArgs) -> Result<Outcome> {
    let keys = load_keys(&a.keys)?;
    let d = RecordSet::read_csv(&a.dataset).with_context(|| format!("reading {}", a.dataset.display()))?;
    let seed = match &a.seed {
        Some(s) => parse_hex32("--seed", s)?,
        None => {
            let mut s = [0u8; 32];
            OsRng.fill_bytes(&mut s);
            s
        }
    };
    std::fs::create_dir_all(&a.out_dir)?;
    let dpriv_path = a.out_dir.join("dpriv.csv");
    let opts = PublishOptions {
        k: a.k,
        queries: Vec::new(),
        threshold: a.threshold,
        known: a.known,
        tolerance: a.tolerance,
        seed,
        dpriv_location: Some(a.dpriv_location.unwrap_or_else(|| dpriv_path.display().to_string())),
        timestamp: now_ms(),
    };
    let published = publish(&client(server)?, &keys.signer()?, &d, &opts)?;
    let manifest_path = a.out_dir.join("manifest.json");
    std::fs::write(&manifest_path, serde_json::to_vec_pretty(&published.manifest)?)?;
    published.dpriv.write_csv(&dpriv_path)?;

    #[derive(Serialize)]
    struct Out {
        index: Option<u64>,
        manifest: PathBuf,
        dpriv: PathBuf,
        itemsets: usize,
        tolerance: f64,
    }
    emit(&Out {
        index: published.receipt.map(|r| r.index),
        manifest: manifest_path,
        dpriv: dpriv_path,
        itemsets: published.manifest.itemsets.len(),
        tolerance: published.manifest.tolerance,
    })?;
    Ok(Outcome::Accept)
}

fn broker_cmd(server: &str, c: BrokerCmd) -> Result<Outcome> {
    match c {
        BrokerCmd::Subscribe { keys, store, user, id_dp, user_public } => {
            let keys = load_keys(&keys)?;
            let key = keys.fixed::<32>("store-key")?;
            let mut s = if store.exists() { BrokerStore::load(&store, &key)? } else { BrokerStore::default() };
            if s.subscriptions.iter().any(|x| x.user == user) {
                bail!("user {user:?} is already subscribed");
            }
            DataProviderIdentifier::new(id_dp.as_bytes())?;
            s.subscriptions.push(Subscription {
                user,
                id_dp,
                user_public: vams::identity::EncryptionPublicKey(parse_hex32("--user-public", &user_public)?),
                next_n: 0,
            });
            s.save(&store, &key, &mut OsRng)?;
            Ok(Outcome::Accept)
        }
        BrokerCmd::Run { policy, keys, store, id_a, requests } => {
            let keys = load_keys(&keys)?;
            let policy: BrokerPolicy = serde_json::from_slice(&std::fs::read(&policy)?).context("policy file")?;
            let key = keys.fixed::<32>("store-key")?;
            let mut s = BrokerStore::load(&store, &key)?;
            let signer = keys.signer()?;
            let auditor = keys.encryption_public("auditor-public")?;
            let deriver = deriver(&keys, &id_a)?;
            let api = client(server)?;
            let input: Box<dyn BufRead> = match &requests {
                Some(p) => Box::new(std::io::BufReader::new(std::fs::File::open(p)?)),
                None => Box::new(std::io::stdin().lock()),
            };

            #[derive(Serialize)]
            struct Out<'a> {
                user: &'a str,
                category: &'a str,
                allowed: bool,
                reason: String,
                index: u64,
            }
            for line in input.lines() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let incoming: IncomingRequest = serde_json::from_str(&line).with_context(|| format!("request {line:?}"))?;
                let result =
                    broker_respond(&api, &signer, &deriver, &mut s, &policy, &incoming, &auditor, now_ms(), &mut OsRng);
                // Persist counters after every logged decision.
                s.save(&store, &key, &mut OsRng)?;
                let (decision, receipt) = result?;
                let out = Out {
                    user: &incoming.user,
                    category: &incoming.category,
                    allowed: decision.allowed,
                    reason: decision.reason,
                    index: receipt.index,
                };
                println!("{}", serde_json::to_string(&out)?);
            }
            Ok(Outcome::Accept)
        }
    }
}

fn heads(server: &str, a: HeadsArgs) -> Result<Outcome> {
    let heads = client(server)?.signed_heads()?;
    match a.out {
        Some(p) => std::fs::write(&p, serde_json::to_vec_pretty(&heads)?)?,
        None => emit(&heads)?,
    }
    Ok(Outcome::Accept)
}

fn detect_cmd(server: &str, a: DetectArgs) -> Result<Outcome> {
    let keys = load_keys(&a.keys)?;
    let sources: Vec<HeadSource> = a
        .heads
        .iter()
        .map(|src| {
            if src.starts_with("http://") || src.starts_with("https://") {
                let heads = HttpLogClient::new(src).and_then(|c| c.signed_heads()).map(|h| vec![h]).map_err(|e| e.to_string());
                HeadSource { name: src.clone(), heads }
            } else {
                match std::fs::read_to_string(src) {
                    Ok(text) => HeadSource::parse(src.clone(), &text),
                    Err(e) => HeadSource { name: src.clone(), heads: Err(e.to_string()) },
                }
            }
        })
        .collect();
    let api = if a.consistency { Some(client(server)?) } else { None };
    let report = detect(&sources, &keys.server_key()?, api.as_ref().map(|c| c as &dyn LogApi));
    emit(&report)?;
    Ok(if report.is_clean() { Outcome::Accept } else { Outcome::Reject })
}

fn bounds(a: BoundsArgs) -> Result<Outcome> {
    if let Some(k) = a.k {
        let users = a.users.ok_or_else(|| anyhow!("--k needs --users"))?;
        let known: Vec<usize> = match a.known {
            Some(x) => vec![x],
            None => (1..=2 * k).collect(),
        };
        let mut out = std::io::stdout().lock();
        if a.csv {
            writeln!(out, "k,known,users,e_max,success")?;
        }
        for known in known {
            let b = max_safe_elements(k, users, known, a.threshold)?;
            let s = b.success.map_or("-".to_string(), |s| format!("{s:.3e}"));
            if a.csv {
                writeln!(out, "{k},{known},{users},{},{s}", b.e_max)?;
            } else {
                writeln!(out, "k={k} known={known} users={users}: at most {} elements (success {s})", b.e_max)?;
            }
        }
        return Ok(Outcome::Accept);
    }
    if !a.table2 {
        bail!("pass --table2, or --k with --users");
    }
    let cells = table2()?;
    if a.csv {
        write_table2_csv(&cells, std::io::stdout().lock())?;
        return Ok(Outcome::Accept);
    }
    let mut out = std::io::stdout().lock();
    writeln!(out, "{:<14}{:>10}{:>8}{:>12}", "scheme", "users", "e_max", "success")?;
    for c in &cells {
        let scheme = format!("{}Ballot ({})", 2 * c.k + 1, c.known);
        write!(out, "{scheme:<14}{:>10}{:>8}{:>12.1e}", c.users, c.e_max, c.success)?;
        let direct = reconstruction_success_direct_f64(c.k, c.users, c.known, c.e_max.max(1))?;
        if format!("{direct:.0e}") != format!("{:.0e}", c.success) {
            write!(out, "   (naive f64: {direct:.1e})")?;
        }
        writeln!(out)?;
    }
    Ok(Outcome::Accept)
}

pub fn exp(c: ExpCmd) -> Result<Outcome> {
    let run = |which: &str, common: ExpCommon| -> Result<Outcome> {
        let cfg = ExperimentConfig { profile: common.profile, trials: common.trials, seed: common.seed };
        let result = match which {
            "fig6" => run_fig6(&cfg)?,
            "fig7" => run_fig7(&cfg)?,
            _ => run_fig8(&cfg)?,
        };
        std::fs::create_dir_all(&common.out)?;
        result.write_csv(&common.out, which)?;
        let mut out = std::io::stdout().lock();
        for s in &result.summary {
            writeln!(
                out,
                "k={} r={} size={} support={:.3}: mean {:.3}% var {:.3e} over {} trials",
                s.k, s.r, s.size, s.target_support, s.mean_percent_error, s.variance, s.trials
            )?;
        }
        writeln!(out, "wrote {}", common.out.join(format!("{which}_summary.csv")).display())?;
        Ok(Outcome::Accept)
    };
    match c {
        ExpCmd::Fig6(common) => run("fig6", common),
        ExpCmd::Fig7(common) => run("fig7", common),
        ExpCmd::Fig8(common) => run("fig8", common),
        ExpCmd::Bench { out, batch_sizes, duration_ms, clients, in_memory } => {
            let opts = BenchOptions {
                batch_sizes,
                duration: Duration::from_millis(duration_ms),
                clients,
                file_backed: !in_memory,
                ..Default::default()
            };
            let report = bench_throughput(&opts)?;
            std::fs::create_dir_all(&out)?;
            let path = out.join("bench.csv");
            report.write_csv(&path)?;
            let mut w = std::io::stdout().lock();
            for r in &report.rows {
                writeln!(
                    w,
                    "batch {:>5}: {:>9.1} tps, mean latency {:>8.1} ms, {} committed",
                    r.batch_size, r.throughput_tps, r.mean_latency_ms, r.committed
                )?;
            }
            writeln!(w, "wrote {}", path.display())?;
            Ok(Outcome::Accept)
        }
    }
}

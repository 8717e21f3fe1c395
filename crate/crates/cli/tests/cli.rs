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

//! Drives the `vams` binary against real server processes.

use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};
use std::time::Duration;

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_vams");

fn vams(server: Option<&str>, args: &[&str]) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.args(args).env_remove("VAMS_SERVER");
    if let Some(url) = server {
        cmd.env("VAMS_SERVER", url);
    }
    cmd.output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn ok(o: Output) -> String {
    assert_eq!(o.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    stdout(&o)
}

fn json(o: Output) -> Value {
    serde_json::from_str(&ok(o)).expect("json output")
}

/// `name <hex>` lines printed by `keygen` and `server init`.
fn field(text: &str, name: &str) -> String {
    text.lines()
        .find_map(|l| l.strip_prefix(name).and_then(|r| r.strip_prefix(' ')))
        .unwrap_or_else(|| panic!("{name} missing from {text}"))
        .to_string()
}

struct Party {
    keys: PathBuf,
    signing_public: String,
    encryption_public: String,
}

/// A server process plus key files for each role, all in one temp dir.
struct Deployment {
    dir: tempfile::TempDir,
    config: PathBuf,
    url: String,
    child: Option<Child>,
    agent: Party,
    user: Party,
    auditor: Party,
    broker: Party,
}

impl Deployment {
    fn start() -> Self {
        Self::start_with(None)
    }

    /// `signing_key` reuses another deployment's head-signing key.
    fn start_with(signing_key: Option<&Path>) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let srv = dir.path().join("srv");
        let init = ok(vams(None, &["server", "init", "--dir", srv.to_str().unwrap()]));
        let config = srv.join("server.toml");
        let text = std::fs::read_to_string(&config)
            .unwrap()
            .replace("127.0.0.1:8420", "127.0.0.1:0")
            .replace("batch_size = 300", "batch_size = 1")
            .replace("batch_timeout_ms = 1000", "batch_timeout_ms = 50");
        std::fs::write(&config, text).unwrap();
        let mut server_public = field(&init, "server-public");
        if let Some(key) = signing_key {
            std::fs::copy(key, srv.join("server.key")).unwrap();
            server_public = std::fs::read_to_string(key.with_file_name("public")).unwrap();
        }
        std::fs::write(srv.join("public"), &server_public).unwrap();
        let salt = field(&init, "kdf-salt");

        let party = |name: &str, extra: &[String]| -> Party {
            let keys = dir.path().join(format!("{name}.keys"));
            let mut args = vec!["keygen".to_string(), "--out".into(), keys.display().to_string()];
            args.extend(["--set".into(), format!("kdf-salt={salt}"), "--set".into(), format!("server-public={server_public}")]);
            for e in extra {
                args.extend(["--set".into(), e.clone()]);
            }
            let out = ok(vams(None, &args.iter().map(String::as_str).collect::<Vec<_>>()));
            Party { keys, signing_public: field(&out, "signing-public"), encryption_public: field(&out, "encryption-public") }
        };
        let auditor = party("auditor", &[]);
        let with_auditor = [format!("auditor-public={}", auditor.encryption_public)];
        let agent = party("agent", &with_auditor);
        let broker = party("broker", &with_auditor);
        let user = party("user", &[]);
        for (role, p) in [("agent", &agent), ("auditor", &auditor), ("broker", &broker)] {
            ok(vams(None, &["server", "register", "--config", config.to_str().unwrap(), "--role", role, "--key", &p.signing_public]));
        }
        let mut d = Self { dir, config, url: String::new(), child: None, agent, user, auditor, broker };
        d.run();
        d
    }

    fn run(&mut self) {
        let mut child = Command::new(BIN)
            .args(["server", "run", "--config", self.config.to_str().unwrap()])
            .stdout(Stdio::piped())
            .spawn()
            .unwrap();
        let mut line = String::new();
        BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
        self.url = line.trim().strip_prefix("listening on ").expect("listening line").to_string();
        self.child = Some(child);
    }

    fn stop(&mut self) {
        if let Some(mut c) = self.child.take() {
            let _ = c.kill();
            let _ = c.wait();
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn cmd(&self, args: &[&str]) -> Output {
        vams(Some(&self.url), args)
    }

    fn request(&self, id_dp: &str, category: &str) -> Value {
        let counters = self.path("counters.json");
        json(self.cmd(&[
            "agent", "request", "--keys", self.agent.keys.to_str().unwrap(), "--id-a", "bank", "--id-dp", id_dp,
            "--counters", counters.to_str().unwrap(), "--category", category, "--purpose", "test",
            "--user-public", &self.user.encryption_public,
        ]))
    }

    /// Waits until the map covers the whole log.
    fn settle(&self) {
        for _ in 0..200 {
            let heads = json(self.cmd(&["heads"]));
            if heads["map"]["log_size_covered"] == heads["log"]["tree_size"] {
                return;
            }
            std::thread::sleep(Duration::from_millis(20));
        }
        panic!("map never caught up with the log");
    }
}

impl Drop for Deployment {
    fn drop(&mut self) {
        self.stop();
    }
}

fn write_records(path: &Path, rows: usize) {
    let mut f = std::fs::File::create(path).unwrap();
    writeln!(f, "id_c,e1,e2,e3").unwrap();
    for i in 0..rows {
        let bits = [i % 2 == 0, i % 3 == 0, i % 5 == 0];
        let fields: Vec<&str> = bits.iter().map(|&b| if b { "1" } else { "0" }).collect();
        writeln!(f, "{:032x},{}", i + 1, fields.join(",")).unwrap();
    }
}

#[test]
fn request_check_fetch_and_audit() {
    let mut d = Deployment::start();
    let first = d.request("alice@clinic", "research");
    let second = d.request("alice@clinic", "billing");
    assert_eq!((first["n"].as_u64(), second["n"].as_u64()), (Some(0), Some(1)));
    d.request("bob@clinic", "research");
    d.settle();

    let user_keys = d.user.keys.to_str().unwrap().to_string();
    let checked = json(d.cmd(&["user", "check", "--keys", &user_keys, "--id-a", "bank", "--id-dp", "alice@clinic"]));
    let entries = checked["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 2);
    assert_eq!(entries[1]["body"]["category"], "billing");
    assert!(checked["terminal"].is_object());

    let id_c = first["id_c"].as_str().unwrap();
    let fetched = json(d.cmd(&["provider", "fetch", "--keys", &user_keys, "--id-c", id_c]));
    assert_eq!(fetched["envelope"]["id_c"], id_c);
    let missing = d.cmd(&["provider", "fetch", "--keys", &user_keys, "--id-c", &"0".repeat(32)]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("REQUEST_NOT_LOGGED"));

    let cursor = d.path("cursor.json");
    let audit = |d: &Deployment, extra: &[&str]| {
        let mut args = vec!["auditor", "audit", "--keys", d.auditor.keys.to_str().unwrap(), "--cursor", cursor.to_str().unwrap()];
        args.extend_from_slice(extra);
        json(d.cmd(&args))
    };
    let report = audit(&d, &[]);
    assert_eq!((report["valid"].as_u64(), report["invalid"].as_u64()), (Some(3), Some(0)));
    assert_eq!(report["categories"]["research"], 2);

    // Restart from disk, add one entry, and resume from the saved cursor.
    d.stop();
    d.run();
    d.request("alice@clinic", "research");
    d.settle();
    let next = audit(&d, &[]);
    assert_eq!((next["from_size"].as_u64(), next["valid"].as_u64()), (Some(3), Some(1)));
    let from_zero = audit(&d, &["--from-size", "0"]);
    assert_eq!(from_zero["valid"], 4);

    // A key file without `auditor-public` cannot seal requests.
    let bad = d.cmd(&[
        "agent", "request", "--keys", &user_keys, "--id-a", "x", "--id-dp", "y", "--n", "0", "--category", "c",
        "--user-public", &d.user.encryption_public,
    ]);
    assert_eq!(bad.status.code(), Some(1), "missing auditor-public is an operational error");
}

#[test]
fn publish_and_monitor() {
    let d = Deployment::start();
    let dataset = d.path("d.csv");
    write_records(&dataset, 600);
    let out_dir = d.path("pub");
    let published = json(d.cmd(&[
        "auditor", "publish", "--keys", d.auditor.keys.to_str().unwrap(), "--dataset", dataset.to_str().unwrap(),
        "--k", "1", "--seed", &"ab".repeat(32), "--out-dir", out_dir.to_str().unwrap(),
    ]));
    let index = published["index"].as_u64().unwrap().to_string();
    let manifest = out_dir.join("manifest.json");
    let dpriv = out_dir.join("dpriv.csv");
    let monitor = |extra: &[&str]| {
        let mut args = vec!["user", "monitor", "--dpriv", dpriv.to_str().unwrap()];
        args.extend_from_slice(extra);
        d.cmd(&args)
    };
    let id = format!("{:032x}", 7);
    let accepted = json(monitor(&["--manifest", manifest.to_str().unwrap(), "--record", dataset.to_str().unwrap(), "--id-c", &id]));
    assert_eq!(accepted["accepted"], true);
    let from_log = json(monitor(&["--log-index", &index, "--keys", d.user.keys.to_str().unwrap()]));
    assert_eq!(from_log["accepted"], true);

    // Drop one share row.
    let text = std::fs::read_to_string(&dpriv).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines.remove(1);
    std::fs::write(&dpriv, lines.join("\n") + "\n").unwrap();
    let rejected = monitor(&["--manifest", manifest.to_str().unwrap()]);
    assert_eq!(rejected.status.code(), Some(2));
    let report: Value = serde_json::from_str(&stdout(&rejected)).unwrap();
    let reasons: Vec<&str> = report["rejections"].as_array().unwrap().iter().map(|r| r["reason"].as_str().unwrap()).collect();
    assert!(reasons.contains(&"DIGEST_MISMATCH"), "{reasons:?}");

    let tiny = d.path("tiny.csv");
    write_records(&tiny, 5);
    let unsafe_out = d.cmd(&[
        "auditor", "publish", "--keys", d.auditor.keys.to_str().unwrap(), "--dataset", tiny.to_str().unwrap(), "--k", "1",
        "--out-dir", d.path("pub2").to_str().unwrap(),
    ]);
    assert_eq!(unsafe_out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&unsafe_out.stderr).contains("UNSAFE_ELEMENT_COUNT"));
}

#[test]
fn broker_decisions_are_logged_for_the_user() {
    let d = Deployment::start();
    let store = d.path("store.bin");
    let policy = d.path("policy.json");
    std::fs::write(&policy, r#"{"allow":["research"],"deny":["marketing"]}"#).unwrap();
    let broker_keys = d.broker.keys.to_str().unwrap();
    ok(d.cmd(&[
        "broker", "subscribe", "--keys", broker_keys, "--store", store.to_str().unwrap(), "--user", "alice",
        "--id-dp", "alice@clinic", "--user-public", &d.user.encryption_public,
    ]));
    assert!(!String::from_utf8_lossy(&std::fs::read(&store).unwrap()).contains("alice"));
    let requests = d.path("requests.jsonl");
    std::fs::write(
        &requests,
        "{\"user\":\"alice\",\"category\":\"research\"}\n{\"user\":\"alice\",\"category\":\"marketing\"}\n{\"user\":\"alice\",\"category\":\"genomics\"}\n",
    )
    .unwrap();
    let out = ok(d.cmd(&[
        "broker", "run", "--policy", policy.to_str().unwrap(), "--keys", broker_keys, "--store", store.to_str().unwrap(),
        "--id-a", "broker-1", "--requests", requests.to_str().unwrap(),
    ]));
    let decisions: Vec<Value> = out.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    let allowed: Vec<bool> = decisions.iter().map(|v| v["allowed"].as_bool().unwrap()).collect();
    assert_eq!(allowed, [true, false, false]);
    d.settle();
    let checked = json(d.cmd(&[
        "user", "check", "--keys", d.user.keys.to_str().unwrap(), "--id-a", "broker-1", "--id-dp", "alice@clinic",
    ]));
    let logged: Vec<&str> =
        checked["entries"].as_array().unwrap().iter().map(|e| e["body"]["decision"].as_str().unwrap()).collect();
    assert_eq!(logged, ["allow", "deny", "deny"]);
}

#[test]
fn detect_finds_a_fork_between_two_servers_sharing_a_key() {
    let a = Deployment::start();
    let b = Deployment::start_with(Some(&a.path("srv/server.key")));
    a.request("alice@clinic", "research");
    b.request("alice@clinic", "marketing");
    a.settle();
    b.settle();
    let keys = a.user.keys.to_str().unwrap();
    let saved = a.path("a-heads.json");
    ok(a.cmd(&["heads", "--out", saved.to_str().unwrap()]));

    let clean = a.cmd(&["detect", "--keys", keys, "--heads", &format!("{},{}", saved.display(), a.url)]);
    assert_eq!(clean.status.code(), Some(0), "{}", stdout(&clean));
    let forked = a.cmd(&["detect", "--keys", keys, "--heads", &format!("{},{}", saved.display(), b.url)]);
    assert_eq!(forked.status.code(), Some(2));
    let report: Value = serde_json::from_str(&stdout(&forked)).unwrap();
    assert!(!report["evidence"].as_array().unwrap().is_empty());
}

#[test]
fn bounds_table_and_errors() {
    let csv = ok(vams(None, &["bounds", "--table2", "--csv"]));
    assert_eq!(csv.lines().count(), 17);
    assert!(csv.starts_with("scheme,k,known,users,e_max,success,success_direct_f64"));
    let text = ok(vams(None, &["bounds", "--table2"]));
    assert!(text.contains("5Ballot (4)"));
    let single = ok(vams(None, &["bounds", "--k", "1", "--users", "100", "--known", "1"]));
    assert!(single.contains("at most 6 elements"));
    assert_eq!(vams(None, &["bounds"]).status.code(), Some(1));
    assert_eq!(vams(None, &["no-such-command"]).status.code(), Some(2), "clap usage errors");
    let unreachable = vams(Some("http://127.0.0.1:1"), &["heads"]);
    assert_eq!(unreachable.status.code(), Some(1));
}

#[test]
fn experiments_write_csv_and_answer_to_their_own_name() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("results");
    let text = ok(vams(None, &["exp", "fig8", "--trials", "1", "--out", out.to_str().unwrap()]));
    assert!(text.contains("size=8"));
    let summary = std::fs::read_to_string(out.join("fig8_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 7);

    let alias = dir.path().join("vams-exp");
    std::fs::copy(BIN, &alias).unwrap();
    let bench = Command::new(&alias)
        .args(["bench", "--batch-sizes", "1,10", "--duration-ms", "200", "--in-memory", "--out", out.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(bench.status.code(), Some(0), "{}", String::from_utf8_lossy(&bench.stderr));
    let rows = std::fs::read_to_string(out.join("bench.csv")).unwrap();
    assert_eq!(rows.lines().count(), 3);
}

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


use std::collections::BTreeSet;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use vams::api::{ApiError, LogApi, MapLookup, SubmitReceipt};
use vams::envelope::{RequestEnvelope, SignedManifest};
use vams::heads::{SignedLogRoot, SignedMapRoot};
use vams::identity::{derive_share_id, CommonId, DataProviderIdentifier, EncryptionKeyPair};
use vams::merkle::{ConsistencyProof, Digest, EvidenceKind, InclusionProof};
use vams::multiballot::{Record, RecordSet};
use vams::roles::{
    audit, broker_respond, check, detect, fetch_manifest, monitor, prepare_publication, provide, publish, request,
    AuditCursor, BrokerPolicy, BrokerStore, CheckOptions, HeadSource, IncomingRequest, PublishOptions, RequestBody,
    RoleError, Subscription, DEFAULT_DISTRIBUTION_TOLERANCE,
};
use vams::sandbox::Sandbox;

fn dp(name: &str) -> DataProviderIdentifier {
    DataProviderIdentifier::new(name.as_bytes()).unwrap()
}

fn evidence(r: Result<impl std::fmt::Debug, RoleError>) -> String {
    match r {
        Err(RoleError::EvidenceSuspected(s)) => s.reason,
        other => panic!("expected EVIDENCE_SUSPECTED, got {other:?}"),
    }
}

/// Serves the request log of one server and the map of another; both sign
/// with the same key, as a compromised operator would.
struct Spliced {
    log: Arc<dyn LogApi>,
    map: Arc<dyn LogApi>,
    corrupt_proofs: bool,
}

impl LogApi for Spliced {
    fn submit_request(&self, e: &RequestEnvelope) -> Result<SubmitReceipt, ApiError> {
        self.log.submit_request(e)
    }
    fn submit_audit(&self, m: &SignedManifest) -> Result<SubmitReceipt, ApiError> {
        self.log.submit_audit(m)
    }
    fn log_root(&self) -> Result<SignedLogRoot, ApiError> {
        self.log.log_root()
    }
    fn log_entry(&self, index: u64) -> Result<Vec<u8>, ApiError> {
        self.log.log_entry(index)
    }
    fn log_inclusion(&self, index: u64, size: u64) -> Result<InclusionProof, ApiError> {
        self.log.log_inclusion(index, size)
    }
    fn log_consistency(&self, a: u64, b: u64) -> Result<ConsistencyProof, ApiError> {
        self.log.log_consistency(a, b)
    }
    fn map_root(&self) -> Result<SignedMapRoot, ApiError> {
        self.map.map_root()
    }
    fn map_proof(&self, key: &Digest, revision: Option<u64>) -> Result<MapLookup, ApiError> {
        let mut lookup = self.map.map_proof(key, revision)?;
        if self.corrupt_proofs {
            if let Some(v) = lookup.proof.value.as_mut() {
                let last = v.len() - 1;
                v[last] ^= 1;
            }
        }
        Ok(lookup)
    }
    fn headlog_root(&self) -> Result<SignedLogRoot, ApiError> {
        self.map.headlog_root()
    }
    fn headlog_entry(&self, index: u64) -> Result<Vec<u8>, ApiError> {
        self.map.headlog_entry(index)
    }
    fn headlog_inclusion(&self, index: u64, size: u64) -> Result<InclusionProof, ApiError> {
        self.map.headlog_inclusion(index, size)
    }
    fn headlog_consistency(&self, a: u64, b: u64) -> Result<ConsistencyProof, ApiError> {
        self.map.headlog_consistency(a, b)
    }
}

struct Pair {
    id_a: &'static [u8],
    id_dp: DataProviderIdentifier,
    user: EncryptionKeyPair,
}

fn submit(sb: &mut Sandbox, pair: &Pair, n: u64, category: &str) -> RequestEnvelope {
    let deriver = sb.deriver(pair.id_a);
    let body = RequestBody::new(category, format!("session {n}"));
    let now = sb.now();
    let (envelope, _) = request(
        &sb.server,
        &sb.agent,
        &deriver,
        &pair.id_dp,
        n,
        &body,
        &pair.user.public(),
        &sb.auditor_keys.public(),
        now,
        &mut sb.rng,
    )
    .unwrap();
    envelope
}

#[test]
fn check_returns_exactly_each_pairs_requests() {
    let mut sb = Sandbox::new(4, 1);
    let pairs: Vec<Pair> = (0..3u8)
        .map(|i| Pair {
            id_a: [b"alice".as_slice(), b"bob", b"carol"][i as usize],
            id_dp: dp(&format!("provider-{}", i % 2)),
            user: EncryptionKeyPair::from_secret([40 + i; 32]),
        })
        .collect();
    let counts = [9u64, 8, 8];
    let mut sent: Vec<BTreeSet<CommonId>> = vec![BTreeSet::new(); 3];
    for n in 0..9 {
        for (p, pair) in pairs.iter().enumerate() {
            if n < counts[p] {
                sent[p].insert(submit(&mut sb, pair, n, "treatment").id_c);
            }
        }
    }
    assert_eq!(sent.iter().map(BTreeSet::len).sum::<usize>(), 25);
    sb.flush();

    let vk = sb.verifying_key();
    let mut leaks = 0;
    for (p, pair) in pairs.iter().enumerate() {
        let res = check(&sb.server, &vk, &sb.deriver(pair.id_a), &pair.id_dp, &pair.user, CheckOptions::default()).unwrap();
        assert_eq!(res.entries.len() as u64, counts[p]);
        for (n, e) in res.entries.iter().enumerate() {
            assert_eq!(e.n, n as u64);
            assert!(!e.duplicate);
            assert_eq!(e.body.as_ref().unwrap().purpose, format!("session {n}"));
            assert!(e.proof.value.is_some());
            if !sent[p].contains(&e.id_c) {
                leaks += 1;
            }
        }
        assert!(res.terminal.as_ref().unwrap().value.is_none());
    }
    assert_eq!(leaks, 0);

    let (report, cursor) = audit(&sb.server, &vk, &sb.auditor_keys, &AuditCursor::default()).unwrap();
    assert_eq!((report.valid, report.invalid), (25, 0));
    assert_eq!(report.categories["treatment"], 25);
    assert_eq!(report.map_heads_checked, sb.server.get_signed_heads().map.revision);
    assert_eq!(cursor.log_size, 25);
}

#[test]
fn empty_history_yields_one_absence_proof() {
    let sb = Sandbox::new(10, 2);
    let user = EncryptionKeyPair::from_secret([1; 32]);
    let opts = CheckOptions { lookahead: 1, parallelism: 1 };
    let res = check(&sb.server, &sb.verifying_key(), &sb.deriver(b"nobody"), &dp("p"), &user, opts).unwrap();
    assert!(res.entries.is_empty());
    assert!(res.terminal.unwrap().value.is_none());
}

#[test]
fn reused_session_is_flagged_duplicate() {
    let mut sb = Sandbox::new(10, 3);
    let pair = Pair { id_a: b"dave", id_dp: dp("lab"), user: EncryptionKeyPair::from_secret([9; 32]) };
    let a = submit(&mut sb, &pair, 0, "x");
    let b = submit(&mut sb, &pair, 0, "y");
    assert_eq!(a.id_c, b.id_c);
    sb.flush();
    let res = check(&sb.server, &sb.verifying_key(), &sb.deriver(pair.id_a), &pair.id_dp, &pair.user, CheckOptions::default())
        .unwrap();
    assert_eq!(res.entries.len(), 1);
    assert!(res.entries[0].duplicate);
    assert_eq!(res.entries[0].body.as_ref().unwrap().category, "y");
}

#[test]
fn check_survives_gaps_within_lookahead() {
    let mut sb = Sandbox::new(10, 4);
    let pair = Pair { id_a: b"erin", id_dp: dp("lab"), user: EncryptionKeyPair::from_secret([9; 32]) };
    for n in [0, 1, 3] {
        submit(&mut sb, &pair, n, "x");
    }
    sb.flush();
    let d = sb.deriver(pair.id_a);
    let vk = sb.verifying_key();
    let g1 = check(&sb.server, &vk, &d, &pair.id_dp, &pair.user, CheckOptions { lookahead: 1, parallelism: 2 }).unwrap();
    assert_eq!(g1.entries.len(), 2);
    let g3 = check(&sb.server, &vk, &d, &pair.id_dp, &pair.user, CheckOptions::default()).unwrap();
    assert_eq!(g3.entries.iter().map(|e| e.n).collect::<Vec<_>>(), vec![0, 1, 3]);
}

#[test]
fn provider_answers_only_logged_requests() {
    let mut sb = Sandbox::new(10, 5);
    let pair = Pair { id_a: b"frank", id_dp: dp("clinic"), user: EncryptionKeyPair::from_secret([9; 32]) };
    let env = submit(&mut sb, &pair, 0, "x");
    let vk = sb.verifying_key();
    assert!(matches!(provide(&sb.server, &vk, &env.id_c), Err(RoleError::RequestNotLogged(_))));
    sb.flush();
    let got = provide(&sb.server, &vk, &env.id_c).unwrap();
    assert_eq!(got.envelope, env);
    assert_eq!(got.value.log_index, 0);
    assert!(matches!(provide(&sb.server, &vk, &CommonId([0; 16])), Err(RoleError::RequestNotLogged(_))));

    let server: Arc<dyn LogApi> = sb.server.clone();
    let liar = Spliced { log: server.clone(), map: server, corrupt_proofs: true };
    evidence(provide(&liar, &vk, &env.id_c));
}

#[test]
fn undecryptable_request_is_counted_invalid() {
    let mut sb = Sandbox::new(10, 6);
    let pair = Pair { id_a: b"gina", id_dp: dp("clinic"), user: EncryptionKeyPair::from_secret([9; 32]) };
    submit(&mut sb, &pair, 0, "x");
    let stranger = EncryptionKeyPair::from_secret([77; 32]);
    let d = sb.deriver(pair.id_a);
    let now = sb.now();
    request(&sb.server, &sb.agent, &d, &pair.id_dp, 1, &RequestBody::new("x", ""), &pair.user.public(), &stranger.public(), now, &mut sb.rng)
        .unwrap();
    submit(&mut sb, &pair, 2, "y");
    sb.flush();

    let vk = sb.verifying_key();
    let (a, cursor) = audit(&sb.server, &vk, &sb.auditor_keys, &AuditCursor::default()).unwrap();
    assert_eq!((a.valid, a.invalid, a.undecryptable), (2, 1, 1));
    assert_eq!(a.invalid_indices, vec![1]);
    let (b, _) = audit(&sb.server, &vk, &sb.auditor_keys, &AuditCursor::default()).unwrap();
    assert_eq!(a, b);

    submit(&mut sb, &pair, 3, "z");
    sb.flush();
    let (inc, _) = audit(&sb.server, &vk, &sb.auditor_keys, &cursor).unwrap();
    assert_eq!((inc.from_size, inc.covered_log_size, inc.valid, inc.invalid), (3, 4, 1, 0));
}

#[test]
fn audit_flags_map_heads_that_do_not_replay() {
    let mut honest = Sandbox::new(10, 7);
    let mut forked = Sandbox::new(10, 7);
    let a = Pair { id_a: b"hal", id_dp: dp("p"), user: EncryptionKeyPair::from_secret([1; 32]) };
    let b = Pair { id_a: b"ivy", id_dp: dp("p"), user: EncryptionKeyPair::from_secret([2; 32]) };
    for n in 0..3 {
        submit(&mut honest, &a, n, "x");
        submit(&mut forked, &b, n, "x");
    }
    honest.flush();
    forked.flush();
    let spliced = Spliced { log: honest.server.clone(), map: forked.server.clone(), corrupt_proofs: false };
    let reason = evidence(audit(&spliced, &honest.verifying_key(), &honest.auditor_keys, &AuditCursor::default()));
    assert!(reason.contains("replay disagrees"), "{reason}");
}

#[test]
fn detect_finds_forks_and_passes_honest_runs() {
    let mut honest = Sandbox::new(50, 8);
    let pair = Pair { id_a: b"jo", id_dp: dp("p"), user: EncryptionKeyPair::from_secret([1; 32]) };
    let mut early = Vec::new();
    let mut late = Vec::new();
    for n in 0..1000 {
        submit(&mut honest, &pair, n, "x");
        if n % 100 == 99 {
            let h = honest.server.get_signed_heads();
            if n < 500 { early.push(h) } else { late.push(h) }
        }
    }
    honest.flush();
    late.push(honest.server.get_signed_heads());
    let vk = honest.verifying_key();
    let sources = vec![
        HeadSource { name: "a".into(), heads: Ok(early) },
        HeadSource { name: "b".into(), heads: Ok(late) },
    ];
    let clean = detect(&sources, &vk, Some(&honest.server));
    assert!(clean.is_clean(), "{:?}", clean.evidence);
    assert!(clean.warnings.is_empty(), "{:?}", clean.warnings);

    let mut forked = Sandbox::new(50, 8);
    let other = Pair { id_a: b"kim", id_dp: dp("p"), user: EncryptionKeyPair::from_secret([1; 32]) };
    for n in 0..1000 {
        submit(&mut forked, &other, n, "x");
    }
    forked.flush();
    let fork_sources = vec![
        HeadSource::parse("honest", &serde_json::to_string(&honest.server.get_signed_heads()).unwrap()),
        HeadSource::parse("forked", &serde_json::to_string(&[forked.server.get_signed_heads()]).unwrap()),
    ];
    let report = detect(&fork_sources, &vk, None);
    assert!(!report.is_clean());
    assert!(report.evidence.iter().any(|e| e.kind() == EvidenceKind::SameSizeFork));
    assert!(report.evidence.iter().all(|e| e.is_valid(&vk)));

    let single = detect(&fork_sources[..1], &vk, None);
    assert!(single.is_clean());
    assert_eq!(serde_json::to_value(&single.warnings).unwrap()[0]["warning"], "INSUFFICIENT_SOURCES");
    let unreachable = vec![fork_sources[0].clone(), HeadSource::parse("junk", "not json")];
    assert_eq!(detect(&unreachable, &vk, None).warnings.len(), 2);
}

fn records(r: usize, t: usize, seed: u64) -> RecordSet {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let rows = (0..r)
        .map(|i| {
            let mut id = [0u8; 16];
            id[..8].copy_from_slice(&(i as u64).to_be_bytes());
            let mut bits = rng.gen::<u64>() & ((1 << t) - 1);
            if rng.gen_bool(0.4) {
                bits |= 0b11 << (t - 2);
            }
            Record { id_c: CommonId(id), bits }
        })
        .collect();
    RecordSet::new(t, rows).unwrap()
}

fn options(k: usize, seed: u8) -> PublishOptions {
    PublishOptions {
        k,
        queries: Vec::new(),
        threshold: 1e-4,
        known: None,
        tolerance: None,
        seed: [seed; 32],
        dpriv_location: Some("dpriv.csv".into()),
        timestamp: vams::sandbox::SANDBOX_EPOCH_MS,
    }
}

#[test]
fn publish_appends_a_verifiable_manifest() {
    let sb = Sandbox::new(10, 9);
    let d = records(400, 3, 1);
    let out = publish(&sb.server, &sb.auditor, &d, &options(1, 3)).unwrap();
    sb.flush();
    assert_eq!(out.manifest.dpriv_digest, out.dpriv.digest());
    let index = out.receipt.unwrap().index;
    let fetched = fetch_manifest(&sb.server, &sb.verifying_key(), Some(&sb.auditor.public_key().verifying_key().unwrap()), index)
        .unwrap();
    assert_eq!(fetched, out.manifest);
    let report = monitor(&fetched, &out.dpriv, Some((d.records[5].id_c, d.records[5].bits)), DEFAULT_DISTRIBUTION_TOLERANCE);
    assert!(report.accepted, "{:?}", report.rejections);

    let (a, _) = audit(&sb.server, &sb.verifying_key(), &sb.auditor_keys, &AuditCursor::default()).unwrap();
    assert_eq!((a.manifests, a.valid, a.invalid), (1, 0, 0));
}

#[test]
fn publish_refuses_unsafe_or_empty_datasets() {
    let d = records(100, 12, 2);
    match prepare_publication(&d, &options(1, 1)) {
        Err(RoleError::UnsafeElementCount { requested, max_safe_elements }) => {
            assert_eq!(requested, 12);
            assert!(max_safe_elements < 12);
            assert!(RoleError::UnsafeElementCount { requested, max_safe_elements }.to_string().contains("UNSAFE"));
        }
        other => panic!("{other:?}"),
    }
    let empty = RecordSet { t: 3, records: Vec::new() };
    assert!(prepare_publication(&empty, &options(1, 1)).is_err());
    assert!(prepare_publication(&records(50, 3, 3), &options(0, 1)).is_err());
}

#[test]
fn monitor_rejects_each_kind_of_tampering() {
    let d = records(600, 3, 4);
    let (manifest, dpriv) = prepare_publication(&d, &options(1, 4)).unwrap();
    let own = Some((d.records[0].id_c, d.records[0].bits));
    assert!(monitor(&manifest, &dpriv, own, DEFAULT_DISTRIBUTION_TOLERANCE).accepted);

    let mut bumped = manifest.clone();
    bumped.itemsets[0].support *= 1.1;
    bumped.itemsets[0].support += manifest.tolerance;
    assert!(monitor(&bumped, &dpriv, None, DEFAULT_DISTRIBUTION_TOLERANCE).has("STAT_MISMATCH"));

    let mine: Vec<_> = (1..=3).map(|i| derive_share_id(&d.records[0].id_c, i)).collect();
    let mut missing = dpriv.clone();
    missing.shares.retain(|s| s.id_share != mine[1]);
    let r = monitor(&manifest, &missing, own, DEFAULT_DISTRIBUTION_TOLERANCE);
    assert!(r.has("SHARES_MISSING") && r.has("DIGEST_MISMATCH"));

    let mut flipped = dpriv.clone();
    let pos = flipped.shares.iter().position(|s| s.id_share == mine[0]).unwrap();
    flipped.shares[pos].bits ^= 1;
    let r = monitor(&manifest, &flipped, own, DEFAULT_DISTRIBUTION_TOLERANCE);
    assert!(r.has("SHARES_TAMPERED") && r.has("DIGEST_MISMATCH"));
}

#[test]
fn broker_decisions_are_logged_for_the_user() {
    let mut sb = Sandbox::new(10, 10);
    let user = EncryptionKeyPair::from_secret([5; 32]);
    let mut store = BrokerStore {
        subscriptions: vec![Subscription { user: "lee".into(), id_dp: "hospital".into(), user_public: user.public(), next_n: 0 }],
    };
    let policy: BrokerPolicy = serde_json::from_str(r#"{"allow":["research"],"deny":["marketing"]}"#).unwrap();
    let broker_id = sb.deriver(b"broker-secret-for-lee");
    let auditor = sb.auditor_keys.public();
    let mut decisions = Vec::new();
    for category in ["research", "marketing", "insurance"] {
        let incoming = IncomingRequest { user: "lee".into(), category: category.into(), purpose: "study".into() };
        let now = sb.now();
        let (decision, _) =
            broker_respond(&sb.server, &sb.broker, &broker_id, &mut store, &policy, &incoming, &auditor, now, &mut sb.rng)
                .unwrap();
        decisions.push(decision.allowed);
    }
    assert_eq!(decisions, vec![true, false, false]);
    assert_eq!(store.subscriptions[0].next_n, 3);
    let stranger = IncomingRequest { user: "max".into(), category: "research".into(), purpose: String::new() };
    let now = sb.now();
    assert!(broker_respond(&sb.server, &sb.broker, &broker_id, &mut store, &policy, &stranger, &auditor, now, &mut sb.rng).is_err());
    sb.flush();

    let res = check(&sb.server, &sb.verifying_key(), &broker_id, &dp("hospital"), &user, CheckOptions::default()).unwrap();
    let logged: Vec<_> = res.entries.iter().map(|e| e.body.clone().unwrap().decision.unwrap()).collect();
    assert_eq!(logged, vec!["allow", "deny", "deny"]);
    assert!(res.entries.iter().all(|e| e.agent_key_id == sb.broker.key_id));
}

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

//! Publishing audit statistics with a share dataset, and monitoring them.

use ed25519_dalek::VerifyingKey;
use serde::{Deserialize, Serialize};

use super::RoleError;
use crate::api::{LogApi, SubmitReceipt};
use crate::bounds::max_safe_elements;
use crate::envelope::{LogRecord, PartySigner, SignedManifest};
use crate::identity::CommonId;
use crate::merkle::{verify_inclusion, Digest};
use crate::multiballot::{
    build_priv_dataset, check_share_distribution, verify_own_shares, BallotError, PrivDataset, RecordSet, SchemeManifest,
};
use crate::stats::{
    direct_measures, mine_frequent_itemsets, recovered_measures, ElementSet, ItemsetStat, MeasureQuery, ShareView,
};

/// What an auditor publishes about a dataset. Each published measure must be
/// within `tolerance / 2` of what anyone recovers from the share dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatisticsManifest {
    pub scheme: SchemeManifest,
    pub itemsets: Vec<ItemsetStat>,
    pub tolerance: f64,
    pub dpriv_digest: Digest,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dpriv_location: Option<String>,
}

#[derive(Clone, Debug)]
pub struct PublishOptions {
    pub k: usize,
    /// Measures to publish; empty means frequent itemsets of up to three
    /// elements at support 0.1 or more.
    pub queries: Vec<MeasureQuery>,
    /// Acceptable reconstruction probability.
    pub threshold: f64,
    /// Shares an adversary is assumed to hold; `None` takes the worst case.
    pub known: Option<usize>,
    /// Declared tolerance; `None` derives one from the achieved accuracy.
    pub tolerance: Option<f64>,
    pub seed: [u8; 32],
    pub dpriv_location: Option<String>,
    pub timestamp: u64,
}

#[derive(Clone, Debug)]
pub struct Published {
    pub manifest: StatisticsManifest,
    pub dpriv: PrivDataset,
    pub signed: SignedManifest,
    pub receipt: Option<SubmitReceipt>,
}

/// Frequent itemsets of up to `max_size` elements, with a rule confidence
/// (all but the last element as antecedent) for every multi-element set.
pub fn default_queries(d: &RecordSet, min_support: f64, max_size: usize) -> Result<Vec<MeasureQuery>, RoleError> {
    Ok(mine_frequent_itemsets(&d.dataset(), min_support)?
        .into_iter()
        .filter(|(s, _)| s.len() <= max_size)
        .map(|(s, _)| {
            let antecedent = (s.len() > 1).then(|| ElementSet::new(s.elements()[..s.len() - 1].to_vec()).unwrap());
            MeasureQuery { elements: s, antecedent }
        })
        .collect())
}

fn max_deviation(a: &[ItemsetStat], b: &[ItemsetStat]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| {
            let conf = match (x.confidence, y.confidence) {
                (Some(p), Some(q)) => (p - q).abs(),
                (None, None) => 0.0,
                _ => f64::INFINITY,
            };
            [(x.support - y.support).abs(), conf]
        })
        .fold(0.0, f64::max)
}

/// Rounds up to two significant figures.
fn round_up_2sig(x: f64) -> f64 {
    let scale = 10f64.powf(x.log10().floor() - 1.0);
    (x / scale).ceil() * scale
}

/// Builds the share dataset and manifest without touching the log.
pub fn prepare_publication(d: &RecordSet, opts: &PublishOptions) -> Result<(StatisticsManifest, PrivDataset), RoleError> {
    if d.records.is_empty() {
        return Err(BallotError::EmptyDataset.into());
    }
    if opts.k == 0 {
        return Err(RoleError::Invalid("k = 0 would publish records unmodified".into()));
    }
    let r = d.records.len() as u64;
    let known: Vec<usize> = match opts.known {
        Some(a) => vec![a],
        None => (1..=2 * opts.k).collect(),
    };
    let mut e_max = u32::MAX;
    for a in known {
        e_max = e_max.min(max_safe_elements(opts.k, r, a, opts.threshold)?.e_max);
    }
    if d.t as u64 > e_max as u64 {
        return Err(RoleError::UnsafeElementCount { requested: d.t, max_safe_elements: e_max });
    }

    let queries = if opts.queries.is_empty() { default_queries(d, 0.1, 3)? } else { opts.queries.clone() };
    let dpriv = build_priv_dataset(d, opts.k, opts.seed)?;
    let published = direct_measures(&d.dataset(), &queries)?;
    let shares = dpriv.rows();
    let recovered = recovered_measures(ShareView { shares: &shares, k: opts.k }, &queries)?;
    let deviation = max_deviation(&published, &recovered);
    let tolerance = match opts.tolerance {
        Some(tol) if deviation > tol / 2.0 => {
            return Err(RoleError::Invalid(format!(
                "declared tolerance {tol} is below twice the achieved deviation {deviation:.3e}"
            )))
        }
        Some(tol) => tol,
        None => round_up_2sig((2.5 * deviation).max(1e-3)),
    };
    let manifest = StatisticsManifest {
        scheme: SchemeManifest::new(opts.k, d.t, d.records.len(), &opts.seed),
        itemsets: published,
        tolerance,
        dpriv_digest: dpriv.digest(),
        dpriv_location: opts.dpriv_location.clone(),
    };
    Ok((manifest, dpriv))
}

/// Builds D_priv and the statistics, signs the manifest and appends it to
/// the request log.
pub fn publish(api: &dyn LogApi, signer: &PartySigner, d: &RecordSet, opts: &PublishOptions) -> Result<Published, RoleError> {
    let (manifest, dpriv) = prepare_publication(d, opts)?;
    let json = serde_json::to_string(&manifest).expect("manifest serializes");
    let signed = signer.sign_manifest(json, opts.timestamp);
    let receipt = api.submit_audit(&signed)?;
    Ok(Published { manifest, dpriv, signed, receipt: Some(receipt) })
}

/// Fetches the manifest logged at `index`, proving it is in the signed log.
pub fn fetch_manifest(
    api: &dyn LogApi,
    server: &VerifyingKey,
    auditor: Option<&VerifyingKey>,
    index: u64,
) -> Result<StatisticsManifest, RoleError> {
    let root = api.log_root()?;
    if root.verify(server).is_err() {
        return Err(RoleError::suspect("log head signature does not verify", root));
    }
    let entry = api.log_entry(index)?;
    let proof = api.log_inclusion(index, root.tree_size)?;
    if verify_inclusion(&root, &entry, &proof).is_err() {
        return Err(RoleError::suspect("manifest entry is not in the signed log", (root, proof)));
    }
    let Ok(LogRecord::Audit(m)) = LogRecord::decode(&entry) else {
        return Err(RoleError::Invalid(format!("log entry {index} is not an audit manifest")));
    };
    if let Some(key) = auditor {
        if m.verify(key).is_err() {
            return Err(RoleError::Invalid("manifest signature does not verify".into()));
        }
    }
    serde_json::from_str(&m.manifest).map_err(|e| RoleError::Invalid(format!("manifest: {e}")))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "reason", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MonitorRejection {
    DigestMismatch { expected: Digest, actual: Digest },
    SchemeMismatch { detail: String },
    StatMismatch { elements: ElementSet, measure: &'static str, published: f64, recovered: Option<f64> },
    SharesMissing { expected: usize, found: usize },
    SharesTampered { detail: String },
    ShareDistribution { elements: ElementSet, max_deviation: f64 },
}

impl MonitorRejection {
    pub fn code(&self) -> &'static str {
        match self {
            Self::DigestMismatch { .. } => "DIGEST_MISMATCH",
            Self::SchemeMismatch { .. } => "SCHEME_MISMATCH",
            Self::StatMismatch { .. } => "STAT_MISMATCH",
            Self::SharesMissing { .. } => "SHARES_MISSING",
            Self::SharesTampered { .. } => "SHARES_TAMPERED",
            Self::ShareDistribution { .. } => "SHARE_DISTRIBUTION",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MonitorReport {
    pub accepted: bool,
    pub rejections: Vec<MonitorRejection>,
    pub max_stat_deviation: f64,
    pub max_distribution_deviation: f64,
}

impl MonitorReport {
    pub fn has(&self, code: &str) -> bool {
        self.rejections.iter().any(|r| r.code() == code)
    }
}

/// Default bound on per-bitstring deviation in the distribution check, as a
/// fraction of all shares.
pub const DEFAULT_DISTRIBUTION_TOLERANCE: f64 = 0.05;

/// Re-checks a publication: digest and shape of D_priv, every published
/// measure against its recovery from D_priv, the caller's own shares if
/// given, and the share distribution over every element and element pair.
pub fn monitor(
    manifest: &StatisticsManifest,
    dpriv: &PrivDataset,
    own: Option<(CommonId, u64)>,
    distribution_tolerance: f64,
) -> MonitorReport {
    let mut rejections = Vec::new();
    let k = manifest.scheme.k;

    let digest = dpriv.digest();
    if digest != manifest.dpriv_digest {
        rejections.push(MonitorRejection::DigestMismatch { expected: manifest.dpriv_digest, actual: digest });
    }
    if dpriv.k != k || dpriv.t != manifest.scheme.t || dpriv.shares.len() != (2 * k + 1) * manifest.scheme.r {
        rejections.push(MonitorRejection::SchemeMismatch {
            detail: format!(
                "{} shares of {} elements under k={}; manifest declares r={}, t={}, k={}",
                dpriv.shares.len(),
                dpriv.t,
                dpriv.k,
                manifest.scheme.r,
                manifest.scheme.t,
                k
            ),
        });
    }

    let shares = dpriv.rows();
    let view = ShareView { shares: &shares, k };
    let half = manifest.tolerance / 2.0;
    let mut max_stat_deviation: f64 = 0.0;
    for stat in &manifest.itemsets {
        let mut compare = |measure, published: f64, recovered: Option<f64>| {
            let dev = recovered.map_or(f64::INFINITY, |r| (r - published).abs());
            max_stat_deviation = max_stat_deviation.max(dev);
            if !(dev <= half) {
                rejections.push(MonitorRejection::StatMismatch {
                    elements: stat.elements.clone(),
                    measure,
                    published,
                    recovered,
                });
            }
        };
        compare("support", stat.support, view.support(&stat.elements).ok());
        if let (Some(a), Some(c)) = (&stat.antecedent, stat.confidence) {
            compare("confidence", c, view.confidence(a, &stat.elements).ok());
        }
    }

    if let Some((id_c, bits)) = own {
        match verify_own_shares(&id_c, bits, dpriv) {
            Ok(()) => {}
            Err(BallotError::SharesMissing { expected, found }) => {
                rejections.push(MonitorRejection::SharesMissing { expected, found })
            }
            Err(e) => rejections.push(MonitorRejection::SharesTampered { detail: e.to_string() }),
        }
    }

    let mut max_distribution_deviation: f64 = 0.0;
    let t = dpriv.t;
    let mut sets: Vec<ElementSet> = (0..t).map(|j| ElementSet::new(vec![j]).unwrap()).collect();
    for a in 0..t {
        for b in a + 1..t {
            sets.push(ElementSet::new(vec![a, b]).unwrap());
        }
    }
    for set in sets {
        let checked = shares.project(&set).map_err(BallotError::from).and_then(|proj| {
            let rec = view.recover_marginal(&set)?;
            check_share_distribution(&proj, k, &rec.estimate, distribution_tolerance)
        });
        match checked {
            Ok(c) => {
                max_distribution_deviation = max_distribution_deviation.max(c.max_deviation);
                if !c.accepted {
                    rejections.push(MonitorRejection::ShareDistribution { elements: set, max_deviation: c.max_deviation });
                }
            }
            Err(e) => rejections.push(MonitorRejection::SchemeMismatch { detail: e.to_string() }),
        }
    }

    MonitorReport { accepted: rejections.is_empty(), rejections, max_stat_deviation, max_distribution_deviation }
}

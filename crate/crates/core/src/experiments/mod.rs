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

//! Percent-error experiments on synthetic datasets with planted itemsets,
//! plus a log-server throughput benchmark.

mod bench;

pub use bench::{bench_throughput, BenchOptions, BenchReport, BenchRow};

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};
use thiserror::Error;

use crate::multiballot::generate_share_rows;
use crate::stats::{element_bit, percent_error, Dataset, ElementSet, ShareView, StatsError, MAX_ELEMENTS};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("unachievable dataset spec: {0}")]
    Unachievable(String),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("benchmark: {0}")]
    Bench(String),
}

/// One itemset planted at an exact support.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Planted {
    pub elements: ElementSet,
    pub support: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub r: usize,
    pub t: usize,
    pub planted: Vec<Planted>,
    /// Probability that an element is present outside planted occurrences.
    pub background: f64,
}

impl SyntheticSpec {
    /// Planted itemsets must be pairwise disjoint so each can be hit exactly.
    pub fn check(&self) -> Result<(), ExperimentError> {
        let fail = |m: String| Err(ExperimentError::Unachievable(m));
        if self.r == 0 {
            return fail("r must be positive".into());
        }
        if self.t == 0 || self.t > MAX_ELEMENTS {
            return fail(format!("t = {} outside 1..={MAX_ELEMENTS}", self.t));
        }
        if !(0.0..=1.0).contains(&self.background) {
            return fail(format!("background density {} outside [0, 1]", self.background));
        }
        let mut used = 0u64;
        for p in &self.planted {
            if !(p.support > 0.0 && p.support <= 1.0) {
                return fail(format!("{} planted at support {} outside (0, 1]", p.elements, p.support));
            }
            let mask = p.elements.mask(self.t).map_err(|e| ExperimentError::Unachievable(e.to_string()))?;
            if used & mask != 0 {
                return fail(format!("{} overlaps another planted itemset", p.elements));
            }
            used |= mask;
        }
        Ok(())
    }
}

/// Builds a dataset in which every planted itemset occurs in exactly
/// `round(support * r)` records; all other bits are independent background.
pub fn gen_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<Dataset, ExperimentError> {
    spec.check()?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let t = spec.t;
    let mut rows: Vec<u64> = (0..spec.r)
        .map(|_| (0..t).filter(|_| rng.gen_bool(spec.background)).fold(0, |acc, j| acc | element_bit(j, t)))
        .collect();
    let mut order: Vec<usize> = (0..spec.r).collect();
    let mut inside = vec![false; spec.r];
    for p in &spec.planted {
        let mask = p.elements.mask(t)?;
        let hits = (p.support * spec.r as f64).round() as usize;
        order.partial_shuffle(&mut rng, hits);
        inside.iter_mut().for_each(|b| *b = false);
        for &i in &order[..hits] {
            inside[i] = true;
            rows[i] |= mask;
        }
        // Break accidental complete occurrences elsewhere.
        for (row, _) in rows.iter_mut().zip(&inside).filter(|(_, &hit)| !hit) {
            if *row & mask == mask {
                let drop = p.elements.elements()[rng.gen_range(0..p.elements.len())];
                *row &= !element_bit(drop, t);
            }
        }
    }
    Ok(Dataset::new(t, rows)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// Record counts capped at 10^5; 20 trials unless overridden.
    Ci,
    /// Record counts as specified; 100 trials unless overridden.
    Full,
}

impl FromStr for Profile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ci" => Ok(Self::Ci),
            "full" => Ok(Self::Full),
            other => Err(format!("unknown profile {other:?}; expected ci or full")),
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Ci => "ci",
            Self::Full => "full",
        })
    }
}

pub const CI_MAX_RECORDS: usize = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExperimentConfig {
    pub profile: Profile,
    pub trials: Option<usize>,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn new(profile: Profile) -> Self {
        Self { profile, trials: None, seed: 0 }
    }

    pub fn trials(&self) -> usize {
        self.trials.unwrap_or(match self.profile {
            Profile::Ci => 20,
            Profile::Full => 100,
        })
    }

    pub fn records(&self, r: usize) -> usize {
        match self.profile {
            Profile::Ci => r.min(CI_MAX_RECORDS),
            Profile::Full => r,
        }
    }
}

/// One configuration: an itemset of `size` elements planted at `support` in
/// `r` records of `t` elements, shared under scheme `k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Setting {
    pub k: usize,
    pub r: usize,
    pub t: usize,
    pub size: usize,
    pub support: f64,
}

pub const BACKGROUND_DENSITY: f64 = 0.1;

impl Setting {
    pub fn itemset(&self) -> ElementSet {
        ElementSet::new((0..self.size).collect()).expect("size is at least one")
    }

    pub fn spec(&self) -> SyntheticSpec {
        SyntheticSpec {
            r: self.r,
            t: self.t,
            planted: vec![Planted { elements: self.itemset(), support: self.support }],
            background: BACKGROUND_DENSITY,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub experiment: String,
    pub k: usize,
    pub r: usize,
    pub t: usize,
    pub size: usize,
    pub target_support: f64,
    pub trial: usize,
    pub support: f64,
    pub recovered: f64,
    pub percent_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub experiment: String,
    pub k: usize,
    pub r: usize,
    pub t: usize,
    pub size: usize,
    pub target_support: f64,
    pub trials: usize,
    pub mean_percent_error: f64,
    pub variance: f64,
}

impl SummaryRow {
    pub fn matches(&self, s: &Setting) -> bool {
        (self.k, self.r, self.t, self.size) == (s.k, s.r, s.t, s.size) && self.target_support == s.support
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub trials: Vec<TrialRow>,
    pub summary: Vec<SummaryRow>,
}

impl ExperimentResult {
    pub fn find(&self, s: &Setting) -> Option<&SummaryRow> {
        self.summary.iter().find(|row| row.matches(s))
    }

    /// Writes `<name>.csv` with one row per trial and `<name>_summary.csv`.
    pub fn write_csv(&self, dir: &Path, name: &str) -> Result<(), ExperimentError> {
        std::fs::create_dir_all(dir)?;
        let mut w = csv::Writer::from_path(dir.join(format!("{name}.csv")))?;
        for row in &self.trials {
            w.serialize(row)?;
        }
        w.flush()?;
        let mut w = csv::Writer::from_path(dir.join(format!("{name}_summary.csv")))?;
        for row in &self.summary {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Seed for one trial, independent of scheduling and of other settings.
pub fn trial_seed(base: u64, experiment: &str, s: &Setting, trial: usize) -> u64 {
    let mut h = Sha256::new();
    h.update(base.to_be_bytes());
    h.update(experiment.as_bytes());
    for v in [s.k, s.r, s.t, s.size, trial] {
        h.update((v as u64).to_be_bytes());
    }
    h.update(s.support.to_bits().to_be_bytes());
    u64::from_be_bytes(h.finalize()[..8].try_into().expect("eight bytes"))
}

/// Generates D, shares it, recovers the planted itemset's support from the
/// shares and scores it against the support in D.
pub fn run_trial(experiment: &str, s: &Setting, trial: usize, seed: u64) -> Result<TrialRow, ExperimentError> {
    let d = gen_synthetic(&s.spec(), seed)?;
    let set = s.itemset();
    let support = d.support(&set)?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 0x5eed_5eed_5eed_5eed);
    let shares = generate_share_rows(&d, s.k, &mut rng);
    let recovered = ShareView { shares: &shares, k: s.k }.support(&set)?;
    Ok(TrialRow {
        experiment: experiment.into(),
        k: s.k,
        r: s.r,
        t: s.t,
        size: s.size,
        target_support: s.support,
        trial,
        support,
        recovered,
        percent_error: percent_error(support, recovered)?,
    })
}

/// Runs `trials` trials of every setting in parallel and summarises them.
pub fn run_settings(
    experiment: &str,
    settings: &[Setting],
    trials: usize,
    seed: u64,
) -> Result<ExperimentResult, ExperimentError> {
    let jobs: Vec<(usize, usize)> = (0..settings.len()).flat_map(|i| (0..trials).map(move |j| (i, j))).collect();
    let rows = jobs
        .par_iter()
        .map(|&(i, j)| run_trial(experiment, &settings[i], j, trial_seed(seed, experiment, &settings[i], j)))
        .collect::<Result<Vec<_>, _>>()?;
    let summary = settings
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let errs: Vec<f64> = rows[i * trials..(i + 1) * trials].iter().map(|r| r.percent_error).collect();
            let (mean, variance) = mean_variance(&errs);
            SummaryRow {
                experiment: experiment.into(),
                k: s.k,
                r: s.r,
                t: s.t,
                size: s.size,
                target_support: s.support,
                trials,
                mean_percent_error: mean,
                variance,
            }
        })
        .collect();
    Ok(ExperimentResult { trials: rows, summary })
}

/// Mean and unbiased sample variance.
pub fn mean_variance(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() < 2 { 0.0 } else { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) };
    (mean, var)
}

pub const FIG6_RECORDS: usize = 1_000_000;
pub const FIG6_SCHEMES: [usize; 4] = [1, 2, 3, 4];
pub const FIG7_RECORDS: [usize; 4] = [1_000, 10_000, 100_000, 1_000_000];
pub const FIG7_SUPPORTS: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];
pub const FIG8_RECORDS: usize = 100_000;
pub const FIG8_SUPPORT: f64 = 0.1;
pub const FIG8_SIZES: std::ops::RangeInclusive<usize> = 2..=8;
const PAIR_ELEMENTS: usize = 4;

/// Twelve supports spaced evenly in log scale from 0.01 to 0.5.
pub fn fig6_supports() -> Vec<f64> {
    let (lo, hi) = (0.01f64.ln(), 0.5f64.ln());
    (0..12).map(|i| (lo + (hi - lo) * i as f64 / 11.0).exp()).collect()
}

/// Pair support sweep for each scheme.
pub fn run_fig6(cfg: &ExperimentConfig) -> Result<ExperimentResult, ExperimentError> {
    let r = cfg.records(FIG6_RECORDS);
    let settings: Vec<Setting> = FIG6_SCHEMES
        .iter()
        .flat_map(|&k| fig6_supports().into_iter().map(move |support| Setting { k, r, t: PAIR_ELEMENTS, size: 2, support }))
        .collect();
    run_settings("fig6", &settings, cfg.trials(), cfg.seed)
}

/// Pair support across dataset sizes under k = 1.
pub fn run_fig7(cfg: &ExperimentConfig) -> Result<ExperimentResult, ExperimentError> {
    let mut sizes: Vec<usize> = FIG7_RECORDS.iter().map(|&r| cfg.records(r)).collect();
    sizes.dedup();
    let settings: Vec<Setting> = sizes
        .iter()
        .flat_map(|&r| FIG7_SUPPORTS.iter().map(move |&support| Setting { k: 1, r, t: PAIR_ELEMENTS, size: 2, support }))
        .collect();
    run_settings("fig7", &settings, cfg.trials(), cfg.seed)
}

/// Itemsets of growing size at a fixed support under k = 1.
pub fn run_fig8(cfg: &ExperimentConfig) -> Result<ExperimentResult, ExperimentError> {
    let r = cfg.records(FIG8_RECORDS);
    let t = *FIG8_SIZES.end();
    let settings: Vec<Setting> =
        FIG8_SIZES.map(|size| Setting { k: 1, r, t, size, support: FIG8_SUPPORT }).collect();
    run_settings("fig8", &settings, cfg.trials(), cfg.seed)
}

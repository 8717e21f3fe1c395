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

//! MultiBallot share generation.
//!
//! Each record becomes `2k+1` shares. For every element independently, a
//! uniformly chosen `k+1` of the shares carry the record's value and the
//! other `k` its complement, so any single share looks like a noisy copy of
//! the record while the majority still reconstructs it.

use std::collections::HashMap;
use std::io;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::identity::{derive_share_id, CommonId, ShareId};
use crate::merkle::Digest;
use crate::stats::{element_bit, occurrence_vector, Dataset, ExpectationMatrix, StatsError, MAX_ELEMENTS};

#[derive(Debug, Error)]
pub enum BallotError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("records must have between 1 and {MAX_ELEMENTS} elements, got {0}")]
    BadWidth(usize),
    #[error("expected {expected} shares, got {actual}")]
    ShareCount { expected: usize, actual: usize },
    #[error("SHARES_MISSING: {found} of {expected} shares present")]
    SharesMissing { expected: usize, found: usize },
    #[error("SHARES_TAMPERED: {0}")]
    SharesTampered(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("malformed file: {0}")]
    Format(String),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

/// A user record: `t` binary elements packed as in [`crate::stats`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Record {
    pub id_c: CommonId,
    pub bits: u64,
}

/// The auditor's dataset D.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RecordSet {
    pub t: usize,
    pub records: Vec<Record>,
}

impl RecordSet {
    pub fn new(t: usize, records: Vec<Record>) -> Result<Self, BallotError> {
        Dataset::new(t, records.iter().map(|r| r.bits).collect()).map_err(|_| BallotError::BadWidth(t))?;
        Ok(Self { t, records })
    }

    pub fn dataset(&self) -> Dataset {
        Dataset::new(self.t, self.records.iter().map(|r| r.bits).collect()).expect("validated on construction")
    }

    /// Reads `id_c,e1,…,et` with 0/1 values.
    pub fn read_csv(path: &Path) -> Result<Self, BallotError> {
        let mut rdr = csv::Reader::from_path(path)?;
        let t = rdr.headers()?.len().saturating_sub(1);
        let mut records = Vec::new();
        for row in rdr.records() {
            let row = row?;
            let id_c = row[0].parse().map_err(|_| BallotError::Format(format!("bad id_c {:?}", &row[0])))?;
            records.push(Record { id_c, bits: parse_bits(row.iter().skip(1))? });
        }
        Self::new(t, records)
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), BallotError> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(std::iter::once("id_c".to_string()).chain(element_headers(self.t, "e")))?;
        for r in &self.records {
            w.write_record(std::iter::once(r.id_c.to_hex()).chain(bits_to_fields(r.bits, self.t)))?;
        }
        w.flush()?;
        Ok(())
    }
}

fn element_headers(t: usize, prefix: &str) -> impl Iterator<Item = String> + '_ {
    (1..=t).map(move |j| format!("{prefix}{j}"))
}

fn bits_to_fields(bits: u64, t: usize) -> impl Iterator<Item = String> {
    (0..t).map(move |j| if bits & element_bit(j, t) != 0 { "1" } else { "0" }.to_string())
}

fn parse_bits<'a>(fields: impl Iterator<Item = &'a str>) -> Result<u64, BallotError> {
    fields.into_iter().try_fold(0u64, |acc, f| match f.trim() {
        "0" => Ok(acc << 1),
        "1" => Ok((acc << 1) | 1),
        other => Err(BallotError::Format(format!("expected 0 or 1, got {other:?}"))),
    })
}

/// One univariate share: a single element's value, tagged with its type.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TaggedShare {
    pub id_share: ShareId,
    /// 0-based element index.
    pub element: usize,
    pub value: bool,
}

/// Splits a record into one tagged share per element; share `j` is
/// addressed by `Hash(id_c ‖ j+1)`.
pub fn split_univariate(record: &Record, t: usize) -> Vec<TaggedShare> {
    (0..t)
        .map(|j| TaggedShare {
            id_share: derive_share_id(&record.id_c, j as u32 + 1),
            element: j,
            value: record.bits & element_bit(j, t) != 0,
        })
        .collect()
}

pub fn write_univariate_csv(path: &Path, shares: &[TaggedShare]) -> Result<(), BallotError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["id_share", "element_type", "value"])?;
    for s in shares {
        let tag = format!("e{}", s.element + 1);
        w.write_record([s.id_share.0.to_hex().as_str(), tag.as_str(), if s.value { "1" } else { "0" }])?;
    }
    w.flush()?;
    Ok(())
}

/// All `(2k+1)`-bit masks with exactly `k+1` bits set.
#[derive(Clone, Debug)]
pub struct PatternTable {
    k: usize,
    patterns: Vec<u32>,
}

impl PatternTable {
    pub fn new(k: usize) -> Self {
        assert!(k <= 15, "at most 31 shares per ballot");
        let n = 2 * k + 1;
        let patterns = (0u32..1 << n).filter(|m| m.count_ones() as usize == k + 1).collect();
        Self { k, patterns }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        self.patterns[rng.gen_range(0..self.patterns.len())]
    }

    /// Share rows of one ballot for a `t`-element record, appended to `out`.
    pub fn ballot_rows<R: Rng + ?Sized>(&self, bits: u64, t: usize, rng: &mut R, out: &mut Vec<u64>) {
        let n = 2 * self.k + 1;
        let start = out.len();
        out.resize(start + n, 0);
        let shares = &mut out[start..];
        for j in 0..t {
            let bit = element_bit(j, t);
            let value = bits & bit != 0;
            let carriers = self.sample(rng);
            for (s, row) in shares.iter_mut().enumerate() {
                if (carriers >> s & 1 == 1) == value {
                    *row |= bit;
                }
            }
        }
    }
}

/// Share rows (without identifiers) for every record, in record order. This
/// is what statistics are computed from; identifiers only matter to users.
pub fn generate_share_rows<R: Rng + ?Sized>(ds: &Dataset, k: usize, rng: &mut R) -> Dataset {
    let table = PatternTable::new(k);
    let mut rows = Vec::with_capacity(ds.len() * (2 * k + 1));
    for &r in ds.rows() {
        table.ballot_rows(r, ds.t(), rng, &mut rows);
    }
    Dataset::new(ds.t(), rows).expect("same width as the source")
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Share {
    pub id_share: ShareId,
    pub bits: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ballot {
    pub k: usize,
    pub shares: Vec<Share>,
}

/// Builds one ballot; share `i` (0-based) is addressed by `Hash(id_c ‖ i+1)`.
pub fn generate_ballot<R: Rng + ?Sized>(record: &Record, t: usize, k: usize, rng: &mut R) -> Ballot {
    let mut rows = Vec::new();
    PatternTable::new(k).ballot_rows(record.bits, t, rng, &mut rows);
    let shares = rows
        .into_iter()
        .enumerate()
        .map(|(i, bits)| Share { id_share: derive_share_id(&record.id_c, i as u32 + 1), bits })
        .collect();
    Ballot { k, shares }
}

/// Per-element validity and the majority reconstruction of a ballot.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BallotCheck {
    pub valid: bool,
    /// Elements whose majority value does not appear exactly `k+1` times.
    pub invalid_elements: u64,
    pub reconstructed: u64,
}

pub fn is_valid_ballot(rows: &[u64], t: usize, k: usize) -> Result<BallotCheck, BallotError> {
    let n = 2 * k + 1;
    if rows.len() != n {
        return Err(BallotError::ShareCount { expected: n, actual: rows.len() });
    }
    let (mut invalid, mut rec) = (0u64, 0u64);
    for j in 0..t {
        let bit = element_bit(j, t);
        let ones = rows.iter().filter(|&&r| r & bit != 0).count();
        if ones > k {
            rec |= bit;
        }
        if ones != k + 1 && ones != k {
            invalid |= bit;
        }
    }
    Ok(BallotCheck { valid: invalid == 0, invalid_elements: invalid, reconstructed: rec })
}

/// The published share dataset D_priv.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrivDataset {
    pub k: usize,
    pub t: usize,
    pub shares: Vec<Share>,
}

/// Parameters published alongside D_priv. The seed stays private; its
/// SHA-256 is committed so a later dispute can reveal it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemeManifest {
    pub k: usize,
    pub t: usize,
    pub r: usize,
    pub seed_commitment: Digest,
}

impl SchemeManifest {
    pub fn new(k: usize, t: usize, r: usize, seed: &[u8; 32]) -> Self {
        Self { k, t, r, seed_commitment: Digest::sha256(seed) }
    }
}

/// Generates every record's ballot and shuffles all shares together.
/// Output is a pure function of `(d, k, seed)`.
pub fn build_priv_dataset(d: &RecordSet, k: usize, seed: [u8; 32]) -> Result<PrivDataset, BallotError> {
    if d.records.is_empty() {
        return Err(BallotError::EmptyDataset);
    }
    let mut rng = ChaCha20Rng::from_seed(seed);
    let table = PatternTable::new(k);
    let n = 2 * k + 1;
    let mut rows = Vec::with_capacity(n);
    let mut shares = Vec::with_capacity(d.records.len() * n);
    for r in &d.records {
        rows.clear();
        table.ballot_rows(r.bits, d.t, &mut rng, &mut rows);
        shares.extend(
            rows.iter()
                .enumerate()
                .map(|(i, &bits)| Share { id_share: derive_share_id(&r.id_c, i as u32 + 1), bits }),
        );
    }
    shares.shuffle(&mut rng);
    Ok(PrivDataset { k, t: d.t, shares })
}

impl PrivDataset {
    pub fn r(&self) -> usize {
        self.shares.len() / (2 * self.k + 1)
    }

    pub fn rows(&self) -> Dataset {
        Dataset::new(self.t, self.shares.iter().map(|s| s.bits).collect()).expect("width checked on load")
    }

    /// Digest committing to the exact share list, in order.
    pub fn digest(&self) -> Digest {
        use sha2::{Digest as _, Sha256};
        let mut h = Sha256::new();
        h.update((self.k as u64).to_be_bytes());
        h.update((self.t as u64).to_be_bytes());
        for s in &self.shares {
            h.update(s.id_share.0 .0);
            h.update(s.bits.to_be_bytes());
        }
        Digest(h.finalize().into())
    }

    /// Writes `id_share,v1,…,vt`.
    pub fn write_csv(&self, path: &Path) -> Result<(), BallotError> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(std::iter::once("id_share".to_string()).chain(element_headers(self.t, "v")))?;
        for s in &self.shares {
            w.write_record(std::iter::once(s.id_share.0.to_hex()).chain(bits_to_fields(s.bits, self.t)))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a file written by [`PrivDataset::write_csv`]; `k` comes from the
    /// accompanying manifest.
    pub fn read_csv(path: &Path, k: usize) -> Result<Self, BallotError> {
        let mut rdr = csv::Reader::from_path(path)?;
        let t = rdr.headers()?.len().saturating_sub(1);
        if t == 0 || t > MAX_ELEMENTS {
            return Err(BallotError::BadWidth(t));
        }
        let mut shares = Vec::new();
        for row in rdr.records() {
            let row = row?;
            let id = Digest::from_hex(&row[0]).map_err(|_| BallotError::Format(format!("bad id_share {:?}", &row[0])))?;
            shares.push(Share { id_share: ShareId(id), bits: parse_bits(row.iter().skip(1))? });
        }
        Ok(Self { k, t, shares })
    }
}

/// Checks that a user's `2k+1` shares are all present, form a valid ballot
/// and reconstruct the user's record.
pub fn verify_own_shares(id_c: &CommonId, record_bits: u64, dpriv: &PrivDataset) -> Result<(), BallotError> {
    let n = 2 * dpriv.k + 1;
    let wanted: HashMap<ShareId, usize> = (0..n).map(|i| (derive_share_id(id_c, i as u32 + 1), i)).collect();
    let mut rows: Vec<Option<u64>> = vec![None; n];
    for s in &dpriv.shares {
        if let Some(&i) = wanted.get(&s.id_share) {
            if rows[i].replace(s.bits).is_some() {
                return Err(BallotError::SharesTampered(format!("share {} appears twice", i + 1)));
            }
        }
    }
    let found = rows.iter().flatten().count();
    if found < n {
        return Err(BallotError::SharesMissing { expected: n, found });
    }
    let rows: Vec<u64> = rows.into_iter().flatten().collect();
    let check = is_valid_ballot(&rows, dpriv.t, dpriv.k)?;
    if !check.valid {
        return Err(BallotError::SharesTampered("ballot is not valid".into()));
    }
    if check.reconstructed != record_bits {
        return Err(BallotError::SharesTampered("ballot does not reconstruct the record".into()));
    }
    Ok(())
}

/// Outcome of comparing observed share bitstrings with the counts expected
/// from a recovered occurrence vector.
#[derive(Clone, Debug, PartialEq)]
pub struct DistributionCheck {
    pub accepted: bool,
    /// Largest `|observed − expected|` over all bitstrings, as a fraction of
    /// the share count.
    pub max_deviation: f64,
}

/// Compares the bitstring counts of `shares` against `M · recovered`.
/// An honest D_priv recovered without clamping matches exactly; mass clamped
/// away by recovery (shares no honest ballot could produce) shows up here.
pub fn check_share_distribution(
    shares: &Dataset,
    k: usize,
    recovered: &[f64],
    tolerance: f64,
) -> Result<DistributionCheck, BallotError> {
    let m = ExpectationMatrix::new(k, shares.t())?;
    let expected = m.apply(recovered)?;
    let observed = occurrence_vector(shares)?;
    let total = shares.len().max(1) as f64;
    let max_deviation = observed
        .iter()
        .zip(&expected)
        .map(|(&o, &e)| (o as f64 - e).abs() / total)
        .fold(0.0, f64::max);
    Ok(DistributionCheck { accepted: max_deviation <= tolerance, max_deviation })
}

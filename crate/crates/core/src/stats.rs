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

//! Support and confidence over binary datasets, and their recovery from a
//! MultiBallot share dataset.
//!
//! Rows are bitmasks: element `j` of a `t`-element row is bit `t - 1 - j`, so
//! the row read as a binary number is its bitstring index and element 0 is
//! the most significant bit.
//!
//! Every share is generated element-wise independently, so the expectation
//! matrix factors as `M = (2k+1) · F ⊗ … ⊗ F` with
//! `F = [[p, q], [q, p]]`, `p = (k+1)/(2k+1)`, `q = k/(2k+1)`. Products and
//! solves run one factor at a time, and marginals over a subset of elements
//! obey the same law with a smaller `t`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Widest row supported.
pub const MAX_ELEMENTS: usize = 64;
/// Widest row for which a full occurrence vector is materialised.
pub const MAX_VECTOR_ELEMENTS: usize = 20;
/// Recovery refuses matrices with a larger 2-norm condition number.
pub const CONDITION_LIMIT: f64 = 1e12;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("UNDEFINED_CONFIDENCE: antecedent never occurs")]
    UndefinedConfidence,
    #[error("percent error undefined for a reported value of 0")]
    UndefinedPercentError,
    #[error("{t} elements exceeds the limit of {max}")]
    TooManyElements { t: usize, max: usize },
    #[error("element {element} out of range for {t} elements")]
    ElementOutOfRange { element: usize, t: usize },
    #[error("element set is empty")]
    EmptyElementSet,
    #[error("row {row} has bits outside the {t}-element width")]
    RowTooWide { row: usize, t: usize },
    #[error("expected a vector of length {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("SINGULAR_MATRIX: condition number {condition:e} exceeds the limit")]
    SingularMatrix { condition: f64 },
}

/// Mask of element `j` in a `t`-element row.
pub fn element_bit(j: usize, t: usize) -> u64 {
    1u64 << (t - 1 - j)
}

/// Row from per-element booleans, element 0 first.
pub fn row_from_bools(values: &[bool]) -> u64 {
    values.iter().fold(0, |acc, &b| (acc << 1) | b as u64)
}

pub fn row_to_bools(row: u64, t: usize) -> Vec<bool> {
    (0..t).map(|j| row & element_bit(j, t) != 0).collect()
}

/// A non-empty set of element indices, kept sorted.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct ElementSet(Vec<usize>);

impl ElementSet {
    pub fn new(mut elements: Vec<usize>) -> Result<Self, StatsError> {
        elements.sort_unstable();
        elements.dedup();
        if elements.is_empty() {
            return Err(StatsError::EmptyElementSet);
        }
        Ok(Self(elements))
    }

    pub fn elements(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn union(&self, other: &Self) -> Self {
        Self::new(self.0.iter().chain(&other.0).copied().collect()).unwrap()
    }

    pub fn check(&self, t: usize) -> Result<(), StatsError> {
        match self.0.last() {
            Some(&e) if e >= t => Err(StatsError::ElementOutOfRange { element: e, t }),
            _ => Ok(()),
        }
    }

    pub fn mask(&self, t: usize) -> Result<u64, StatsError> {
        self.check(t)?;
        Ok(self.0.iter().fold(0, |m, &j| m | element_bit(j, t)))
    }
}

impl TryFrom<Vec<usize>> for ElementSet {
    type Error = StatsError;
    fn try_from(v: Vec<usize>) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<ElementSet> for Vec<usize> {
    fn from(s: ElementSet) -> Self {
        s.0
    }
}

impl std::fmt::Display for ElementSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let names: Vec<_> = self.0.iter().map(|j| format!("e{}", j + 1)).collect();
        write!(f, "{{{}}}", names.join(","))
    }
}

/// Binary dataset of `t`-element rows.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dataset {
    t: usize,
    rows: Vec<u64>,
}

impl Dataset {
    pub fn new(t: usize, rows: Vec<u64>) -> Result<Self, StatsError> {
        if t == 0 || t > MAX_ELEMENTS {
            return Err(StatsError::TooManyElements { t, max: MAX_ELEMENTS });
        }
        if t < 64 {
            if let Some(row) = rows.iter().position(|&r| r >> t != 0) {
                return Err(StatsError::RowTooWide { row, t });
            }
        }
        Ok(Self { t, rows })
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn rows(&self) -> &[u64] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Rows containing every element of `mask`.
    pub fn count(&self, mask: u64) -> usize {
        self.rows.iter().filter(|&&r| r & mask == mask).count()
    }

    pub fn support(&self, set: &ElementSet) -> Result<f64, StatsError> {
        if self.rows.is_empty() {
            return Err(StatsError::EmptyDataset);
        }
        Ok(self.count(set.mask(self.t)?) as f64 / self.rows.len() as f64)
    }

    /// Confidence of the rule `antecedent ⇒ consequent`.
    pub fn confidence(&self, antecedent: &ElementSet, consequent: &ElementSet) -> Result<f64, StatsError> {
        let base = self.support(antecedent)?;
        if base == 0.0 {
            return Err(StatsError::UndefinedConfidence);
        }
        Ok(self.support(&antecedent.union(consequent))? / base)
    }

    /// Keeps only `set`'s elements, in order, as a `|set|`-element dataset.
    pub fn project(&self, set: &ElementSet) -> Result<Dataset, StatsError> {
        set.check(self.t)?;
        let s = set.len();
        let rows = self
            .rows
            .iter()
            .map(|&r| {
                set.elements()
                    .iter()
                    .enumerate()
                    .fold(0, |acc, (i, &j)| acc | (((r >> (self.t - 1 - j)) & 1) << (s - 1 - i)))
            })
            .collect();
        Dataset::new(s, rows)
    }
}

/// Counts of each of the `2^t` bitstrings, indexed by bitstring value.
pub fn occurrence_vector(ds: &Dataset) -> Result<Vec<u64>, StatsError> {
    if ds.t > MAX_VECTOR_ELEMENTS {
        return Err(StatsError::TooManyElements { t: ds.t, max: MAX_VECTOR_ELEMENTS });
    }
    let mut o = vec![0u64; 1 << ds.t];
    for &r in &ds.rows {
        o[r as usize] += 1;
    }
    Ok(o)
}

/// Expected share counts per original bitstring under a `2k+1`-share scheme.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExpectationMatrix {
    k: usize,
    t: usize,
}

impl ExpectationMatrix {
    pub fn new(k: usize, t: usize) -> Result<Self, StatsError> {
        if t == 0 || t > MAX_VECTOR_ELEMENTS {
            return Err(StatsError::TooManyElements { t, max: MAX_VECTOR_ELEMENTS });
        }
        Ok(Self { k, t })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn dim(&self) -> usize {
        1 << self.t
    }

    fn shares(&self) -> f64 {
        (2 * self.k + 1) as f64
    }

    fn pq(&self) -> (f64, f64) {
        let n = self.shares();
        ((self.k + 1) as f64 / n, self.k as f64 / n)
    }

    /// `M[observed][original]`.
    pub fn entry(&self, observed: usize, original: usize) -> f64 {
        let (p, q) = self.pq();
        let d = (observed ^ original).count_ones() as i32;
        self.shares() * p.powi(self.t as i32 - d) * q.powi(d)
    }

    /// 2-norm condition number, `(2k+1)^t`: each factor has singular values
    /// 1 and `1/(2k+1)`.
    pub fn condition(&self) -> f64 {
        self.shares().powi(self.t as i32)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.dim()).map(|i| (0..self.dim()).map(|j| self.entry(i, j)).collect()).collect()
    }

    fn check_len(&self, x: &[f64]) -> Result<(), StatsError> {
        if x.len() != self.dim() {
            return Err(StatsError::DimensionMismatch { expected: self.dim(), actual: x.len() });
        }
        Ok(())
    }

    /// Applies `[[a, b], [b, a]]` along every bit position.
    fn apply_factor(&self, x: &mut [f64], a: f64, b: f64) {
        let mut stride = 1;
        while stride < x.len() {
            for block in x.chunks_mut(2 * stride) {
                let (lo, hi) = block.split_at_mut(stride);
                for (u, v) in lo.iter_mut().zip(hi) {
                    let (x0, x1) = (*u, *v);
                    *u = a * x0 + b * x1;
                    *v = b * x0 + a * x1;
                }
            }
            stride *= 2;
        }
    }

    /// `M · x`.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>, StatsError> {
        self.check_len(x)?;
        let (p, q) = self.pq();
        let mut y = x.to_vec();
        self.apply_factor(&mut y, p, q);
        let n = self.shares();
        y.iter_mut().for_each(|v| *v *= n);
        Ok(y)
    }

    /// Solves `M · x = b`. Each factor's inverse is `[[k+1, -k], [-k, k+1]]`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, StatsError> {
        self.check_len(b)?;
        let condition = self.condition();
        if !(condition <= CONDITION_LIMIT) {
            return Err(StatsError::SingularMatrix { condition });
        }
        let mut x = b.to_vec();
        self.apply_factor(&mut x, (self.k + 1) as f64, -(self.k as f64));
        let n = self.shares();
        x.iter_mut().for_each(|v| *v /= n);
        Ok(x)
    }
}

/// Dense LU solve with partial pivoting; used to cross-check the factored
/// solver on small matrices.
pub fn solve_dense(a: &[Vec<f64>], b: &[f64]) -> Result<Vec<f64>, StatsError> {
    let n = b.len();
    if a.len() != n || a.iter().any(|row| row.len() != n) {
        return Err(StatsError::DimensionMismatch { expected: n, actual: a.len() });
    }
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut x = b.to_vec();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs())).unwrap();
        if m[pivot][col].abs() < 1e-300 {
            return Err(StatsError::SingularMatrix { condition: f64::INFINITY });
        }
        m.swap(col, pivot);
        x.swap(col, pivot);
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            if f != 0.0 {
                for c in col..n {
                    m[row][c] -= f * m[col][c];
                }
                x[row] -= f * x[col];
            }
        }
    }
    for col in (0..n).rev() {
        let s: f64 = (col + 1..n).map(|c| m[col][c] * x[c]).sum();
        x[col] = (x[col] - s) / m[col][col];
    }
    Ok(x)
}

/// Estimated original occurrence vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Recovery {
    /// Solution with negative entries set to zero.
    pub estimate: Vec<f64>,
    /// Unclamped solution; sums to the record count.
    pub raw: Vec<f64>,
    /// Total mass removed by clamping.
    pub clamped_mass: f64,
}

pub fn recover_occurrences(o_priv: &[f64], m: &ExpectationMatrix) -> Result<Recovery, StatsError> {
    let raw = m.solve(o_priv)?;
    let clamped_mass = raw.iter().filter(|v| **v < 0.0).map(|v| -v).sum();
    let estimate = raw.iter().map(|v| v.max(0.0)).collect();
    Ok(Recovery { estimate, raw, clamped_mass })
}

/// Share dataset plus the scheme parameter needed to read it.
#[derive(Clone, Copy, Debug)]
pub struct ShareView<'a> {
    pub shares: &'a Dataset,
    pub k: usize,
}

impl ShareView<'_> {
    /// Recovered occurrence vector over `set`'s elements.
    pub fn recover_marginal(&self, set: &ElementSet) -> Result<Recovery, StatsError> {
        let projected = self.shares.project(set)?;
        let o: Vec<f64> = occurrence_vector(&projected)?.into_iter().map(|c| c as f64).collect();
        recover_occurrences(&o, &ExpectationMatrix::new(self.k, set.len())?)
    }

    /// Recovered support of `set`: the all-ones cell of its marginal,
    /// weighted against the clamped total.
    pub fn support(&self, set: &ElementSet) -> Result<f64, StatsError> {
        if self.shares.is_empty() {
            return Err(StatsError::EmptyDataset);
        }
        let rec = self.recover_marginal(set)?;
        let total: f64 = rec.estimate.iter().sum();
        Ok(if total > 0.0 { rec.estimate[rec.estimate.len() - 1] / total } else { 0.0 })
    }

    pub fn confidence(&self, antecedent: &ElementSet, consequent: &ElementSet) -> Result<f64, StatsError> {
        let base = self.support(antecedent)?;
        if base == 0.0 {
            return Err(StatsError::UndefinedConfidence);
        }
        Ok(self.support(&antecedent.union(consequent))? / base)
    }
}

/// A published measure: support of `elements`, and optionally the confidence
/// of `antecedent ⇒ elements \ antecedent`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ItemsetStat {
    pub elements: ElementSet,
    pub support: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub antecedent: Option<ElementSet>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
}

/// Query for [`recovered_measures`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MeasureQuery {
    pub elements: ElementSet,
    pub antecedent: Option<ElementSet>,
}

pub fn recovered_measures(view: ShareView<'_>, queries: &[MeasureQuery]) -> Result<Vec<ItemsetStat>, StatsError> {
    queries
        .iter()
        .map(|q| {
            let support = view.support(&q.elements)?;
            let confidence = match &q.antecedent {
                Some(a) => Some(view.confidence(a, &q.elements)?),
                None => None,
            };
            Ok(ItemsetStat { elements: q.elements.clone(), support, antecedent: q.antecedent.clone(), confidence })
        })
        .collect()
}

/// Direct measures on the original dataset, same shape as [`recovered_measures`].
pub fn direct_measures(ds: &Dataset, queries: &[MeasureQuery]) -> Result<Vec<ItemsetStat>, StatsError> {
    queries
        .iter()
        .map(|q| {
            let support = ds.support(&q.elements)?;
            let confidence = match &q.antecedent {
                Some(a) => Some(ds.confidence(a, &q.elements)?),
                None => None,
            };
            Ok(ItemsetStat { elements: q.elements.clone(), support, antecedent: q.antecedent.clone(), confidence })
        })
        .collect()
}

/// Level-wise Apriori: every itemset with support at least `min_support`.
pub fn mine_frequent_itemsets(ds: &Dataset, min_support: f64) -> Result<Vec<(ElementSet, f64)>, StatsError> {
    if ds.is_empty() {
        return Err(StatsError::EmptyDataset);
    }
    let t = ds.t;
    let threshold = min_support * ds.len() as f64;
    let frequent = |set: &[usize]| {
        let mask = set.iter().fold(0, |m, &j| m | element_bit(j, t));
        let c = ds.count(mask);
        (c as f64 >= threshold).then_some(c)
    };
    let mut out = Vec::new();
    let mut level: Vec<Vec<usize>> = Vec::new();
    for j in 0..t {
        if let Some(c) = frequent(&[j]) {
            out.push((vec![j], c));
            level.push(vec![j]);
        }
    }
    while !level.is_empty() {
        let known: std::collections::HashSet<&Vec<usize>> = level.iter().collect();
        let mut next = Vec::new();
        for (i, a) in level.iter().enumerate() {
            for b in &level[i + 1..] {
                if a[..a.len() - 1] != b[..b.len() - 1] {
                    continue;
                }
                let mut cand = a.clone();
                cand.push(*b.last().unwrap());
                // Every subset one element smaller must itself be frequent.
                let pruned = (0..cand.len()).any(|drop| {
                    let sub: Vec<usize> = cand.iter().enumerate().filter(|(i, _)| *i != drop).map(|(_, &e)| e).collect();
                    !known.contains(&sub)
                });
                if pruned {
                    continue;
                }
                if let Some(c) = frequent(&cand) {
                    out.push((cand.clone(), c));
                    next.push(cand);
                }
            }
        }
        level = next;
    }
    let n = ds.len() as f64;
    Ok(out.into_iter().map(|(s, c)| (ElementSet(s), c as f64 / n)).collect())
}

pub fn percent_error(reported: f64, recovered: f64) -> Result<f64, StatsError> {
    if reported == 0.0 {
        return Err(StatsError::UndefinedPercentError);
    }
    Ok(100.0 * (recovered - reported).abs() / reported.abs())
}

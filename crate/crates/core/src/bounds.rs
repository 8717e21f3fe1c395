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

//! Reconstruction bounds for MultiBallot share datasets.
//!
//! An adversary who knows `a` of a user's `2k+1` shares tries to pick the
//! remaining `2k+1-a` out of the published dataset. The counts below are
//! exact; only the final success probability is evaluated in floating point,
//! in log space so that probabilities far below `f64::EPSILON` survive.

use std::io::Write;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;
use thiserror::Error;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum BoundsError {
    #[error("form index {i} out of range 1..={max}")]
    FormIndex { i: usize, max: usize },
    #[error("known shares a={a} must be in 1..={max}")]
    KnownShares { a: usize, max: usize },
    #[error("need at least one user")]
    NoUsers,
    #[error("need at least one element")]
    NoElements,
    #[error("threshold {0} must lie in (0, 1)")]
    Threshold(f64),
}

fn factorial(n: usize) -> BigUint {
    (1..=n as u64).fold(BigUint::one(), |acc, x| acc * x)
}

pub fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    (0..k).fold(BigUint::one(), |acc, i| acc * (n - i) / (i + 1))
}

/// Orderings of a one-element ballot with `i` shares marking only the
/// value, `i-1` marking only the complement, and `k+1-i` each marking both
/// or neither: `(2k+1)! / (i! (i-1)! (k+1-i)!²)`.
pub fn ballot_form_count(k: usize, i: usize) -> Result<BigUint, BoundsError> {
    if i == 0 || i > k + 1 {
        return Err(BoundsError::FormIndex { i, max: k + 1 });
    }
    let rest = factorial(k + 1 - i);
    Ok(factorial(2 * k + 1) / (factorial(i) * factorial(i - 1) * &rest * &rest))
}

fn forms(k: usize) -> impl Iterator<Item = (usize, BigUint)> {
    (1..=k + 1).map(move |i| (i, ballot_form_count(k, i).expect("i in range")))
}

/// Number of valid one-element ballots, counting both record values.
pub fn valid_ballot_total(k: usize) -> BigUint {
    forms(k).map(|(_, c)| c).sum::<BigUint>() * 2u32
}

/// `2 · C(2k+1, k+1) · C(2k+1, k)`.
pub fn valid_ballot_total_closed_form(k: usize) -> BigUint {
    let n = 2 * k as u64 + 1;
    binomial(n, k as u64 + 1) * binomial(n, k as u64) * 2u32
}

/// How often each share form occurs across all valid ballots.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShareDistribution {
    pub v: BigUint,
    /// Occurrences of one single-mark form (value only, or complement only).
    pub v_single: BigUint,
    /// Occurrences of one double form (both marks, or neither).
    pub v_double: BigUint,
    pub p_single: BigRational,
    pub p_double: BigRational,
}

fn ratio(n: &BigUint, d: &BigUint) -> BigRational {
    BigRational::new(BigInt::from(n.clone()), BigInt::from(d.clone()))
}

pub fn share_distribution(k: usize) -> ShareDistribution {
    let v = valid_ballot_total(k);
    let v_single: BigUint = forms(k).map(|(i, c)| c * (2 * i - 1)).sum();
    let v_double: BigUint = forms(k).map(|(i, c)| c * (2 * (k + 1 - i))).sum();
    let all = &v * (2 * k + 1);
    ShareDistribution { p_single: ratio(&v_single, &all), p_double: ratio(&v_double, &all), v, v_single, v_double }
}

/// Probability that `2k+1` shares drawn independently from the share
/// distribution form a valid ballot, exactly.
pub fn valid_combo_probability_exact(k: usize) -> BigRational {
    let d = share_distribution(k);
    let two = BigRational::from_integer(2.into());
    forms(k)
        .map(|(i, c)| {
            BigRational::from_integer(BigInt::from(c))
                * num_traits::pow(d.p_single.clone(), 2 * i - 1)
                * num_traits::pow(d.p_double.clone(), 2 * (k + 1 - i))
        })
        .fold(BigRational::zero(), |acc, x| acc + x)
        * two
}

pub fn valid_combo_probability(k: usize) -> f64 {
    valid_combo_probability_exact(k).to_f64().expect("probability is finite")
}

fn check_params(k: usize, r: u64, a: usize, e: u32) -> Result<(), BoundsError> {
    if a == 0 || a > 2 * k {
        return Err(BoundsError::KnownShares { a, max: 2 * k });
    }
    if r == 0 {
        return Err(BoundsError::NoUsers);
    }
    if e == 0 {
        return Err(BoundsError::NoElements);
    }
    Ok(())
}

/// Candidate completions: `C((2k+1)r - a, 2k+1 - a)`.
pub fn candidate_completions(k: usize, r: u64, a: usize) -> BigUint {
    let n = 2 * k as u64 + 1;
    binomial(n * r - a as u64, n - a as u64)
}

fn ln_big(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits <= 1000 {
        return x.to_f64().unwrap().ln();
    }
    let shift = bits - 64;
    (x >> shift).to_f64().unwrap().ln() + shift as f64 * std::f64::consts::LN_2
}

/// `S = (1 - P^e)^(N-1)`: the chance that exactly one completion forms a
/// valid ballot, so the adversary's reconstruction is unique.
pub fn reconstruction_success(k: usize, r: u64, a: usize, e: u32) -> Result<f64, BoundsError> {
    check_params(k, r, a, e)?;
    let n_minus_1 = candidate_completions(k, r, a) - 1u32;
    if n_minus_1.is_zero() {
        return Ok(1.0);
    }
    let pe = (e as f64 * valid_combo_probability(k).ln()).exp();
    // ln S = -(N-1)·(-ln(1-P^e)), with N-1 itself kept in log form.
    let ln_s = -(ln_big(&n_minus_1) + pe.ln_1p_neg().ln()).exp();
    Ok(ln_s.exp())
}

/// Same formula evaluated directly in `f64`, rounding `1 - P^e` before
/// exponentiating. Loses all precision once `P^e` nears machine epsilon.
pub fn reconstruction_success_direct_f64(k: usize, r: u64, a: usize, e: u32) -> Result<f64, BoundsError> {
    check_params(k, r, a, e)?;
    let n = candidate_completions(k, r, a).to_f64().unwrap_or(f64::INFINITY);
    Ok((1.0 - valid_combo_probability(k).powi(e as i32)).powf(n - 1.0))
}

trait Ln1pNeg {
    /// `-ln(1 - self)` for `0 < self < 1`, accurate for tiny `self`.
    fn ln_1p_neg(self) -> f64;
}

impl Ln1pNeg for f64 {
    fn ln_1p_neg(self) -> f64 {
        -(-self).ln_1p()
    }
}

/// Largest element count keeping reconstruction below a threshold.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SafeBound {
    pub e_max: u32,
    /// `S(e_max)`; `None` when even one element is unsafe.
    pub success: Option<f64>,
}

/// Finds the largest `e` with `S(e) < threshold` by doubling then bisection.
/// `S` grows with `e`: fewer random combinations stay valid as ballots get
/// longer, so a unique completion becomes likelier.
pub fn max_safe_elements(k: usize, r: u64, a: usize, threshold: f64) -> Result<SafeBound, BoundsError> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(BoundsError::Threshold(threshold));
    }
    let s = |e| reconstruction_success(k, r, a, e);
    if s(1)? >= threshold {
        tracing::info!(k, r, a, threshold, "no element count is safe");
        return Ok(SafeBound { e_max: 0, success: None });
    }
    let (mut lo, mut hi) = (1u32, 2u32);
    while s(hi)? < threshold {
        lo = hi;
        hi = hi.checked_mul(2).expect("S reaches 1 long before u32::MAX");
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if s(mid)? < threshold {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(SafeBound { e_max: lo, success: Some(s(lo)?) })
}

/// One cell of the safe-element table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Table2Cell {
    pub k: usize,
    pub known: usize,
    pub users: u64,
    pub e_max: u32,
    pub success: f64,
    pub success_direct_f64: f64,
}

pub const TABLE2_SCHEMES: [(usize, usize); 4] = [(1, 1), (1, 2), (2, 1), (2, 4)];
pub const TABLE2_USERS: [u64; 4] = [10, 100, 1000, 10_000];
pub const TABLE2_THRESHOLD: f64 = 1e-4;

/// Safe element counts for 3- and 5-share schemes across population sizes.
pub fn table2() -> Result<Vec<Table2Cell>, BoundsError> {
    let mut out = Vec::new();
    for (k, known) in TABLE2_SCHEMES {
        for users in TABLE2_USERS {
            let b = max_safe_elements(k, users, known, TABLE2_THRESHOLD)?;
            out.push(Table2Cell {
                k,
                known,
                users,
                e_max: b.e_max,
                success: b.success.unwrap_or(f64::NAN),
                success_direct_f64: reconstruction_success_direct_f64(k, users, known, b.e_max.max(1))?,
            });
        }
    }
    Ok(out)
}

pub fn write_table2_csv<W: Write>(cells: &[Table2Cell], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["scheme", "k", "known", "users", "e_max", "success", "success_direct_f64"])?;
    for c in cells {
        w.write_record([
            format!("{}Ballot ({})", 2 * c.k + 1, c.known),
            c.k.to_string(),
            c.known.to_string(),
            c.users.to_string(),
            c.e_max.to_string(),
            format!("{:.3e}", c.success),
            format!("{:.3e}", c.success_direct_f64),
        ])?;
    }
    w.flush()?;
    Ok(())
}

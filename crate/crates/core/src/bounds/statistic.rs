//! Minimum-type goodness-of-fit statistics `S = min_i s_i(U_(i))`.
//!
//! Each statistic is determined by its score functions `s_i`. Calibrating it
//! means finding the largest `r` with `P(S >= r) >= 1 - delta`; inverting the
//! scores at that `r` yields one lower bound per order statistic.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{SampleSet, StepCdfLowerBound};
use crate::crossing::{noncrossing_prob, BoundaryVector};
use crate::error::{check_delta, Error, Result};
use crate::special::{reg_inc_beta_inv, BetaParams};

const BISECTION_ITERS: usize = 80;

/// Score functions of a minimum-type statistic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Statistic {
    /// One-sided Kolmogorov-Smirnov: `s_i(u) = u - i/n`.
    Ks,
    /// One-sided Berk-Jones: `s_i(u) = I_u(i, n - i + 1)`.
    BerkJones,
    /// Berk-Jones restricted to order statistics `k..=n`.
    TruncatedOneSided { k: usize },
    /// Berk-Jones restricted to order statistics `k..=l`.
    TruncatedTwoSided { k: usize, l: usize },
}

impl Statistic {
    /// Closed interval containing every value the statistic can take.
    pub fn value_range(&self) -> (f64, f64) {
        match self {
            Statistic::Ks => (-1.0, 1.0),
            _ => (0.0, 1.0),
        }
    }

    /// Order-statistic indices whose score is not identically 1.
    fn included(&self, n: usize) -> (usize, usize) {
        match *self {
            Statistic::Ks | Statistic::BerkJones => (1, n),
            Statistic::TruncatedOneSided { k } => (k, n),
            Statistic::TruncatedTwoSided { k, l } => (k, l),
        }
    }
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Statistic::Ks => write!(f, "ks"),
            Statistic::BerkJones => write!(f, "bj"),
            Statistic::TruncatedOneSided { k } => write!(f, "bj[{k}..]"),
            Statistic::TruncatedTwoSided { k, l } => write!(f, "bj[{k}..={l}]"),
        }
    }
}

/// A statistic together with the sample size it is defined over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GofStatisticSpec {
    pub statistic: Statistic,
    pub n: usize,
}

impl GofStatisticSpec {
    pub fn new(statistic: Statistic, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("sample count must be at least 1"));
        }
        let ok = match statistic {
            Statistic::Ks | Statistic::BerkJones => true,
            Statistic::TruncatedOneSided { k } => (1..=n).contains(&k),
            Statistic::TruncatedTwoSided { k, l } => 1 <= k && k <= l && l <= n,
        };
        if !ok {
            return Err(Error::invalid(format!(
                "truncation indices of {statistic} must satisfy 1 <= k <= l <= n = {n}"
            )));
        }
        Ok(Self { statistic, n })
    }

    pub fn ks(n: usize) -> Result<Self> {
        Self::new(Statistic::Ks, n)
    }

    pub fn berk_jones(n: usize) -> Result<Self> {
        Self::new(Statistic::BerkJones, n)
    }
}

/// `b_i = s_i^{-1}(r)` for every order statistic, made nondecreasing.
pub fn boundary_from_statistic(spec: &GofStatisticSpec, r: f64) -> Result<BoundaryVector> {
    let (lo, hi) = spec.statistic.value_range();
    if !(lo..=hi).contains(&r) {
        return Err(Error::invalid(format!(
            "statistic value {r} outside [{lo}, {hi}] for {}",
            spec.statistic
        )));
    }
    let n = spec.n;
    let raw = match spec.statistic {
        Statistic::Ks => (1..=n).map(|i| r + i as f64 / n as f64).collect(),
        stat => {
            let (first, last) = stat.included(n);
            (1..=n)
                .map(|i| {
                    if (first..=last).contains(&i) {
                        reg_inc_beta_inv(r, BetaParams::order_statistic(i, n)?)
                    } else {
                        Ok(0.0)
                    }
                })
                .collect::<Result<Vec<_>>>()?
        }
    };
    BoundaryVector::monotonized(raw)
}

/// Largest `r` (to bisection precision) with `P(S >= r) >= 1 - delta`.
///
/// The returned value is always one that was verified feasible, so rounding
/// only ever makes the bound more conservative.
pub fn critical_value(spec: &GofStatisticSpec, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    let target = 1.0 - delta;
    let (mut lo, mut hi) = spec.statistic.value_range();
    for _ in 0..BISECTION_ITERS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if noncrossing_prob(&boundary_from_statistic(spec, mid)?) >= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Calibrated conservative-completion bound for one sample set.
pub fn cdf_lower_bound(
    samples: &SampleSet,
    spec: &GofStatisticSpec,
    delta: f64,
    x_plus: f64,
) -> Result<StepCdfLowerBound> {
    if spec.n != samples.len() {
        return Err(Error::invalid(format!(
            "statistic is for n={} but {} samples were given",
            spec.n,
            samples.len()
        )));
    }
    super::check_x_plus(x_plus, Some(samples.max()))?;
    let r = critical_value(spec, delta)?;
    let boundary = boundary_from_statistic(spec, r)?;
    StepCdfLowerBound::from_samples(samples, &boundary, x_plus)
}

/// Level certified at order statistic `idx` when `spec` is calibrated at `delta`.
fn calibrated_level(spec: &GofStatisticSpec, delta: f64, idx: usize) -> Result<f64> {
    let r = critical_value(spec, delta)?;
    Ok(boundary_from_statistic(spec, r)?.level(idx))
}

/// Smallest `k` in `lo..=hi` satisfying `pred`, assuming `pred` is monotone.
///
/// Bisects, then checks both neighbours of the answer; if either contradicts
/// monotonicity, falls back to a linear scan. `None` when `pred(hi)` fails.
fn first_satisfying(
    lo: usize,
    hi: usize,
    mut pred: impl FnMut(usize) -> Result<bool>,
) -> Result<Option<usize>> {
    let mut memo: HashMap<usize, bool> = HashMap::new();
    let mut eval = |k: usize, memo: &mut HashMap<usize, bool>| -> Result<bool> {
        if let Some(&v) = memo.get(&k) {
            return Ok(v);
        }
        let v = pred(k)?;
        memo.insert(k, v);
        Ok(v)
    };

    if !eval(hi, &mut memo)? {
        return Ok(None);
    }
    let (mut a, mut b) = (lo, hi);
    while a < b {
        let mid = a + (b - a) / 2;
        if eval(mid, &mut memo)? {
            b = mid;
        } else {
            a = mid + 1;
        }
    }
    let below_ok = a == lo || !eval(a - 1, &mut memo)?;
    let above_ok = a == hi || eval(a + 1, &mut memo)?;
    if below_ok && above_ok {
        return Ok(Some(a));
    }
    for k in lo..=hi {
        if eval(k, &mut memo)? {
            return Ok(Some(k));
        }
    }
    Ok(None)
}

fn check_level(name: &str, beta: f64) -> Result<()> {
    if beta.is_finite() && beta > 0.0 && beta < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must lie in (0, 1), got {beta}")))
    }
}

/// `k* = min{k : s_k^{-1}(s_delta^k) >= beta_min}` for the one-sided
/// truncated Berk-Jones statistic.
pub fn truncation_index_one_sided(n: usize, delta: f64, beta_min: f64) -> Result<usize> {
    check_delta(delta)?;
    check_level("beta_min", beta_min)?;
    if n == 0 {
        return Err(Error::invalid("sample count must be at least 1"));
    }
    let found = first_satisfying(1, n, |k| {
        let spec = GofStatisticSpec::new(Statistic::TruncatedOneSided { k }, n)?;
        Ok(calibrated_level(&spec, delta, k)? >= beta_min)
    })?;
    found.ok_or_else(|| {
        Error::infeasible(format!(
            "quantile level {beta_min} cannot be certified with n={n} at delta={delta}: \
             even the last order statistic alone falls short"
        ))
    })
}

/// `(k*, l*)` for the two-sided truncated Berk-Jones statistic.
pub fn truncation_indices_two_sided(
    n: usize,
    delta: f64,
    beta_min: f64,
    beta_max: f64,
) -> Result<(usize, usize)> {
    check_level("beta_max", beta_max)?;
    if beta_min > beta_max {
        return Err(Error::invalid(format!(
            "beta_min = {beta_min} exceeds beta_max = {beta_max}"
        )));
    }
    let k = truncation_index_one_sided(n, delta, beta_min)?;
    let found = first_satisfying(k, n, |l| {
        let spec = GofStatisticSpec::new(Statistic::TruncatedTwoSided { k, l }, n)?;
        Ok(calibrated_level(&spec, delta, l)? >= beta_max)
    })?;
    let l = found.ok_or_else(|| {
        Error::infeasible(format!(
            "quantile level {beta_max} cannot be certified with n={n} at delta={delta} \
             given lower truncation k={k}"
        ))
    })?;
    Ok((k, l))
}

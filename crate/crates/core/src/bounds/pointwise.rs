//! Point-wise quantile baselines.
//!
//! Each method certifies `F(X_(k)) >= beta` for a single level `beta` by
//! choosing an order-statistic index `k`; a grid of levels is handled with a
//! Bonferroni split of `delta`.

use serde::{Deserialize, Serialize};

use super::{SampleSet, StepCdfLowerBound};
use crate::crossing::BoundaryVector;
use crate::error::{check_delta, Error, Result};
use crate::special::{reg_inc_beta, BetaParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointwiseMethod {
    Dkw,
    OrderStats,
}

impl PointwiseMethod {
    pub fn quantile_index(&self, n: usize, beta: f64, delta: f64) -> Result<usize> {
        match self {
            PointwiseMethod::Dkw => dkw_quantile_index(n, beta, delta),
            PointwiseMethod::OrderStats => order_stats_quantile_index(n, beta, delta),
        }
    }
}

/// Order-statistic index from the one-sided DKW inequality:
/// `k = ceil(n (beta + sqrt(ln(1/delta) / (2n))))`.
pub fn dkw_quantile_index(n: usize, beta: f64, delta: f64) -> Result<usize> {
    check_delta(delta)?;
    if n == 0 {
        return Err(Error::invalid("sample count must be at least 1"));
    }
    if !(0.0..1.0).contains(&beta) {
        return Err(Error::invalid(format!("beta must lie in [0, 1), got {beta}")));
    }
    if delta > 0.5 {
        return Err(Error::infeasible(format!(
            "DKW quantile bound requires delta <= 1/2, got {delta}"
        )));
    }
    let nf = n as f64;
    let eps = ((1.0 / delta).ln() / (2.0 * nf)).sqrt();
    if beta + eps > 1.0 {
        return Err(Error::infeasible(format!(
            "DKW quantile bound requires beta + sqrt(ln(1/delta)/(2n)) <= 1, \
             got {beta} + {eps:.6} > 1 (n={n}, delta={delta})"
        )));
    }
    let k = (nf * (beta + eps)).ceil() as usize;
    Ok(k.clamp(1, n))
}

/// Smallest `k` with `P(U_(k) < beta) = I_beta(k, n - k + 1) <= delta`.
pub fn order_stats_quantile_index(n: usize, beta: f64, delta: f64) -> Result<usize> {
    check_delta(delta)?;
    if n == 0 {
        return Err(Error::invalid("sample count must be at least 1"));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::invalid(format!("beta must lie in (0, 1), got {beta}")));
    }
    let tail = |k: usize| -> Result<f64> { reg_inc_beta(beta, BetaParams::order_statistic(k, n)?) };
    if tail(n)? > delta {
        return Err(Error::infeasible(format!(
            "no order statistic of n={n} bounds the {beta}-quantile at delta={delta}: \
             P(U_(n) < {beta}) = {:.6} > {delta}",
            tail(n)?
        )));
    }
    // I_beta(k, n - k + 1) is decreasing in k.
    let (mut lo, mut hi) = (1, n);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if tail(mid)? <= delta {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(lo)
}

fn check_grid(betas: &[f64]) -> Result<()> {
    if betas.is_empty() {
        return Err(Error::invalid("quantile grid is empty"));
    }
    if betas.iter().any(|b| !(0.0..1.0).contains(b)) {
        return Err(Error::invalid("grid levels must lie in [0, 1)"));
    }
    if betas.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid("grid levels must be sorted"));
    }
    Ok(())
}

/// Per-order-statistic boundary certified by a Bonferroni grid of point-wise
/// quantile bounds, together with the chosen index for each grid level.
pub fn pointwise_boundary(
    n: usize,
    method: PointwiseMethod,
    delta: f64,
    betas: &[f64],
) -> Result<(BoundaryVector, Vec<usize>)> {
    check_delta(delta)?;
    check_grid(betas)?;
    let per_point = delta / betas.len() as f64;
    let mut raw = vec![0.0; n];
    let mut indices = Vec::with_capacity(betas.len());
    for &beta in betas {
        let k = method.quantile_index(n, beta, per_point).map_err(|e| match e {
            Error::Infeasible(msg) => {
                Error::infeasible(format!("grid point beta={beta}: {msg}"))
            }
            other => other,
        })?;
        raw[k - 1] = f64::max(raw[k - 1], beta);
        indices.push(k);
    }
    Ok((BoundaryVector::monotonized(raw)?, indices))
}

/// Point-wise grid bound on one sample set.
pub fn pointwise_bound_grid(
    samples: &SampleSet,
    method: PointwiseMethod,
    delta: f64,
    betas: &[f64],
    x_plus: f64,
) -> Result<StepCdfLowerBound> {
    super::check_x_plus(x_plus, Some(samples.max()))?;
    let (boundary, _) = pointwise_boundary(samples.len(), method, delta, betas)?;
    StepCdfLowerBound::from_samples(samples, &boundary, x_plus)
}

/// Hoeffding upper confidence bound on the mean of losses in `[0, 1]`.
pub fn hoeffding_mean_ucb(samples: &SampleSet, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    if let Some(v) = samples.values().iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::invalid(format!(
            "Hoeffding bound needs losses in [0, 1], found {v}"
        )));
    }
    let n = samples.len() as f64;
    Ok(samples.mean() + ((1.0 / delta).ln() / (2.0 * n)).sqrt())
}

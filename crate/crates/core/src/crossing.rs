//! Exact one-sided non-crossing probabilities for uniform order statistics.
//!
//! For `U_(1) <= ... <= U_(n)` sorted i.i.d. uniforms and a nondecreasing
//! boundary `b`, computes `P(U_(i) >= b_i for all i)`. The event is
//! equivalent to `#{U < b_i} <= i - 1` for every `i`, which is tracked by a
//! dynamic program over the number of samples already below the boundary.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::ln_factorials;

/// Probabilities below this are dropped from the recursion. At most `n²`
/// terms are dropped, so the absolute error stays below `n² · 1e-25`.
const NEGLIGIBLE: f64 = 1e-25;

/// One lower bound per uniform order statistic, nondecreasing in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct BoundaryVector(Vec<f64>);

impl BoundaryVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::invalid(format!(
                "boundary entry {} is {v}, outside [0, 1]",
                i + 1
            )));
        }
        if let Some(i) = values.windows(2).position(|w| w[1] < w[0]) {
            return Err(Error::invalid(format!(
                "boundary decreases at entry {}: {} > {}",
                i + 2,
                values[i],
                values[i + 1]
            )));
        }
        Ok(Self(values))
    }

    /// Clamps raw inverse values to `[0, 1]` and takes a running maximum,
    /// which never changes the constrained event since `U_(i)` is sorted.
    pub fn monotonized(mut values: Vec<f64>) -> Result<Self> {
        let mut running = 0.0_f64;
        for v in values.iter_mut() {
            if v.is_nan() {
                return Err(Error::invalid("boundary entry is NaN"));
            }
            running = running.max(v.clamp(0.0, 1.0));
            *v = running;
        }
        Ok(Self(values))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Level of the `i`-th order statistic, 1-based.
    pub fn level(&self, i: usize) -> f64 {
        self.0[i - 1]
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl TryFrom<Vec<f64>> for BoundaryVector {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<BoundaryVector> for Vec<f64> {
    fn from(b: BoundaryVector) -> Self {
        b.0
    }
}

/// `P(U_(1) >= b_1, ..., U_(n) >= b_n)` for `n = bounds.len()` uniforms.
pub fn noncrossing_prob(bounds: &BoundaryVector) -> f64 {
    let b = bounds.as_slice();
    let n = b.len();
    if n == 0 {
        return 1.0;
    }
    if b[n - 1] >= 1.0 {
        return 0.0;
    }

    let ln_fact = ln_factorials(n);
    // state[c]: probability that exactly c samples lie below the current
    // boundary value and no constraint has been violated yet.
    let mut state = vec![0.0_f64; n];
    let mut next = vec![0.0_f64; n];
    let mut pmf = vec![0.0_f64; n];
    state[0] = 1.0;
    // Highest count that can carry mass so far.
    let mut top = 0;
    let mut prev = 0.0_f64;

    for j in 1..=n {
        let bj = b[j - 1];
        if bj <= prev {
            // Zero-width interval: counts unchanged, and the cap only grows.
            continue;
        }
        let q = ((bj - prev) / (1.0 - prev)).min(1.0);
        let cap = j - 1;
        next[..=cap].fill(0.0);
        for c in 0..=cap.min(top) {
            let mass = state[c];
            if mass < NEGLIGIBLE {
                continue;
            }
            let kmax = cap - c;
            let (lo, hi) = binomial_pmf_prefix(n - c, q, kmax, &ln_fact, &mut pmf);
            for k in lo..hi {
                next[c + k] += mass * pmf[k];
            }
        }
        std::mem::swap(&mut state, &mut next);
        top = cap;
        prev = bj;
    }

    state.iter().sum::<f64>().clamp(0.0, 1.0)
}

/// Writes `P(Bin(trials, q) = k)` into `out[lo..hi]` and returns
/// `(lo, hi)`, the range within `0..=kmax` holding every entry of at least
/// [`NEGLIGIBLE`].
///
/// Starts from the (clipped) mode, computed in log space, and walks the
/// ratio recurrence outward. The pmf is unimodal, so each walk stops at the
/// first negligible entry. Requires `0 < q` and `kmax < trials`.
fn binomial_pmf_prefix(
    trials: usize,
    q: f64,
    kmax: usize,
    ln_fact: &[f64],
    out: &mut [f64],
) -> (usize, usize) {
    if q >= 1.0 {
        return (0, 0);
    }
    let mode = (((trials + 1) as f64 * q).floor() as usize).min(kmax);
    let ln_q = q.ln();
    let ln_1mq = (-q).ln_1p();
    let ln_pmf = ln_fact[trials] - ln_fact[mode] - ln_fact[trials - mode]
        + mode as f64 * ln_q
        + (trials - mode) as f64 * ln_1mq;
    out[mode] = ln_pmf.exp();
    if out[mode] < NEGLIGIBLE {
        return (0, 0);
    }

    let odds = q / (1.0 - q);
    let mut lo = mode;
    while lo > 0 {
        let v = out[lo] * (lo as f64 / (trials - lo + 1) as f64) / odds;
        if v < NEGLIGIBLE {
            break;
        }
        out[lo - 1] = v;
        lo -= 1;
    }
    let mut hi = mode;
    while hi < kmax {
        let v = out[hi] * ((trials - hi) as f64 / (hi + 1) as f64) * odds;
        if v < NEGLIGIBLE {
            break;
        }
        out[hi + 1] = v;
        hi += 1;
    }
    (lo, hi + 1)
}

//! CDF lower confidence bounds.
//!
//! [`statistic`] holds the minimum-type goodness-of-fit statistics and their
//! calibration, [`pointwise`] the single-quantile baselines (DKW, order
//! statistics, Hoeffding), and [`method`] a uniform front end over both that
//! can be cached and shared across predictors.

pub mod method;
pub mod pointwise;
pub mod statistic;

use serde::{Deserialize, Serialize};

use crate::crossing::BoundaryVector;
use crate::error::{Error, Result};

pub use method::{default_grid_size, pointwise_grid, BoundMethod, BoundaryCache, CalibratedBoundary};
pub use pointwise::{
    dkw_quantile_index, hoeffding_mean_ucb, order_stats_quantile_index, pointwise_bound_grid,
    pointwise_boundary, PointwiseMethod,
};
pub use statistic::{
    boundary_from_statistic, cdf_lower_bound, critical_value, truncation_index_one_sided,
    truncation_indices_two_sided, GofStatisticSpec, Statistic,
};

/// Observed losses of one predictor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SampleSet {
    values: Vec<f64>,
}

impl SampleSet {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("sample set is empty"));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("sample value {v} is not finite")));
        }
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Order statistics `X_(1) <= ... <= X_(n)`.
    pub fn sorted(&self) -> Vec<f64> {
        let mut v = self.values.clone();
        v.sort_by(f64::total_cmp);
        v
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

impl TryFrom<Vec<f64>> for SampleSet {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<SampleSet> for Vec<f64> {
    fn from(s: SampleSet) -> Self {
        s.values
    }
}

/// Conservative completion of a set of CDF constraints `F(x_i) >= b_i`.
///
/// The function is 0 below the first breakpoint, equals `levels[i]` on
/// `[breakpoints[i], breakpoints[i + 1])`, holds the last level up to
/// `x_plus`, and is 1 from `x_plus` on. `x_plus = +inf` means the loss has no
/// known upper bound. Breakpoints and levels are both strictly increasing,
/// levels in `(0, 1)`: redundant breakpoints are dropped on construction
/// since they do not change the function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepCdfLowerBound {
    breakpoints: Vec<f64>,
    levels: Vec<f64>,
    x_plus: f64,
}

impl StepCdfLowerBound {
    /// Builds the completion from raw `(x, b)` constraints. `xs` must be
    /// sorted; ties are collapsed to the largest level at that point.
    pub fn from_constraints(xs: &[f64], levels: &[f64], x_plus: f64) -> Result<Self> {
        if xs.len() != levels.len() {
            return Err(Error::invalid(format!(
                "{} breakpoints but {} levels",
                xs.len(),
                levels.len()
            )));
        }
        if xs.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("breakpoints must be finite"));
        }
        if xs.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::invalid("breakpoints must be sorted"));
        }
        if levels.iter().any(|b| !(0.0..1.0).contains(b)) {
            return Err(Error::invalid("levels must lie in [0, 1)"));
        }
        check_x_plus(x_plus, xs.last().copied())?;

        let mut breakpoints = Vec::new();
        let mut kept = Vec::new();
        let mut last = 0.0_f64;
        let mut i = 0;
        while i < xs.len() {
            let x = xs[i];
            let mut level = levels[i];
            while i + 1 < xs.len() && xs[i + 1] == x {
                i += 1;
                level = level.max(levels[i]);
            }
            if level > last {
                breakpoints.push(x);
                kept.push(level);
                last = level;
            }
            i += 1;
        }
        Ok(Self {
            breakpoints,
            levels: kept,
            x_plus,
        })
    }

    /// Attaches a per-order-statistic boundary to the sorted samples.
    pub fn from_samples(samples: &SampleSet, boundary: &BoundaryVector, x_plus: f64) -> Result<Self> {
        if samples.len() != boundary.len() {
            return Err(Error::invalid(format!(
                "boundary is for n={} but {} samples were given",
                boundary.len(),
                samples.len()
            )));
        }
        if boundary.as_slice().last().is_some_and(|&b| b >= 1.0) {
            return Err(Error::invalid("top boundary level must be below 1"));
        }
        Self::from_constraints(&samples.sorted(), boundary.as_slice(), x_plus)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn x_plus(&self) -> f64 {
        self.x_plus
    }

    pub fn is_bounded(&self) -> bool {
        self.x_plus.is_finite()
    }

    /// Value of the step function at `x`.
    pub fn eval(&self, x: f64) -> f64 {
        if x >= self.x_plus {
            return 1.0;
        }
        let idx = self.breakpoints.partition_point(|&bp| bp <= x);
        if idx == 0 {
            0.0
        } else {
            self.levels[idx - 1]
        }
    }

    /// Highest certified level, i.e. the value just below `x_plus`.
    pub fn top_level(&self) -> f64 {
        self.levels.last().copied().unwrap_or(0.0)
    }

    /// Whether `self(x) >= other(x)` for every `x`.
    pub fn dominates(&self, other: &Self) -> bool {
        let steps_ok = other
            .breakpoints
            .iter()
            .zip(&other.levels)
            .all(|(&x, &b)| self.eval(x) >= b);
        steps_ok && self.x_plus <= other.x_plus
    }
}

pub(crate) fn check_x_plus(x_plus: f64, max_value: Option<f64>) -> Result<()> {
    if x_plus.is_nan() || x_plus == f64::NEG_INFINITY {
        return Err(Error::invalid(format!("x_plus must be a real or +inf, got {x_plus}")));
    }
    if let Some(m) = max_value {
        if x_plus < m {
            return Err(Error::invalid(format!(
                "x_plus = {x_plus} is below the largest loss {m}"
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_set_validation() {
        assert!(SampleSet::new(vec![]).is_err());
        assert!(SampleSet::new(vec![0.1, f64::NAN]).is_err());
        assert!(SampleSet::new(vec![f64::INFINITY]).is_err());
        let s = SampleSet::new(vec![0.7, 0.2, 0.5]).unwrap();
        assert_eq!(s.sorted(), vec![0.2, 0.5, 0.7]);
        assert_eq!(s.max(), 0.7);
    }

    #[test]
    fn completion_shape() {
        let g = StepCdfLowerBound::from_constraints(&[1.0, 2.0, 3.0], &[0.2, 0.6, 0.9], 4.0).unwrap();
        assert_eq!(g.eval(0.99), 0.0);
        assert_eq!(g.eval(1.0), 0.2);
        assert_eq!(g.eval(2.5), 0.6);
        assert_eq!(g.eval(3.99), 0.9);
        assert_eq!(g.eval(4.0), 1.0);
        assert_eq!(g.top_level(), 0.9);
    }

    #[test]
    fn ties_collapse_to_max_level() {
        let g = StepCdfLowerBound::from_constraints(&[2.0, 2.0, 2.0], &[0.1, 0.3, 0.5], 3.0).unwrap();
        assert_eq!(g.breakpoints(), &[2.0]);
        assert_eq!(g.levels(), &[0.5]);
    }

    #[test]
    fn zero_and_repeated_levels_are_dropped() {
        let g = StepCdfLowerBound::from_constraints(&[1.0, 2.0, 3.0, 4.0], &[0.0, 0.0, 0.4, 0.4], 5.0)
            .unwrap();
        assert_eq!(g.breakpoints(), &[3.0]);
        assert_eq!(g.levels(), &[0.4]);
        assert_eq!(g.eval(4.5), 0.4);
    }

    #[test]
    fn rejects_bad_completion_inputs() {
        assert!(StepCdfLowerBound::from_constraints(&[1.0], &[0.5], 0.5).is_err());
        assert!(StepCdfLowerBound::from_constraints(&[1.0], &[1.0], 2.0).is_err());
        assert!(StepCdfLowerBound::from_constraints(&[2.0, 1.0], &[0.1, 0.2], 2.0).is_err());
        assert!(StepCdfLowerBound::from_constraints(&[1.0], &[0.1, 0.2], 2.0).is_err());
        assert!(StepCdfLowerBound::from_constraints(&[1.0], &[0.1], f64::NAN).is_err());
        let unbounded = StepCdfLowerBound::from_constraints(&[1.0], &[0.1], f64::INFINITY).unwrap();
        assert!(!unbounded.is_bounded());
        assert_eq!(unbounded.eval(1e300), 0.1);
    }

    #[test]
    fn domination() {
        let low = StepCdfLowerBound::from_constraints(&[1.0, 2.0], &[0.2, 0.5], 3.0).unwrap();
        let high = StepCdfLowerBound::from_constraints(&[0.5, 2.0], &[0.3, 0.6], 3.0).unwrap();
        assert!(high.dominates(&low));
        assert!(!low.dominates(&high));
        assert!(low.dominates(&low));
        let unbounded =
            StepCdfLowerBound::from_constraints(&[0.5, 2.0], &[0.3, 0.6], f64::INFINITY).unwrap();
        assert!(!unbounded.dominates(&low));
    }
}

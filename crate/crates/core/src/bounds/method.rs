//! A single entry point over all bounding methods.
//!
//! Every method reduces to a per-order-statistic [`BoundaryVector`] that
//! depends only on `(method, n, delta)`, never on the data. It is computed
//! once by [`BoundMethod::calibrate`] and shared by every sample set of that
//! size, optionally through a [`BoundaryCache`].

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use super::pointwise::{pointwise_boundary, PointwiseMethod};
use super::statistic::{
    boundary_from_statistic, critical_value, truncation_index_one_sided,
    truncation_indices_two_sided, GofStatisticSpec, Statistic,
};
use super::{SampleSet, StepCdfLowerBound};
use crate::crossing::BoundaryVector;
use crate::error::{check_delta, Error, Result};
use crate::risk::MetricKind;

/// How to turn `n` samples into a CDF lower bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundMethod {
    Ks,
    BerkJones,
    /// Truncated Berk-Jones targeting quantiles in `[beta_min, 1)`.
    OneSidedBerkJones { beta_min: f64 },
    /// Truncated Berk-Jones targeting quantiles in `[beta_min, beta_max]`.
    TwoSidedBerkJones { beta_min: f64, beta_max: f64 },
    Dkw { betas: Vec<f64> },
    OrderStats { betas: Vec<f64> },
}

impl BoundMethod {
    /// Short identifier, e.g. `bj-one-sided`.
    pub fn name(&self) -> &'static str {
        match self {
            BoundMethod::Ks => "ks",
            BoundMethod::BerkJones => "bj",
            BoundMethod::OneSidedBerkJones { .. } => "bj-one-sided",
            BoundMethod::TwoSidedBerkJones { .. } => "bj-two-sided",
            BoundMethod::Dkw { .. } => "dkw",
            BoundMethod::OrderStats { .. } => "order-stats",
        }
    }

    /// Resolves truncation indices or grid indices and computes the boundary.
    pub fn calibrate(&self, n: usize, delta: f64) -> Result<CalibratedBoundary> {
        check_delta(delta)?;
        if n == 0 {
            return Err(Error::invalid("sample count must be at least 1"));
        }
        let statistic = match *self {
            BoundMethod::Ks => Some(Statistic::Ks),
            BoundMethod::BerkJones => Some(Statistic::BerkJones),
            BoundMethod::OneSidedBerkJones { beta_min } => {
                let k = truncation_index_one_sided(n, delta, beta_min)?;
                Some(Statistic::TruncatedOneSided { k })
            }
            BoundMethod::TwoSidedBerkJones { beta_min, beta_max } => {
                let (k, l) = truncation_indices_two_sided(n, delta, beta_min, beta_max)?;
                Some(Statistic::TruncatedTwoSided { k, l })
            }
            BoundMethod::Dkw { .. } | BoundMethod::OrderStats { .. } => None,
        };

        if let Some(statistic) = statistic {
            let spec = GofStatisticSpec::new(statistic, n)?;
            let r = critical_value(&spec, delta)?;
            let boundary = boundary_from_statistic(&spec, r)?;
            return Ok(CalibratedBoundary {
                method: self.clone(),
                n,
                delta,
                statistic: Some(spec),
                critical_value: Some(r),
                grid_indices: None,
                boundary,
            });
        }

        let (kind, betas) = match self {
            BoundMethod::Dkw { betas } => (PointwiseMethod::Dkw, betas),
            BoundMethod::OrderStats { betas } => (PointwiseMethod::OrderStats, betas),
            _ => unreachable!("statistic methods handled above"),
        };
        let (boundary, indices) = pointwise_boundary(n, kind, delta, betas)?;
        Ok(CalibratedBoundary {
            method: self.clone(),
            n,
            delta,
            statistic: None,
            critical_value: None,
            grid_indices: Some(indices),
            boundary,
        })
    }
}

impl fmt::Display for BoundMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundMethod::OneSidedBerkJones { beta_min } => write!(f, "bj-one-sided:{beta_min}"),
            BoundMethod::TwoSidedBerkJones { beta_min, beta_max } => {
                write!(f, "bj-two-sided:{beta_min},{beta_max}")
            }
            BoundMethod::Dkw { betas } | BoundMethod::OrderStats { betas } => {
                write!(f, "{}[{} levels]", self.name(), betas.len())
            }
            _ => f.write_str(self.name()),
        }
    }
}

/// A boundary ready to be attached to any sample set of size `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibratedBoundary {
    pub method: BoundMethod,
    pub n: usize,
    pub delta: f64,
    /// Resolved statistic, including truncation indices, for GoF methods.
    pub statistic: Option<GofStatisticSpec>,
    pub critical_value: Option<f64>,
    /// Order-statistic index chosen for each grid level, for point-wise methods.
    pub grid_indices: Option<Vec<usize>>,
    pub boundary: BoundaryVector,
}

impl CalibratedBoundary {
    pub fn bound(&self, samples: &SampleSet, x_plus: f64) -> Result<StepCdfLowerBound> {
        super::check_x_plus(x_plus, Some(samples.max()))?;
        StepCdfLowerBound::from_samples(samples, &self.boundary, x_plus)
    }
}

type CacheKey = (String, usize, u64);

/// Shared boundaries keyed by `(method, n, delta)`.
///
/// Reads take a shared lock; a miss computes outside the lock and the first
/// writer wins, so concurrent callers always observe the same value.
#[derive(Debug, Default)]
pub struct BoundaryCache {
    entries: RwLock<HashMap<CacheKey, Arc<CalibratedBoundary>>>,
}

impl BoundaryCache {
    pub fn new() -> Self {
        Self::default()
    }

    fn key(method: &BoundMethod, n: usize, delta: f64) -> CacheKey {
        (format!("{method:?}"), n, delta.to_bits())
    }

    pub fn get_or_calibrate(
        &self,
        method: &BoundMethod,
        n: usize,
        delta: f64,
    ) -> Result<Arc<CalibratedBoundary>> {
        let key = Self::key(method, n, delta);
        if let Some(hit) = self.entries.read().expect("cache lock").get(&key) {
            return Ok(Arc::clone(hit));
        }
        let fresh = Arc::new(method.calibrate(n, delta)?);
        let mut entries = self.entries.write().expect("cache lock");
        Ok(Arc::clone(entries.entry(key).or_insert(fresh)))
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Default point-wise grid size for a target metric: 10 for a VaR interval,
/// 50 for CVaR and the mean, a single point for VaR.
pub fn default_grid_size(metric: &MetricKind) -> usize {
    match metric {
        MetricKind::Var { .. } => 1,
        MetricKind::Interval { .. } => 10,
        MetricKind::Cvar { .. } | MetricKind::Mean => 50,
    }
}

/// Quantile levels a point-wise method should certify for `metric`.
///
/// VaR uses its own level; an interval is covered by `size` evenly spaced
/// levels including both ends; CVaR by `size` levels `beta + (1 - beta) j / size`;
/// the mean by `j / (size + 1)` for `j = 1..=size`.
pub fn pointwise_grid(metric: &MetricKind, size: usize) -> Result<Vec<f64>> {
    if size == 0 {
        return Err(Error::invalid("grid size must be at least 1"));
    }
    let grid = match *metric {
        MetricKind::Var { beta } => vec![beta],
        MetricKind::Interval { beta_min, beta_max } => {
            if size == 1 {
                vec![beta_max]
            } else {
                (0..size)
                    .map(|j| beta_min + (beta_max - beta_min) * j as f64 / (size - 1) as f64)
                    .collect()
            }
        }
        MetricKind::Cvar { beta } => (0..size)
            .map(|j| beta + (1.0 - beta) * j as f64 / size as f64)
            .collect(),
        MetricKind::Mean => (1..=size).map(|j| j as f64 / (size + 1) as f64).collect(),
    };
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crossing::noncrossing_prob;

    #[test]
    fn gof_methods_resolve_statistics() {
        let c = BoundMethod::BerkJones.calibrate(2, 0.05).unwrap();
        assert_eq!(c.statistic.unwrap().statistic, Statistic::BerkJones);
        assert!((c.critical_value.unwrap() - 0.0272).abs() < 5e-4);

        let c = BoundMethod::OneSidedBerkJones { beta_min: 0.1 }.calibrate(2, 0.05).unwrap();
        assert_eq!(c.statistic.unwrap().statistic, Statistic::TruncatedOneSided { k: 2 });

        let c = BoundMethod::TwoSidedBerkJones { beta_min: 0.01, beta_max: 0.02 }
            .calibrate(2, 0.05)
            .unwrap();
        assert_eq!(c.statistic.unwrap().statistic, Statistic::TruncatedTwoSided { k: 1, l: 1 });
    }

    #[test]
    fn pointwise_methods_record_indices() {
        let c = BoundMethod::Dkw { betas: vec![0.9] }.calibrate(500, 0.05).unwrap();
        assert_eq!(c.grid_indices, Some(vec![478]));
        assert!(c.statistic.is_none());
        assert!(BoundMethod::Dkw { betas: vec![0.9] }
            .calibrate(100, 0.05)
            .unwrap_err()
            .is_infeasible());
    }

    #[test]
    fn calibrated_boundaries_are_valid() {
        for method in [
            BoundMethod::Ks,
            BoundMethod::BerkJones,
            BoundMethod::OneSidedBerkJones { beta_min: 0.5 },
            BoundMethod::TwoSidedBerkJones { beta_min: 0.3, beta_max: 0.6 },
            BoundMethod::OrderStats { betas: vec![0.2, 0.4, 0.6] },
            BoundMethod::Dkw { betas: vec![0.1, 0.2] },
        ] {
            let c = method.calibrate(60, 0.1).unwrap();
            let p = noncrossing_prob(&c.boundary);
            assert!(p >= 0.9 - 1e-12, "{method}: {p}");
        }
    }

    #[test]
    fn cache_shares_entries() {
        let cache = BoundaryCache::new();
        let a = cache.get_or_calibrate(&BoundMethod::BerkJones, 30, 0.05).unwrap();
        let b = cache.get_or_calibrate(&BoundMethod::BerkJones, 30, 0.05).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
        let _ = cache.get_or_calibrate(&BoundMethod::BerkJones, 30, 0.1).unwrap();
        let _ = cache.get_or_calibrate(&BoundMethod::Ks, 30, 0.05).unwrap();
        assert_eq!(cache.len(), 3);
        assert_eq!(*a, BoundMethod::BerkJones.calibrate(30, 0.05).unwrap());
    }

    #[test]
    fn cache_is_safe_under_concurrency() {
        let cache = Arc::new(BoundaryCache::new());
        let handles: Vec<_> = (0..8)
            .map(|_| {
                let cache = Arc::clone(&cache);
                std::thread::spawn(move || cache.get_or_calibrate(&BoundMethod::Ks, 40, 0.05).unwrap())
            })
            .collect();
        let results: Vec<_> = handles.into_iter().map(|h| h.join().unwrap()).collect();
        assert!(results.windows(2).all(|w| w[0] == w[1]));
        assert_eq!(cache.len(), 1);
    }

    #[test]
    fn grids() {
        assert_eq!(pointwise_grid(&MetricKind::Var { beta: 0.9 }, 7).unwrap(), vec![0.9]);
        let g = pointwise_grid(&MetricKind::Interval { beta_min: 0.85, beta_max: 0.95 }, 3).unwrap();
        assert_eq!(g.len(), 3);
        assert!((g[0] - 0.85).abs() < 1e-15 && (g[1] - 0.9).abs() < 1e-15 && (g[2] - 0.95).abs() < 1e-15);
        let g = pointwise_grid(&MetricKind::Cvar { beta: 0.9 }, 50).unwrap();
        assert_eq!(g.len(), 50);
        assert_eq!(g[0], 0.9);
        assert!(*g.last().unwrap() < 1.0);
        let g = pointwise_grid(&MetricKind::Mean, 4).unwrap();
        assert_eq!(g, vec![0.2, 0.4, 0.6, 0.8]);
        assert!(pointwise_grid(&MetricKind::Mean, 0).is_err());
        assert_eq!(default_grid_size(&MetricKind::Interval { beta_min: 0.1, beta_max: 0.2 }), 10);
        assert_eq!(default_grid_size(&MetricKind::Cvar { beta: 0.9 }), 50);
    }
}

//! Picking one predictor out of a finite family.
//!
//! A single boundary calibrated at `delta / m` makes all `m` CDF lower
//! bounds hold simultaneously, so the predictor minimizing the target bound
//! can be reported together with bounds on any other metric.

use std::collections::{BTreeMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{BoundMethod, BoundaryCache, CalibratedBoundary, SampleSet, StepCdfLowerBound};
use crate::error::{check_delta, Error, Result};
use crate::risk::{evaluate_qbrm, MetricKind};

/// Losses of `m` predictors on the same `n` validation samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossMatrix {
    labels: Vec<String>,
    rows: Vec<SampleSet>,
}

impl LossMatrix {
    pub fn new(labels: Vec<String>, rows: Vec<SampleSet>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::invalid("loss matrix has no predictors"));
        }
        if labels.len() != rows.len() {
            return Err(Error::invalid(format!(
                "{} labels for {} predictors",
                labels.len(),
                rows.len()
            )));
        }
        let n = rows[0].len();
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
            return Err(Error::invalid(format!(
                "predictor {:?} has {} samples, expected {n}",
                labels[i],
                r.len()
            )));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = labels.iter().find(|l| !seen.insert(l.as_str())) {
            return Err(Error::invalid(format!("duplicate predictor label {dup:?}")));
        }
        Ok(Self { labels, rows })
    }

    /// One predictor per threshold, with `loss(datum, threshold)` as each
    /// sample's loss. Labels are the thresholds.
    pub fn from_thresholds<T>(
        data: &[T],
        thresholds: &[f64],
        loss: impl Fn(&T, f64) -> f64 + Sync,
    ) -> Result<Self>
    where
        T: Sync,
    {
        let rows = thresholds
            .par_iter()
            .map(|&t| SampleSet::new(data.iter().map(|d| loss(d, t)).collect()))
            .collect::<Result<Vec<_>>>()?;
        let labels = thresholds.iter().map(|t| t.to_string()).collect();
        Self::new(labels, rows)
    }

    pub fn m(&self) -> usize {
        self.rows.len()
    }

    pub fn n(&self) -> usize {
        self.rows[0].len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn rows(&self) -> &[SampleSet] {
        &self.rows
    }

    /// The same predictors restricted to the given sample columns.
    pub fn select_columns(&self, columns: &[usize]) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::invalid("column selection is empty"));
        }
        let rows = self
            .rows
            .iter()
            .map(|r| SampleSet::new(columns.iter().map(|&c| r.values()[c]).collect()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(self.labels.clone(), rows)
    }
}

/// `k` evenly spaced values from `start` to `end` inclusive.
pub fn linspace(start: f64, end: f64, k: usize) -> Vec<f64> {
    match k {
        0 => vec![],
        1 => vec![start],
        _ => (0..k)
            .map(|j| start + (end - start) * j as f64 / (k - 1) as f64)
            .collect(),
    }
}

/// Everything a selection run needs besides the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub method: BoundMethod,
    pub delta: f64,
    pub target: MetricKind,
    /// Metrics bounded for the chosen predictor; the target is always included.
    pub report_metrics: Vec<MetricKind>,
    pub x_plus: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorBound {
    pub label: String,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricBound {
    pub metric: MetricKind,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub chosen: String,
    pub chosen_index: usize,
    pub target: MetricKind,
    /// Target bound of every predictor, in input order.
    pub target_bounds: Vec<PredictorBound>,
    /// Bounds on every requested metric for the chosen predictor.
    pub metric_bounds: Vec<MetricBound>,
    pub chosen_bound: StepCdfLowerBound,
    pub delta: f64,
    /// Per-predictor confidence budget `delta / m`.
    pub delta_prime: f64,
    pub n: usize,
    pub m: usize,
    pub x_plus: f64,
    pub calibration: CalibratedBoundary,
}

pub fn select_predictor(losses: &LossMatrix, config: &SelectionConfig) -> Result<SelectionReport> {
    select_predictor_cached(losses, config, &BoundaryCache::new())
}

/// [`select_predictor`] drawing the boundary from a shared cache.
pub fn select_predictor_cached(
    losses: &LossMatrix,
    config: &SelectionConfig,
    cache: &BoundaryCache,
) -> Result<SelectionReport> {
    check_delta(config.delta)?;
    config.target.validate()?;
    let m = losses.m();
    let delta_prime = config.delta / m as f64;
    let calibration = cache.get_or_calibrate(&config.method, losses.n(), delta_prime)?;
    let target_weight = config.target.weight()?;

    let bounds = losses
        .rows()
        .par_iter()
        .map(|row| {
            let g = calibration.bound(row, config.x_plus)?;
            let value = evaluate_qbrm(&g, &target_weight);
            Ok((g, value))
        })
        .collect::<Result<Vec<_>>>()?;

    // First row wins ties.
    let mut chosen_index = 0;
    for (i, (_, v)) in bounds.iter().enumerate() {
        if *v < bounds[chosen_index].1 {
            chosen_index = i;
        }
    }

    let chosen_bound = bounds[chosen_index].0.clone();
    let mut metrics = vec![config.target];
    metrics.extend(config.report_metrics.iter().filter(|m| **m != config.target));
    let metric_bounds = metrics
        .into_iter()
        .map(|metric| {
            Ok(MetricBound { metric, bound: evaluate_qbrm(&chosen_bound, &metric.weight()?) })
        })
        .collect::<Result<Vec<_>>>()?;

    let target_bounds = losses
        .labels()
        .iter()
        .zip(&bounds)
        .map(|(label, (_, bound))| PredictorBound { label: label.clone(), bound: *bound })
        .collect();

    Ok(SelectionReport {
        chosen: losses.labels()[chosen_index].clone(),
        chosen_index,
        target: config.target,
        target_bounds,
        metric_bounds,
        chosen_bound,
        delta: config.delta,
        delta_prime,
        n: losses.n(),
        m,
        x_plus: config.x_plus,
        calibration: (*calibration).clone(),
    })
}

/// How the confidence budget is shared across groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupCorrection {
    /// Each group gets the full `delta`: a separate guarantee per group.
    #[default]
    PerGroup,
    /// `delta` is split evenly, so all groups hold simultaneously.
    Joint,
}

/// Runs [`select_predictor`] separately on the columns of each group.
pub fn groupwise_select(
    losses: &LossMatrix,
    groups: &[String],
    config: &SelectionConfig,
    correction: GroupCorrection,
) -> Result<BTreeMap<String, SelectionReport>> {
    if groups.len() != losses.n() {
        return Err(Error::invalid(format!(
            "{} group labels for {} samples",
            groups.len(),
            losses.n()
        )));
    }
    let mut columns: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, g) in groups.iter().enumerate() {
        columns.entry(g.as_str()).or_default().push(i);
    }
    let mut group_config = config.clone();
    if correction == GroupCorrection::Joint {
        group_config.delta = config.delta / columns.len() as f64;
    }
    let cache = BoundaryCache::new();
    columns
        .into_iter()
        .map(|(g, cols)| {
            let sub = losses.select_columns(&cols)?;
            let report = select_predictor_cached(&sub, &group_config, &cache).map_err(|e| match e {
                Error::Infeasible(msg) => Error::infeasible(format!("group {g:?}: {msg}")),
                other => other,
            })?;
            Ok((g.to_string(), report))
        })
        .collect()
}

//! Monte Carlo checks of the guarantees on synthetic loss laws.
//!
//! Randomness comes from ChaCha8 ([`RNG_ALGORITHM`]). Trials are grouped in
//! fixed-size chunks and chunk `c` draws from stream `c` of the seeded
//! generator, so results do not depend on the thread count.

mod losses;

pub use losses::{balanced_accuracy_loss, prediction_set, weighted_accuracy_loss};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{BoundMethod, BoundaryCache, SampleSet, StepCdfLowerBound};
use crate::crossing::BoundaryVector;
use crate::error::{check_delta, Error, Result};
use crate::risk::{evaluate_qbrm, MetricKind, QbrmWeight};
use crate::selection::{select_predictor_cached, LossMatrix, SelectionConfig};
use crate::special::{reg_inc_beta, reg_inc_beta_inv, BetaParams};

pub const RNG_ALGORITHM: &str = "chacha8/rand_chacha-0.3";

const TRIAL_CHUNK: usize = 32;
const MC_CHUNK: usize = 8192;
const METRIC_TOL: f64 = 1e-12;

fn chunk_rng(seed: u64, chunk: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64);
    rng
}

/// Serialized form of a [`SyntheticDistribution`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistributionSpec {
    Uniform,
    Beta { a: f64, b: f64 },
    Discrete { support: Vec<f64>, probs: Vec<f64> },
    PointMass { value: f64 },
}

#[derive(Debug, Clone, PartialEq)]
enum Law {
    Uniform,
    Beta(BetaParams),
    /// Strictly increasing support with cumulative probabilities ending at 1.
    Discrete { support: Vec<f64>, cumulative: Vec<f64> },
}

/// A loss law with exact CDF, quantile function and risk values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DistributionSpec", into = "DistributionSpec")]
pub struct SyntheticDistribution {
    spec: DistributionSpec,
    law: Law,
}

impl SyntheticDistribution {
    pub fn uniform() -> Self {
        Self { spec: DistributionSpec::Uniform, law: Law::Uniform }
    }

    pub fn beta(a: f64, b: f64) -> Result<Self> {
        let params = BetaParams::new(a, b)?;
        Ok(Self { spec: DistributionSpec::Beta { a, b }, law: Law::Beta(params) })
    }

    pub fn discrete(support: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if support.is_empty() || support.len() != probs.len() {
            return Err(Error::invalid("discrete law needs matching nonempty support and probabilities"));
        }
        if support.iter().any(|x| !x.is_finite()) || support.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("discrete support must be finite and strictly increasing"));
        }
        if probs.iter().any(|p| !(*p >= 0.0 && p.is_finite())) {
            return Err(Error::invalid("discrete probabilities must be nonnegative"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("discrete probabilities sum to {total}, expected 1")));
        }
        let mut acc = 0.0;
        let mut cumulative: Vec<f64> = probs
            .iter()
            .map(|p| {
                acc += p / total;
                acc.min(1.0)
            })
            .collect();
        *cumulative.last_mut().expect("nonempty") = 1.0;
        Ok(Self {
            spec: DistributionSpec::Discrete { support: support.clone(), probs },
            law: Law::Discrete { support, cumulative },
        })
    }

    pub fn point_mass(value: f64) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::invalid(format!("point mass location {value} is not finite")));
        }
        Ok(Self {
            spec: DistributionSpec::PointMass { value },
            law: Law::Discrete { support: vec![value], cumulative: vec![1.0] },
        })
    }

    pub fn spec(&self) -> &DistributionSpec {
        &self.spec
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match &self.law {
            Law::Uniform => x.clamp(0.0, 1.0),
            Law::Beta(params) => {
                reg_inc_beta(x.clamp(0.0, 1.0), *params).expect("valid shapes and argument")
            }
            Law::Discrete { support, cumulative } => {
                let idx = support.partition_point(|&s| s <= x);
                if idx == 0 {
                    0.0
                } else {
                    cumulative[idx - 1]
                }
            }
        }
    }

    /// `inf {x : F(x) >= p}` for `p` in `[0, 1]`.
    pub fn quantile(&self, p: f64) -> f64 {
        let p = p.clamp(0.0, 1.0);
        match &self.law {
            Law::Uniform => p,
            Law::Beta(params) => reg_inc_beta_inv(p, *params).expect("valid shapes and level"),
            Law::Discrete { support, cumulative } => {
                let idx = cumulative.partition_point(|&c| c < p);
                support[idx.min(support.len() - 1)]
            }
        }
    }

    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        self.quantile(rng.gen::<f64>())
    }

    /// Smallest `x` with `F(x) = 1`.
    pub fn upper_support(&self) -> f64 {
        match &self.law {
            Law::Uniform | Law::Beta(_) => 1.0,
            Law::Discrete { support, .. } => *support.last().expect("nonempty"),
        }
    }

    /// Exact `∫ ψ(p) F⁻¹(p) dp`.
    pub fn true_qbrm(&self, weight: &QbrmWeight) -> f64 {
        let atoms: f64 = weight.atoms().iter().map(|a| a.mass * self.quantile(a.beta)).sum();
        let pieces: f64 = weight
            .pieces()
            .iter()
            .map(|p| p.density * self.quantile_integral(p.start, p.end))
            .sum();
        atoms + pieces
    }

    /// `∫_a^b F⁻¹(p) dp`.
    fn quantile_integral(&self, a: f64, b: f64) -> f64 {
        match &self.law {
            Law::Uniform => 0.5 * (b * b - a * a),
            Law::Beta(params) => {
                // Substituting x = F⁻¹(p): ∫ x f(x) dx = E[X] · (I(a+1, b) increments).
                let (s, t) = (params.a(), params.b());
                let shifted = BetaParams::new(s + 1.0, t).expect("positive shapes");
                let upper = |p: f64| {
                    reg_inc_beta(self.quantile(p), shifted).expect("valid shapes and argument")
                };
                s / (s + t) * (upper(b) - upper(a))
            }
            Law::Discrete { support, cumulative } => {
                let mut lo = 0.0;
                let mut acc = 0.0;
                for (&x, &c) in support.iter().zip(cumulative) {
                    let overlap = b.min(c) - a.max(lo);
                    if overlap > 0.0 {
                        acc += overlap * x;
                    }
                    lo = c;
                }
                acc
            }
        }
    }

    /// Whether the true CDF lies on or above the step bound everywhere. The
    /// bound is constant between breakpoints and `F` is nondecreasing, so
    /// checking each breakpoint and `x_plus` is exhaustive.
    pub fn satisfies_bound(&self, bound: &StepCdfLowerBound) -> bool {
        let steps_ok = bound
            .breakpoints()
            .iter()
            .zip(bound.levels())
            .all(|(&x, &b)| self.cdf(x) >= b);
        steps_ok && bound.x_plus() >= self.upper_support()
    }
}

impl TryFrom<DistributionSpec> for SyntheticDistribution {
    type Error = Error;

    fn try_from(spec: DistributionSpec) -> Result<Self> {
        match spec {
            DistributionSpec::Uniform => Ok(Self::uniform()),
            DistributionSpec::Beta { a, b } => Self::beta(a, b),
            DistributionSpec::Discrete { support, probs } => Self::discrete(support, probs),
            DistributionSpec::PointMass { value } => Self::point_mass(value),
        }
    }
}

impl From<SyntheticDistribution> for DistributionSpec {
    fn from(d: SyntheticDistribution) -> Self {
        d.spec
    }
}

fn metric_violated(bound: f64, truth: f64) -> bool {
    bound < truth - METRIC_TOL * truth.abs().max(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricViolations {
    pub metric: MetricKind,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationStats {
    pub trials: usize,
    /// Trials where the true CDF dips below the bound somewhere.
    pub lcb_violations: usize,
    /// Trials where a metric bound falls below the true metric value.
    pub metric_violations: Vec<MetricViolations>,
    /// Trials with a metric violation but no CDF violation; always zero
    /// when the bounds are implemented correctly.
    pub implication_failures: usize,
}

impl ViolationStats {
    fn empty(trials: usize, metrics: &[MetricKind]) -> Self {
        Self {
            trials,
            lcb_violations: 0,
            metric_violations: metrics.iter().map(|&metric| MetricViolations { metric, count: 0 }).collect(),
            implication_failures: 0,
        }
    }

    fn merge(mut self, other: Self) -> Self {
        self.lcb_violations += other.lcb_violations;
        self.implication_failures += other.implication_failures;
        for (a, b) in self.metric_violations.iter_mut().zip(other.metric_violations) {
            a.count += b.count;
        }
        self
    }

    fn record(&mut self, lcb_ok: bool, metric_flags: &[bool]) {
        if !lcb_ok {
            self.lcb_violations += 1;
        }
        for (slot, &violated) in self.metric_violations.iter_mut().zip(metric_flags) {
            slot.count += usize::from(violated);
        }
        if lcb_ok && metric_flags.iter().any(|&v| v) {
            self.implication_failures += 1;
        }
    }

    pub fn lcb_rate(&self) -> f64 {
        self.lcb_violations as f64 / self.trials as f64
    }

    pub fn metric_rate(&self, metric: &MetricKind) -> Option<f64> {
        self.metric_violations
            .iter()
            .find(|m| m.metric == *metric)
            .map(|m| m.count as f64 / self.trials as f64)
    }
}

fn chunks(trials: usize, size: usize) -> impl ParallelIterator<Item = (usize, usize)> {
    let count = trials.div_ceil(size);
    (0..count).into_par_iter().map(move |c| (c, size.min(trials - c * size)))
}

/// Repeatedly samples `n` losses from `dist`, bounds them with the upper
/// support as `x_plus`, and counts CDF and metric violations.
pub fn run_coverage_experiment(
    dist: &SyntheticDistribution,
    n: usize,
    trials: usize,
    method: &BoundMethod,
    delta: f64,
    metrics: &[MetricKind],
    seed: u64,
) -> Result<ViolationStats> {
    if trials == 0 {
        return Err(Error::invalid("need at least one trial"));
    }
    let calibration = method.calibrate(n, delta)?;
    let weights = metrics.iter().map(MetricKind::weight).collect::<Result<Vec<_>>>()?;
    let truths: Vec<f64> = weights.iter().map(|w| dist.true_qbrm(w)).collect();
    let x_plus = dist.upper_support();

    chunks(trials, TRIAL_CHUNK)
        .map(|(c, len)| {
            let mut rng = chunk_rng(seed, c);
            let mut stats = ViolationStats::empty(len, metrics);
            for _ in 0..len {
                let samples = SampleSet::new((0..n).map(|_| dist.sample(&mut rng)).collect())?;
                let bound = calibration.bound(&samples, x_plus)?;
                let flags: Vec<bool> = weights
                    .iter()
                    .zip(&truths)
                    .map(|(w, &t)| metric_violated(evaluate_qbrm(&bound, w), t))
                    .collect();
                stats.record(dist.satisfies_bound(&bound), &flags);
            }
            Ok(stats)
        })
        .try_reduce(
            || ViolationStats::empty(0, metrics),
            |a, b| {
                let trials = a.trials + b.trials;
                let mut merged = a.merge(b);
                merged.trials = trials;
                Ok(merged)
            },
        )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionExperimentStats {
    pub trials: usize,
    /// Trials where at least one predictor's bound is violated.
    pub simultaneous_lcb_violations: usize,
    /// CDF and metric violations of the selected predictor.
    pub chosen: ViolationStats,
}

/// Predictor `j` has losses `F_j⁻¹(U)` on shared uniforms `U`, so every
/// predictor sees the same validation draw. Selection follows `config`, and
/// the chosen predictor is checked on the target plus all report metrics.
pub fn run_selection_experiment(
    dists: &[SyntheticDistribution],
    n: usize,
    trials: usize,
    config: &SelectionConfig,
    seed: u64,
) -> Result<SelectionExperimentStats> {
    if trials == 0 || dists.is_empty() {
        return Err(Error::invalid("need at least one trial and one predictor"));
    }
    check_delta(config.delta)?;
    let labels: Vec<String> = (0..dists.len()).map(|j| format!("h{j}")).collect();
    let mut metrics = vec![config.target];
    metrics.extend(config.report_metrics.iter().filter(|m| **m != config.target));
    let weights = metrics.iter().map(MetricKind::weight).collect::<Result<Vec<_>>>()?;
    let truths: Vec<Vec<f64>> =
        dists.iter().map(|d| weights.iter().map(|w| d.true_qbrm(w)).collect()).collect();

    let cache = BoundaryCache::new();
    let calibration = cache.get_or_calibrate(&config.method, n, config.delta / dists.len() as f64)?;

    let per_chunk = chunks(trials, TRIAL_CHUNK)
        .map(|(c, len)| {
            let mut rng = chunk_rng(seed, c);
            let mut simultaneous = 0;
            let mut chosen = ViolationStats::empty(len, &metrics);
            for _ in 0..len {
                let u: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
                let rows = dists
                    .iter()
                    .map(|d| SampleSet::new(u.iter().map(|&p| d.quantile(p)).collect()))
                    .collect::<Result<Vec<_>>>()?;
                let losses = LossMatrix::new(labels.clone(), rows)?;
                let mut any_violated = false;
                for (row, d) in losses.rows().iter().zip(dists) {
                    let g = calibration.bound(row, config.x_plus)?;
                    any_violated |= !d.satisfies_bound(&g);
                }
                simultaneous += usize::from(any_violated);

                let report = select_predictor_cached(&losses, config, &cache)?;
                let j = report.chosen_index;
                let flags: Vec<bool> = report
                    .metric_bounds
                    .iter()
                    .zip(&truths[j])
                    .map(|(mb, &t)| metric_violated(mb.bound, t))
                    .collect();
                chosen.record(dists[j].satisfies_bound(&report.chosen_bound), &flags);
            }
            Ok((simultaneous, chosen))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut simultaneous = 0;
    let mut chosen = ViolationStats::empty(0, &metrics);
    for (s, stats) in per_chunk {
        simultaneous += s;
        let trials = chosen.trials + stats.trials;
        chosen = chosen.merge(stats);
        chosen.trials = trials;
    }
    Ok(SelectionExperimentStats { trials, simultaneous_lcb_violations: simultaneous, chosen })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub trials: usize,
}

/// Monte Carlo estimate of `P(U_(i) >= b_i for all i)`.
pub fn mc_noncrossing(bounds: &BoundaryVector, trials: usize, seed: u64) -> Result<McEstimate> {
    if trials == 0 {
        return Err(Error::invalid("need at least one trial"));
    }
    let b = bounds.as_slice();
    let hits: usize = chunks(trials, MC_CHUNK)
        .map(|(c, len)| {
            let mut rng = chunk_rng(seed, c);
            let mut u = vec![0.0; b.len()];
            let mut hits = 0;
            for _ in 0..len {
                u.iter_mut().for_each(|x| *x = rng.gen::<f64>());
                u.sort_unstable_by(f64::total_cmp);
                hits += usize::from(u.iter().zip(b).all(|(x, lo)| x >= lo));
            }
            hits
        })
        .sum();
    let p = hits as f64 / trials as f64;
    Ok(McEstimate { estimate: p, std_error: (p * (1.0 - p) / trials as f64).sqrt(), trials })
}

//! Quantile-based risk measures evaluated on a CDF lower bound.
//!
//! A risk measure is `R(F) = ∫ ψ(p) F⁻¹(p) dp` for a nonnegative weight `ψ`
//! of total mass one. Weights here are a finite set of atoms plus a
//! piecewise-constant density, which keeps evaluation on a step bound exact.
//! Since a lower bound on `F` yields an upper bound on `F⁻¹`, the value on a
//! CDF lower bound is an upper bound on the true risk.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bounds::StepCdfLowerBound;
use crate::error::{Error, Result};

const MASS_TOL: f64 = 1e-12;

/// The canonical risk measures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MetricKind {
    Mean,
    Var { beta: f64 },
    Cvar { beta: f64 },
    /// Average of VaR over `[beta_min, beta_max]`.
    Interval { beta_min: f64, beta_max: f64 },
}

impl MetricKind {
    pub fn validate(&self) -> Result<()> {
        let open = |v: f64| v > 0.0 && v < 1.0;
        match *self {
            MetricKind::Mean => Ok(()),
            MetricKind::Var { beta } | MetricKind::Cvar { beta } if open(beta) => Ok(()),
            MetricKind::Var { beta } | MetricKind::Cvar { beta } => {
                Err(Error::invalid(format!("{self}: beta must lie in (0, 1), got {beta}")))
            }
            MetricKind::Interval { beta_min, beta_max }
                if open(beta_min) && open(beta_max) && beta_min < beta_max =>
            {
                Ok(())
            }
            MetricKind::Interval { .. } => Err(Error::invalid(format!(
                "{self}: need 0 < beta_min < beta_max < 1"
            ))),
        }
    }

    pub fn weight(&self) -> Result<QbrmWeight> {
        make_weight(self)
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricKind::Mean => f.write_str("mean"),
            MetricKind::Var { beta } => write!(f, "var:{beta}"),
            MetricKind::Cvar { beta } => write!(f, "cvar:{beta}"),
            MetricKind::Interval { beta_min, beta_max } => write!(f, "interval:{beta_min},{beta_max}"),
        }
    }
}

/// Parses `mean`, `var:0.9`, `cvar:0.9` or `interval:0.85,0.95`.
impl FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, args) = match s.split_once(':') {
            Some((name, args)) => (name.trim(), Some(args)),
            None => (s, None),
        };
        let parse = |v: &str| -> Result<f64> {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::invalid(format!("bad number {v:?} in metric {s:?}")))
        };
        let metric = match (name.to_ascii_lowercase().as_str(), args) {
            ("mean", None) => MetricKind::Mean,
            ("var", Some(a)) => MetricKind::Var { beta: parse(a)? },
            ("cvar", Some(a)) => MetricKind::Cvar { beta: parse(a)? },
            ("interval", Some(a)) => {
                let (lo, hi) = a
                    .split_once(',')
                    .ok_or_else(|| Error::invalid(format!("metric {s:?} needs two levels")))?;
                MetricKind::Interval { beta_min: parse(lo)?, beta_max: parse(hi)? }
            }
            _ => {
                return Err(Error::invalid(format!(
                    "unknown metric {s:?}; expected mean, var:B, cvar:B or interval:A,B"
                )))
            }
        };
        metric.validate()?;
        Ok(metric)
    }
}

/// Constant density on `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightPiece {
    pub start: f64,
    pub end: f64,
    pub density: f64,
}

/// Point mass at quantile level `beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightAtom {
    pub beta: f64,
    pub mass: f64,
}

/// A risk weight `ψ`: atoms plus a piecewise-constant density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QbrmWeight {
    atoms: Vec<WeightAtom>,
    pieces: Vec<WeightPiece>,
}

impl QbrmWeight {
    pub fn new(atoms: Vec<WeightAtom>, mut pieces: Vec<WeightPiece>) -> Result<Self> {
        for a in &atoms {
            if !(a.beta > 0.0 && a.beta < 1.0) {
                return Err(Error::invalid(format!("atom location {} is outside (0, 1)", a.beta)));
            }
            if !(a.mass >= 0.0 && a.mass.is_finite()) {
                return Err(Error::invalid(format!("atom mass {} is invalid", a.mass)));
            }
        }
        for p in &pieces {
            if !(0.0 <= p.start && p.start < p.end && p.end <= 1.0) {
                return Err(Error::invalid(format!(
                    "weight piece [{}, {}] is not a subinterval of [0, 1]",
                    p.start, p.end
                )));
            }
            if !(p.density >= 0.0 && p.density.is_finite()) {
                return Err(Error::invalid(format!("piece density {} is invalid", p.density)));
            }
        }
        pieces.sort_by(|a, b| a.start.total_cmp(&b.start));
        if pieces.windows(2).any(|w| w[1].start < w[0].end) {
            return Err(Error::invalid("weight pieces overlap"));
        }
        let total = atoms.iter().map(|a| a.mass).sum::<f64>()
            + pieces.iter().map(|p| p.density * (p.end - p.start)).sum::<f64>();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::invalid(format!("weight has total mass {total}, expected 1")));
        }
        Ok(Self { atoms, pieces })
    }

    pub fn atoms(&self) -> &[WeightAtom] {
        &self.atoms
    }

    pub fn pieces(&self) -> &[WeightPiece] {
        &self.pieces
    }
}

pub fn make_weight(kind: &MetricKind) -> Result<QbrmWeight> {
    kind.validate()?;
    let piece = |start: f64, end: f64| WeightPiece { start, end, density: 1.0 / (end - start) };
    match *kind {
        MetricKind::Mean => QbrmWeight::new(vec![], vec![piece(0.0, 1.0)]),
        MetricKind::Var { beta } => QbrmWeight::new(vec![WeightAtom { beta, mass: 1.0 }], vec![]),
        MetricKind::Cvar { beta } => QbrmWeight::new(vec![], vec![piece(beta, 1.0)]),
        MetricKind::Interval { beta_min, beta_max } => {
            QbrmWeight::new(vec![], vec![piece(beta_min, beta_max)])
        }
    }
}

/// Generalized inverse `inf {x : G(x) >= p}` of the step bound `G`.
///
/// Returns `x_plus` above the top level, which is `+inf` for an unbounded
/// loss.
pub fn quantile_of_bound(bound: &StepCdfLowerBound, p: f64) -> Result<f64> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::invalid(format!("quantile level must lie in (0, 1], got {p}")));
    }
    Ok(step_quantile(bound, p))
}

fn step_quantile(bound: &StepCdfLowerBound, p: f64) -> f64 {
    let idx = bound.levels().partition_point(|&b| b < p);
    bound.breakpoints().get(idx).copied().unwrap_or(bound.x_plus())
}

/// `∫ ψ(p) G⁻¹(p) dp`, integrated exactly over the steps of `G⁻¹`.
///
/// Yields `+inf` when weight falls above the top level of an unbounded
/// bound.
pub fn evaluate_qbrm(bound: &StepCdfLowerBound, weight: &QbrmWeight) -> f64 {
    let mut total = 0.0;
    for atom in &weight.atoms {
        if atom.mass > 0.0 {
            total += atom.mass * step_quantile(bound, atom.beta);
        }
    }
    // G⁻¹ equals breakpoints[i] on (levels[i-1], levels[i]] and x_plus above
    // the top level.
    let levels = bound.levels();
    let xs = bound.breakpoints();
    for piece in &weight.pieces {
        if piece.density == 0.0 {
            continue;
        }
        let mut acc = 0.0;
        let mut lo = 0.0;
        #[allow(clippy::needless_range_loop)]
        for i in 0..=levels.len() {
            let (hi, value) = match levels.get(i) {
                Some(&b) => (b, xs[i]),
                None => (1.0, bound.x_plus()),
            };
            let overlap = piece.end.min(hi) - piece.start.max(lo);
            if overlap > 0.0 {
                acc += overlap * value;
            }
            if hi >= piece.end {
                break;
            }
            lo = hi;
        }
        total += piece.density * acc;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn example_bound() -> StepCdfLowerBound {
        StepCdfLowerBound::from_constraints(&[1.0, 2.0, 3.0], &[0.2, 0.6, 0.9], 4.0).unwrap()
    }

    fn eval(kind: MetricKind, bound: &StepCdfLowerBound) -> f64 {
        evaluate_qbrm(bound, &make_weight(&kind).unwrap())
    }

    /// Midpoint rule on `k` cells over the support of each piece.
    fn grid_integral(bound: &StepCdfLowerBound, weight: &QbrmWeight, k: usize) -> f64 {
        let mut total = 0.0;
        for piece in weight.pieces() {
            let h = (piece.end - piece.start) / k as f64;
            let s: f64 = (0..k)
                .map(|j| quantile_of_bound(bound, piece.start + (j as f64 + 0.5) * h).unwrap())
                .sum();
            total += piece.density * h * s;
        }
        for atom in weight.atoms() {
            total += atom.mass * quantile_of_bound(bound, atom.beta).unwrap();
        }
        total
    }

    fn random_bound(xs: Vec<f64>, ls: Vec<f64>, gap: f64) -> StepCdfLowerBound {
        let mut xs = xs;
        xs.sort_by(f64::total_cmp);
        let mut ls = ls;
        ls.sort_by(f64::total_cmp);
        let x_plus = xs.last().copied().unwrap_or(0.0) + gap;
        StepCdfLowerBound::from_constraints(&xs, &ls, x_plus).unwrap()
    }

    #[test]
    fn weights() {
        let w = make_weight(&MetricKind::Mean).unwrap();
        assert_eq!(w.pieces(), &[WeightPiece { start: 0.0, end: 1.0, density: 1.0 }]);
        assert!(w.atoms().is_empty());
        let w = make_weight(&MetricKind::Cvar { beta: 0.9 }).unwrap();
        assert_eq!(w.pieces().len(), 1);
        assert_eq!((w.pieces()[0].start, w.pieces()[0].end), (0.9, 1.0));
        assert!((w.pieces()[0].density - 10.0).abs() < 1e-12);
        let w = make_weight(&MetricKind::Var { beta: 0.5 }).unwrap();
        assert_eq!(w.atoms(), &[WeightAtom { beta: 0.5, mass: 1.0 }]);
        assert!(make_weight(&MetricKind::Var { beta: 1.0 }).is_err());
        assert!(make_weight(&MetricKind::Interval { beta_min: 0.9, beta_max: 0.8 }).is_err());
    }

    #[test]
    fn weight_validation() {
        let half = WeightPiece { start: 0.0, end: 0.5, density: 1.0 };
        let atom = WeightAtom { beta: 0.7, mass: 0.5 };
        assert!(QbrmWeight::new(vec![atom], vec![half]).is_ok());
        assert!(QbrmWeight::new(vec![], vec![half]).is_err());
        let overlapping = WeightPiece { start: 0.4, end: 0.9, density: 1.0 };
        assert!(QbrmWeight::new(vec![], vec![half, overlapping]).is_err());
        assert!(QbrmWeight::new(vec![WeightAtom { beta: 1.0, mass: 1.0 }], vec![]).is_err());
    }

    #[test]
    fn metric_syntax_round_trips() {
        for s in ["mean", "var:0.9", "cvar:0.9", "interval:0.85,0.95"] {
            let m: MetricKind = s.parse().unwrap();
            assert_eq!(m.to_string(), s);
        }
        assert_eq!("CVaR: 0.5".parse::<MetricKind>().unwrap(), MetricKind::Cvar { beta: 0.5 });
        for bad in ["median", "var", "var:x", "cvar:1.5", "interval:0.9", "mean:0.1"] {
            assert!(bad.parse::<MetricKind>().is_err(), "{bad}");
        }
    }

    #[test]
    fn quantile_examples() {
        let g = example_bound();
        assert_eq!(quantile_of_bound(&g, 0.1).unwrap(), 1.0);
        assert_eq!(quantile_of_bound(&g, 0.5).unwrap(), 2.0);
        assert_eq!(quantile_of_bound(&g, 0.95).unwrap(), 4.0);
        // Left-closed at a level: p = b_i maps to x_(i).
        assert_eq!(quantile_of_bound(&g, 0.6).unwrap(), 2.0);
        assert_eq!(quantile_of_bound(&g, 1.0).unwrap(), 4.0);
        assert!(quantile_of_bound(&g, 0.0).is_err());
        assert!(quantile_of_bound(&g, 1.2).is_err());
    }

    #[test]
    fn qbrm_examples() {
        let g = example_bound();
        assert!((eval(MetricKind::Mean, &g) - 2.3).abs() < 1e-12);
        assert!((eval(MetricKind::Cvar { beta: 0.9 }, &g) - 4.0).abs() < 1e-12);
        assert!((eval(MetricKind::Interval { beta_min: 0.5, beta_max: 0.9 }, &g) - 2.75).abs() < 1e-12);
        assert_eq!(eval(MetricKind::Var { beta: 0.6 }, &g), 2.0);
    }

    #[test]
    fn unbounded_tail_is_infinite() {
        let g = StepCdfLowerBound::from_constraints(&[1.0, 2.0], &[0.3, 0.8], f64::INFINITY).unwrap();
        assert_eq!(eval(MetricKind::Mean, &g), f64::INFINITY);
        assert_eq!(eval(MetricKind::Cvar { beta: 0.9 }, &g), f64::INFINITY);
        // Weight entirely below the top level stays finite.
        assert!((eval(MetricKind::Interval { beta_min: 0.2, beta_max: 0.6 }, &g) - 1.75).abs() < 1e-12);
        assert_eq!(eval(MetricKind::Var { beta: 0.8 }, &g), 2.0);
    }

    #[test]
    fn matches_grid_integration() {
        let g = StepCdfLowerBound::from_constraints(
            &[0.1, 0.25, 0.4, 0.7, 0.75],
            &[0.05, 0.33, 0.61, 0.87, 0.93],
            1.0,
        )
        .unwrap();
        for kind in [
            MetricKind::Mean,
            MetricKind::Cvar { beta: 0.9 },
            MetricKind::Interval { beta_min: 0.3, beta_max: 0.95 },
        ] {
            let w = make_weight(&kind).unwrap();
            let exact = evaluate_qbrm(&g, &w);
            let approx = grid_integral(&g, &w, 200_000);
            assert!((exact - approx).abs() <= 1e-5 * exact, "{kind}: {exact} vs {approx}");
        }
    }

    #[test]
    fn empty_bound_is_all_tail() {
        let g = StepCdfLowerBound::from_constraints(&[0.2, 0.4], &[0.0, 0.0], 0.9).unwrap();
        assert_eq!(eval(MetricKind::Mean, &g), 0.9);
        assert_eq!(eval(MetricKind::Var { beta: 0.01 }, &g), 0.9);
    }

    proptest! {
        #[test]
        fn dominating_bound_gives_smaller_risk(
            xs in prop::collection::vec(0.0f64..10.0, 1..12),
            ls in prop::collection::vec(0.0f64..0.99, 1..12),
            lift in 0.0f64..0.2,
            shift in 0.0f64..2.0,
            gap in 0.0f64..3.0,
        ) {
            let n = xs.len().min(ls.len());
            let low = random_bound(xs[..n].to_vec(), ls[..n].to_vec(), gap);
            // Raise levels and move breakpoints left: pointwise larger CDF bound.
            let raised: Vec<f64> = ls[..n].iter().map(|l| (l + lift).min(0.995)).collect();
            let moved: Vec<f64> = xs[..n].iter().map(|x| x - shift).collect();
            let high = random_bound(moved, raised, gap);
            prop_assert!(high.dominates(&low));
            for kind in [
                MetricKind::Mean,
                MetricKind::Var { beta: 0.5 },
                MetricKind::Cvar { beta: 0.8 },
                MetricKind::Interval { beta_min: 0.1, beta_max: 0.6 },
            ] {
                prop_assert!(eval(kind, &high) <= eval(kind, &low) + 1e-12);
            }
            for j in 1..=50 {
                let p = j as f64 / 50.0;
                prop_assert!(quantile_of_bound(&high, p).unwrap() <= quantile_of_bound(&low, p).unwrap());
            }
        }

        #[test]
        fn affine_equivariance(
            xs in prop::collection::vec(-5.0f64..5.0, 1..10),
            ls in prop::collection::vec(0.01f64..0.99, 1..10),
            alpha in 0.1f64..10.0,
            gamma in -10.0f64..10.0,
        ) {
            let n = xs.len().min(ls.len());
            let g = random_bound(xs[..n].to_vec(), ls[..n].to_vec(), 1.0);
            let t = |x: f64| alpha * x + gamma;
            let xs_t: Vec<f64> = g.breakpoints().iter().map(|&x| t(x)).collect();
            let h = StepCdfLowerBound::from_constraints(&xs_t, g.levels(), t(g.x_plus())).unwrap();
            for kind in [
                MetricKind::Mean,
                MetricKind::Var { beta: 0.3 },
                MetricKind::Cvar { beta: 0.9 },
                MetricKind::Interval { beta_min: 0.2, beta_max: 0.7 },
            ] {
                let (a, b) = (t(eval(kind, &g)), eval(kind, &h));
                prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()), "{kind}: {a} vs {b}");
            }
        }

        #[test]
        fn var_atom_equals_quantile(
            xs in prop::collection::vec(0.0f64..1.0, 1..10),
            ls in prop::collection::vec(0.0f64..0.99, 1..10),
            beta in 0.001f64..0.999,
        ) {
            let n = xs.len().min(ls.len());
            let g = random_bound(xs[..n].to_vec(), ls[..n].to_vec(), 0.5);
            prop_assert_eq!(eval(MetricKind::Var { beta }, &g), quantile_of_bound(&g, beta).unwrap());
        }
    }
}

//! Method identifiers and `x_plus` resolution.

use anyhow::{bail, Context, Result};
use quantbound::bounds::{default_grid_size, pointwise_grid, BoundMethod};
use quantbound::risk::MetricKind;

/// Parses `ks`, `bj`, `bj-one-sided[:B]`, `bj-two-sided[:A,B]`, `dkw` or
/// `order-stats`. Missing truncation levels and point-wise grids are derived
/// from the target metric.
pub fn parse_method(s: &str, target: &MetricKind, grid_size: Option<usize>) -> Result<BoundMethod> {
    let (name, args) = match s.split_once(':') {
        Some((n, a)) => (n.trim(), Some(a.trim())),
        None => (s.trim(), None),
    };
    let number = |v: &str| -> Result<f64> {
        v.trim().parse().with_context(|| format!("bad level {v:?} in method {s:?}"))
    };
    let grid = || -> Result<Vec<f64>> {
        let size = grid_size.unwrap_or_else(|| default_grid_size(target));
        Ok(pointwise_grid(target, size)?)
    };
    let name = name.to_ascii_lowercase();
    if args.is_some() && !name.starts_with("bj-") {
        bail!("method {name:?} takes no parameters");
    }
    match name.as_str() {
        "ks" => Ok(BoundMethod::Ks),
        "bj" | "berk-jones" => Ok(BoundMethod::BerkJones),
        "bj-one-sided" => {
            let beta_min = match args {
                Some(a) => number(a)?,
                None => match *target {
                    MetricKind::Var { beta } | MetricKind::Cvar { beta } => beta,
                    MetricKind::Interval { beta_min, .. } => beta_min,
                    MetricKind::Mean => bail!(
                        "bj-one-sided needs a level: pass bj-one-sided:B or a var/cvar/interval target"
                    ),
                },
            };
            Ok(BoundMethod::OneSidedBerkJones { beta_min })
        }
        "bj-two-sided" => {
            let (beta_min, beta_max) = match args {
                Some(a) => {
                    let (lo, hi) = a
                        .split_once(',')
                        .with_context(|| format!("method {s:?} needs two levels A,B"))?;
                    (number(lo)?, number(hi)?)
                }
                None => match *target {
                    MetricKind::Interval { beta_min, beta_max } => (beta_min, beta_max),
                    MetricKind::Var { beta } => (beta, beta),
                    _ => bail!(
                        "bj-two-sided needs levels: pass bj-two-sided:A,B or a var/interval target"
                    ),
                },
            };
            Ok(BoundMethod::TwoSidedBerkJones { beta_min, beta_max })
        }
        "dkw" => Ok(BoundMethod::Dkw { betas: grid()? }),
        "order-stats" => Ok(BoundMethod::OrderStats { betas: grid()? }),
        _ => bail!(
            "unknown method {s:?}; expected ks, bj, bj-one-sided[:B], bj-two-sided[:A,B], dkw or order-stats"
        ),
    }
}

fn needs_tail(metric: &MetricKind) -> bool {
    matches!(metric, MetricKind::Mean | MetricKind::Cvar { .. })
}

/// An explicit `x_plus` wins; `--bounded-unit-loss` means 1; otherwise the
/// loss is unbounded, which is refused for targets that always integrate up
/// to the top quantile. Report metrics may still come out infinite.
pub fn resolve_x_plus(explicit: Option<f64>, bounded_unit: bool, target: &MetricKind) -> Result<f64> {
    match (explicit, bounded_unit) {
        (Some(_), true) => bail!("pass either --x-plus or --bounded-unit-loss, not both"),
        (Some(x), false) => Ok(x),
        (None, true) => Ok(1.0),
        (None, false) => {
            if needs_tail(target) {
                bail!("target {target} needs a loss upper bound: pass --x-plus or --bounded-unit-loss");
            }
            Ok(f64::INFINITY)
        }
    }
}

pub fn parse_x_plus(s: &str) -> std::result::Result<f64, String> {
    match s.trim().to_ascii_lowercase().as_str() {
        "inf" | "+inf" | "infinity" => Ok(f64::INFINITY),
        other => other.parse::<f64>().map_err(|e| format!("{e}")),
    }
}

pub fn parse_metric(s: &str) -> std::result::Result<MetricKind, String> {
    s.parse::<MetricKind>().map_err(|e| e.to_string())
}

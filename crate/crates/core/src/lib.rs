//! Distribution-free lower confidence bounds on a loss CDF, and the upper
//! confidence bounds they imply for quantile-based risk measures.
//!
//! The pipeline is:
//!
//! 1. pick a minimum-type goodness-of-fit statistic over the uniform order
//!    statistics ([`bounds::Statistic`]),
//! 2. calibrate its critical value against the exact one-sided
//!    non-crossing probability ([`crossing::noncrossing_prob`]),
//! 3. invert it into one lower bound per order statistic
//!    ([`bounds::BoundaryVector`]) and attach those levels to the sorted
//!    losses ([`bounds::StepCdfLowerBound`]),
//! 4. integrate the implied quantile upper bound against any weight
//!    ([`risk::QbrmWeight`]): mean, VaR, CVaR, VaR-interval, or a custom one.
//!
//! [`selection`] runs the same construction over a family of predictors
//! with a Bonferroni-corrected confidence level and picks the one with the
//! smallest bound on a target measure. [`simulation`] contains the Monte
//! Carlo harness used to check coverage empirically.

pub mod bounds;
pub mod crossing;
mod error;
pub mod risk;
pub mod selection;
pub mod simulation;
pub mod special;

pub use error::{Error, Result};

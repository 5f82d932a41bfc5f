//! JSON report types. The schema is documented in the README.

use std::collections::BTreeMap;
use std::fmt;

use quantbound::bounds::{BoundMethod, CalibratedBoundary, GofStatisticSpec, StepCdfLowerBound};
use quantbound::crossing::BoundaryVector;
use quantbound::risk::MetricKind;
use quantbound::selection::SelectionReport;
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

/// A finite number, or `+inf` written as the string `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Num(pub f64);

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0 == f64::INFINITY {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Num {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct NumVisitor;
        impl Visitor<'_> for NumVisitor {
            type Value = Num;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a number or \"inf\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Num, E> {
                Ok(Num(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Num, E> {
                Ok(Num(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Num, E> {
                Ok(Num(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Num, E> {
                match v {
                    "inf" => Ok(Num(f64::INFINITY)),
                    _ => Err(E::invalid_value(de::Unexpected::Str(v), &self)),
                }
            }
        }
        d.deserialize_any(NumVisitor)
    }
}

/// SHA-256 of the boundary entries as little-endian IEEE-754 doubles.
pub fn boundary_checksum(boundary: &BoundaryVector) -> String {
    let mut hasher = Sha256::new();
    for v in boundary.as_slice() {
        hasher.update(v.to_le_bytes());
    }
    format!("{:x}", hasher.finalize())
}

/// How the boundary was obtained; enough to rebuild it exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub method: BoundMethod,
    pub method_label: String,
    pub delta: f64,
    pub delta_prime: f64,
    pub n: usize,
    pub m: usize,
    pub statistic: Option<GofStatisticSpec>,
    pub critical_value: Option<f64>,
    pub grid_indices: Option<Vec<usize>>,
    pub boundary_checksum: String,
    pub rng: Option<String>,
}

impl Provenance {
    pub fn new(c: &CalibratedBoundary, delta: f64, m: usize) -> Self {
        Self {
            method: c.method.clone(),
            method_label: c.method.to_string(),
            delta,
            delta_prime: c.delta,
            n: c.n,
            m,
            statistic: c.statistic,
            critical_value: c.critical_value,
            grid_indices: c.grid_indices.clone(),
            boundary_checksum: boundary_checksum(&c.boundary),
            rng: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepBound {
    pub breakpoints: Vec<f64>,
    pub levels: Vec<f64>,
    pub x_plus: Num,
}

impl From<&StepCdfLowerBound> for StepBound {
    fn from(g: &StepCdfLowerBound) -> Self {
        Self {
            breakpoints: g.breakpoints().to_vec(),
            levels: g.levels().to_vec(),
            x_plus: Num(g.x_plus()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricEntry {
    pub metric: String,
    pub bound: Num,
}

pub fn warnings_for(entries: &[MetricEntry], context: &str) -> Vec<String> {
    entries
        .iter()
        .filter(|e| e.bound.0.is_infinite())
        .map(|e| {
            format!(
                "{context}{} bound is infinite: its weight reaches above the top certified level \
                 and x_plus is unbounded",
                e.metric
            )
        })
        .collect()
}

pub fn metric_entry(metric: &MetricKind, bound: f64) -> MetricEntry {
    MetricEntry { metric: metric.to_string(), bound: Num(bound) }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub command: String,
    pub provenance: Provenance,
    pub column: String,
    pub bound: StepBound,
    pub metrics: Vec<MetricEntry>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorEntry {
    pub label: String,
    pub target_bound: Num,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionEntry {
    pub provenance: Provenance,
    pub chosen: String,
    pub target: String,
    pub predictors: Vec<PredictorEntry>,
    pub metrics: Vec<MetricEntry>,
    pub bound: StepBound,
    pub warnings: Vec<String>,
}

impl From<&SelectionReport> for SelectionEntry {
    fn from(r: &SelectionReport) -> Self {
        let metrics: Vec<MetricEntry> =
            r.metric_bounds.iter().map(|m| metric_entry(&m.metric, m.bound)).collect();
        let warnings = warnings_for(&metrics, &format!("predictor {:?}: ", r.chosen));
        Self {
            provenance: Provenance::new(&r.calibration, r.delta, r.m),
            chosen: r.chosen.clone(),
            target: r.target.to_string(),
            predictors: r
                .target_bounds
                .iter()
                .map(|p| PredictorEntry { label: p.label.clone(), target_bound: Num(p.bound) })
                .collect(),
            metrics,
            bound: StepBound::from(&r.chosen_bound),
            warnings,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectReport {
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub selection: Option<SelectionEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub group_column: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub joint_groups: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub groups: Option<BTreeMap<String, SelectionEntry>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalReport {
    pub command: String,
    pub provenance: Provenance,
    pub boundary: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationRow {
    pub method: String,
    pub metric: String,
    pub loss_violation_rate: f64,
    pub lcb_violation_rate: f64,
    pub trials: usize,
    pub implication_failures: usize,
}

//! Set-valued prediction losses. Class labels are 1-based.

use std::collections::BTreeSet;

use crate::error::{Error, Result};

fn label_set(labels: &[usize], k: usize, what: &str) -> Result<BTreeSet<usize>> {
    if let Some(&bad) = labels.iter().find(|&&l| l == 0 || l > k) {
        return Err(Error::invalid(format!("{what} label {bad} outside 1..={k}")));
    }
    Ok(labels.iter().copied().collect())
}

/// Labels whose score is at least `threshold`.
pub fn prediction_set(scores: &[f64], threshold: f64) -> Vec<usize> {
    scores
        .iter()
        .enumerate()
        .filter(|(_, &s)| s >= threshold)
        .map(|(i, _)| i + 1)
        .collect()
}

/// `1 - (sensitivity + specificity) / 2` of a predicted label set against a
/// true label set over `k` classes.
pub fn balanced_accuracy_loss(predicted: &[usize], truth: &[usize], k: usize) -> Result<f64> {
    let pred = label_set(predicted, k, "predicted")?;
    let truth = label_set(truth, k, "true")?;
    if truth.is_empty() {
        return Err(Error::invalid("true label set is empty"));
    }
    if truth.len() == k {
        return Err(Error::invalid("true label set covers every class; specificity is undefined"));
    }
    let hits = pred.intersection(&truth).count() as f64;
    let false_pos = pred.difference(&truth).count() as f64;
    let negatives = (k - truth.len()) as f64;
    let sens = hits / truth.len() as f64;
    let spec = (negatives - false_pos) / negatives;
    Ok(1.0 - 0.5 * (sens + spec))
}

/// `(1 - mu_y) (1 - specificity) + mu_y (1 - sensitivity)` for a single true
/// label `y`, with one weight per class in `mu`.
pub fn weighted_accuracy_loss(predicted: &[usize], truth: usize, mu: &[f64]) -> Result<f64> {
    let k = mu.len();
    if truth == 0 || truth > k {
        return Err(Error::invalid(format!("no weight for true class {truth} (have {k})")));
    }
    if k < 2 {
        return Err(Error::invalid("need at least two classes"));
    }
    if let Some(w) = mu.iter().find(|w| !(0.0..=1.0).contains(*w)) {
        return Err(Error::invalid(format!("class weight {w} outside [0, 1]")));
    }
    let pred = label_set(predicted, k, "predicted")?;
    let sens = if pred.contains(&truth) { 1.0 } else { 0.0 };
    let false_pos = pred.iter().filter(|&&l| l != truth).count() as f64;
    let spec = ((k - 1) as f64 - false_pos) / (k - 1) as f64;
    let w = mu[truth - 1];
    Ok((1.0 - w) * (1.0 - spec) + w * (1.0 - sens))
}

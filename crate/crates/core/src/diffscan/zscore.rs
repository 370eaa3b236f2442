use serde::{Deserialize, Serialize};

use super::DifferentialResult;
use crate::error::{Error, Result};
use crate::metrics::Metric;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZEntry {
    pub label: String,
    pub accuracy: f64,
    pub z: f64,
    /// Share of the training records in this chunk.
    pub fraction: f64,
}

/// Standardized chunk accuracies.
///
/// Positive z always means removing the chunk hurt less than average (the
/// chunk matters less). For error metrics the accuracies are negated before
/// standardizing, which `negated` records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZScoreTable {
    pub attribute: String,
    pub metric: Metric,
    pub negated: bool,
    /// Mean and population standard deviation of the (oriented) accuracies.
    pub mean: f64,
    pub sigma: f64,
    /// Set when all accuracies coincide and every z is 0.
    pub degenerate: bool,
    pub entries: Vec<ZEntry>,
}

impl ZScoreTable {
    pub fn z(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.z).collect()
    }

    pub fn get(&self, label: &str) -> Option<&ZEntry> {
        self.entries.iter().find(|e| e.label == label)
    }
}

pub fn zscores(result: &DifferentialResult) -> Result<ZScoreTable> {
    let n = result.n_train.max(1) as f64;
    let fractions: Vec<f64> = result.chunks.iter().map(|c| c.size as f64 / n).collect();
    zscores_from(
        &result.attribute,
        result.metric,
        &result.labels(),
        &result.accuracies(),
        &fractions,
    )
}

/// `z_i = (a_i - mean) / sigma` with the population standard deviation.
pub fn zscores_from(
    attribute: &str,
    metric: Metric,
    labels: &[String],
    accuracies: &[f64],
    fractions: &[f64],
) -> Result<ZScoreTable> {
    if accuracies.len() < 2 {
        return Err(Error::invalid("z-scores need at least two chunks"));
    }
    if labels.len() != accuracies.len() || fractions.len() != accuracies.len() {
        return Err(Error::invalid(
            "labels, accuracies and fractions differ in length",
        ));
    }
    let negated = !metric.higher_is_better();
    let oriented: Vec<f64> = accuracies
        .iter()
        .map(|&a| if negated { -a } else { a })
        .collect();
    let k = oriented.len() as f64;
    let mean = oriented.iter().sum::<f64>() / k;
    let sigma = (oriented.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / k).sqrt();
    // Equal inputs can leave a rounding-level sigma behind.
    let degenerate = oriented.iter().all(|&a| a == oriented[0])
        || !sigma.is_finite()
        || sigma <= 4.0 * f64::EPSILON * mean.abs();
    let entries = labels
        .iter()
        .zip(accuracies)
        .zip(&oriented)
        .zip(fractions)
        .map(|(((label, &accuracy), &o), &fraction)| ZEntry {
            label: label.clone(),
            accuracy,
            z: if degenerate { 0.0 } else { (o - mean) / sigma },
            fraction,
        })
        .collect();
    Ok(ZScoreTable {
        attribute: attribute.to_string(),
        metric,
        negated,
        mean,
        sigma,
        degenerate,
        entries,
    })
}

//! Differential data analysis: drop one chunk of every user's training data
//! at a time, retrain the fixed recommender from scratch, and compare the
//! accuracies on an unchanged test set.

mod baseline;
mod stability;
mod zscore;

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attributes::ChunkPartition;
use crate::dataset::{Dataset, Record};
use crate::error::{Error, Result};
use crate::metrics::Metric;
use crate::recommend::Evaluator;

pub use baseline::{random_removal_baseline, BaselineStats};
pub use stability::{
    stability_by_data, stability_by_users, stability_from_splits, StabilityGroup, StabilityReport,
};
pub use zscore::{zscores, zscores_from, ZEntry, ZScoreTable};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkAccuracy {
    pub label: String,
    pub accuracy: f64,
    /// Records removed (or added) for this reading.
    pub size: usize,
    /// Test users left without training data.
    pub cold_users: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifferentialResult {
    pub attribute: String,
    pub metric: Metric,
    pub full_accuracy: f64,
    pub n_train: usize,
    pub chunks: Vec<ChunkAccuracy>,
}

impl DifferentialResult {
    pub fn accuracies(&self) -> Vec<f64> {
        self.chunks.iter().map(|c| c.accuracy).collect()
    }

    pub fn labels(&self) -> Vec<String> {
        self.chunks.iter().map(|c| c.label.clone()).collect()
    }

    /// Chunk labels from most to least important: the chunk whose removal
    /// hurt accuracy most comes first.
    pub fn importance_order(&self) -> Vec<String> {
        let sign = if self.metric.higher_is_better() {
            1.0
        } else {
            -1.0
        };
        let mut idx: Vec<usize> = (0..self.chunks.len()).collect();
        idx.sort_by(|&a, &b| {
            (sign * self.chunks[a].accuracy).total_cmp(&(sign * self.chunks[b].accuracy))
        });
        idx.into_iter()
            .map(|i| self.chunks[i].label.clone())
            .collect()
    }
}

/// `chunk,accuracy,zscore` rows.
pub fn write_result_csv<W: Write>(table: &ZScoreTable, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["chunk", "accuracy", "zscore"])?;
    for e in &table.entries {
        w.write_record([e.label.clone(), e.accuracy.to_string(), e.z.to_string()])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Accuracy with each chunk removed from all users at once, plus the
/// full-data accuracy. Chunk jobs run in parallel; every retrain uses the
/// evaluator's own fixed seed, so results do not depend on scheduling and an
/// empty chunk reproduces the full-data accuracy exactly.
pub fn differential_run<R, E>(
    train: &Dataset<R>,
    test: &Dataset<R>,
    partition: &ChunkPartition,
    evaluator: &E,
) -> Result<DifferentialResult>
where
    R: Record,
    E: Evaluator<R> + ?Sized,
{
    if partition.n_records != train.len() {
        return Err(Error::invalid(format!(
            "partition built over {} records but training set has {}",
            partition.n_records,
            train.len()
        )));
    }
    let full = evaluator.evaluate(train, test)?;
    let chunks = partition
        .chunks
        .par_iter()
        .map(|chunk| {
            let eval = evaluator.evaluate(&train.without(&chunk.records), test)?;
            Ok(ChunkAccuracy {
                label: chunk.label.clone(),
                accuracy: eval.value(),
                size: chunk.records.len(),
                cold_users: eval.cold_users,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let cold: usize = chunks.iter().map(|c| c.cold_users).max().unwrap_or(0);
    if cold > full.cold_users {
        log::info!(
            "{}: up to {} test users lost all training data after chunk removal",
            partition.attribute,
            cold - full.cold_users
        );
    }
    Ok(DifferentialResult {
        attribute: partition.attribute.clone(),
        metric: evaluator.metric(),
        full_accuracy: full.value(),
        n_train: train.len(),
        chunks,
    })
}

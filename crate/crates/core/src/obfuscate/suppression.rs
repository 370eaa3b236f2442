use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::attributes::ChunkPartition;
use crate::dataset::{Dataset, ItemId, Record};
use crate::diffscan::ZScoreTable;
use crate::error::{Error, Result};
use crate::seed::Seed;

/// Uneven suppression probability before normalization.
///
/// `t = e^{βz} / (e^{βz} + e^{-βz})`; below one half the probability rises
/// linearly from 0 to α, above it from α to 1.
pub fn suppression_prob(z: f64, alpha: f64, beta: f64) -> f64 {
    let t = 1.0 / (1.0 + (-2.0 * beta * z).exp());
    if t == 0.5 {
        alpha
    } else if t < 0.5 {
        2.0 * alpha * t
    } else {
        2.0 * (1.0 - alpha) * t + 2.0 * alpha - 1.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub label: String,
    pub z: f64,
    pub t: f64,
    pub p_hat: f64,
    /// Normalized probability before clamping.
    pub p_raw: f64,
    /// Deletion probability applied, in `[0, 1]`.
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuppressionPlan {
    pub attribute: String,
    pub alpha: f64,
    pub beta: f64,
    /// Normalizer: `p = p_hat / k`. Equal to 1 when no rescaling was needed.
    pub k: f64,
    /// Mean probability lost to clamping, `alpha - mean(p)`.
    pub clamp_shortfall: f64,
    pub entries: Vec<PlanEntry>,
}

impl SuppressionPlan {
    pub fn probabilities(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.p).collect()
    }

    pub fn labels(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.label.clone()).collect()
    }
}

/// Per-chunk deletion probabilities whose mean is `alpha`.
pub fn build_suppression_plan(
    table: &ZScoreTable,
    alpha: f64,
    beta: f64,
) -> Result<SuppressionPlan> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid(format!("alpha {alpha} not in [0, 1]")));
    }
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::invalid(format!(
            "beta {beta} must be finite and non-negative"
        )));
    }
    if table.entries.is_empty() {
        return Err(Error::Empty("z-score table"));
    }
    let raw: Vec<(f64, f64)> = table
        .entries
        .iter()
        .map(|e| {
            let t = 1.0 / (1.0 + (-2.0 * beta * e.z).exp());
            (t, suppression_prob(e.z, alpha, beta))
        })
        .collect();
    let n = raw.len() as f64;
    let mean_hat = raw.iter().map(|r| r.1).sum::<f64>() / n;
    let k = if alpha == 0.0 || raw.iter().all(|r| r.1 == alpha) {
        1.0
    } else if mean_hat > 0.0 {
        mean_hat / alpha
    } else {
        return Err(Error::invalid(
            "every unnormalized probability is zero; cannot reach a positive alpha",
        ));
    };
    let entries: Vec<PlanEntry> = table
        .entries
        .iter()
        .zip(raw)
        .map(|(e, (t, p_hat))| {
            let p_raw = if alpha == 0.0 { 0.0 } else { p_hat / k };
            PlanEntry {
                label: e.label.clone(),
                z: e.z,
                t,
                p_hat,
                p_raw,
                p: p_raw.clamp(0.0, 1.0),
            }
        })
        .collect();
    let clamp_shortfall = entries.iter().map(|e| e.p_raw - e.p).sum::<f64>() / n;
    if clamp_shortfall > 0.0 {
        let clamped_mean = alpha - clamp_shortfall;
        log::warn!("suppression plan clamped; realized mean {clamped_mean:.4} < alpha {alpha}");
    }
    Ok(SuppressionPlan {
        attribute: table.attribute.clone(),
        alpha,
        beta,
        k,
        clamp_shortfall,
        entries,
    })
}

/// Which records of `ds` are deleted. Every (chunk, point) group of records
/// is kept or deleted as a whole with its chunk's probability; records
/// outside the partition are kept.
pub fn suppression_mask<R: Record>(
    ds: &Dataset<R>,
    partition: &ChunkPartition,
    plan: &SuppressionPlan,
    seed: Seed,
) -> Result<Vec<bool>> {
    if partition.n_records != ds.len() {
        return Err(Error::invalid("partition does not belong to this dataset"));
    }
    if plan.labels() != partition.labels() {
        return Err(Error::invalid(format!(
            "plan chunks {:?} do not match partition chunks {:?}",
            plan.labels(),
            partition.labels()
        )));
    }
    let probs = plan.probabilities();
    let chunk_of = partition.chunk_of();
    let mut mask = vec![false; ds.len()];
    for user in ds.users() {
        let mut rng = seed.rng(&format!("suppress/{user}"));
        let mut groups: BTreeMap<(ItemId, usize), Vec<usize>> = BTreeMap::new();
        for (item, idxs) in ds.user_points(user) {
            for i in idxs {
                if let Some(c) = chunk_of[i] {
                    groups.entry((item, c)).or_default().push(i);
                }
            }
        }
        for ((_, c), idxs) in groups {
            if rng.random::<f64>() < probs[c] {
                for i in idxs {
                    mask[i] = true;
                }
            }
        }
    }
    Ok(mask)
}

/// Deletes each point of chunk `c` independently with probability `p(c)`.
pub fn suppress<R: Record>(
    ds: &Dataset<R>,
    partition: &ChunkPartition,
    plan: &SuppressionPlan,
    seed: Seed,
) -> Result<Dataset<R>> {
    Ok(ds.without_mask(&suppression_mask(ds, partition, plan, seed)?))
}

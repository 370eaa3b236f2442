use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Record};
use crate::error::{Error, Result};
use crate::recommend::Evaluator;
use crate::seed::Seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineStats {
    pub fraction: f64,
    pub n_trials: usize,
    pub mean: f64,
    /// Sample standard deviation over trials.
    pub std: f64,
    pub trials: Vec<f64>,
}

impl BaselineStats {
    /// Whether `accuracy` lies within `k` standard deviations of the mean.
    pub fn within(&self, accuracy: f64, k: f64) -> bool {
        (accuracy - self.mean).abs() <= k * self.std
    }
}

/// Record indexes of `round(n * fraction)` uniformly chosen points per user.
fn random_points<R: Record>(
    ds: &Dataset<R>,
    fraction: f64,
    seed: Seed,
    trial: usize,
) -> Vec<usize> {
    let mut out = Vec::new();
    for user in ds.users() {
        let points: Vec<Vec<usize>> = ds.user_points(user).into_values().collect();
        let k = ((points.len() as f64) * fraction).round() as usize;
        if k == 0 {
            continue;
        }
        let mut rng = seed.rng(&format!("baseline/{trial}/{user}"));
        for pick in index::sample(&mut rng, points.len(), k.min(points.len())) {
            out.extend(&points[pick]);
        }
    }
    out
}

/// Accuracy spread when the same share of every user's training points is
/// removed at random instead of by attribute.
pub fn random_removal_baseline<R, E>(
    train: &Dataset<R>,
    test: &Dataset<R>,
    fraction: f64,
    n_trials: usize,
    evaluator: &E,
    seed: Seed,
) -> Result<BaselineStats>
where
    R: Record,
    E: Evaluator<R> + ?Sized,
{
    if n_trials < 2 {
        return Err(Error::invalid("baseline needs at least two trials"));
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::invalid(format!(
            "removal fraction {fraction} not in (0, 1)"
        )));
    }
    let trials = (0..n_trials)
        .into_par_iter()
        .map(|t| {
            let removed = random_points(train, fraction, seed, t);
            Ok(evaluator.evaluate(&train.without(&removed), test)?.value())
        })
        .collect::<Result<Vec<f64>>>()?;
    let n = trials.len() as f64;
    let mean = trials.iter().sum::<f64>() / n;
    let std = (trials.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    Ok(BaselineStats {
        fraction,
        n_trials,
        mean,
        std,
        trials,
    })
}

use serde::{Deserialize, Serialize};

use super::{differential_run, DifferentialResult};
use crate::attributes::{AttributeConfig, Partitionable};
use crate::dataset::{holdout_split, kfold_points, user_groups, Dataset, SplitPair};
use crate::error::{Error, Result};
use crate::recommend::Evaluator;
use crate::seed::Seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityGroup {
    pub label: String,
    pub n_users: usize,
    pub result: DifferentialResult,
    /// Mean chunk accuracy, subtracted to center the curve.
    pub offset: f64,
    pub centered: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub kind: String,
    pub groups: Vec<StabilityGroup>,
}

impl StabilityReport {
    /// Per group, chunk labels from most to least important.
    pub fn importance_orders(&self) -> Vec<Vec<String>> {
        self.groups
            .iter()
            .map(|g| g.result.importance_order())
            .collect()
    }
}

/// Differential run on each labelled split; every split is partitioned by
/// the same attribute config.
pub fn stability_from_splits<R, E>(
    kind: &str,
    splits: &[(String, SplitPair<R>)],
    attr: &AttributeConfig,
    evaluator: &E,
) -> Result<StabilityReport>
where
    R: Partitionable,
    E: Evaluator<R> + ?Sized,
{
    let mut groups = Vec::with_capacity(splits.len());
    for (label, split) in splits {
        if split.train.is_empty() || split.test.is_empty() {
            return Err(Error::invalid(format!(
                "group {label} is too small to evaluate"
            )));
        }
        let partition = R::partition(&split.train, attr)?;
        let result = differential_run(&split.train, &split.test, &partition, evaluator)?;
        let acc = result.accuracies();
        let offset = acc.iter().sum::<f64>() / acc.len().max(1) as f64;
        groups.push(StabilityGroup {
            label: label.clone(),
            n_users: split.train.n_users(),
            centered: acc.iter().map(|a| a - offset).collect(),
            offset,
            result,
        });
    }
    Ok(StabilityReport {
        kind: kind.to_string(),
        groups,
    })
}

/// Splits the users into `n_groups` disjoint sets and repeats the
/// differential run inside each, with a per-user holdout of `test_fraction`.
pub fn stability_by_users<R, E>(
    ds: &Dataset<R>,
    n_groups: usize,
    test_fraction: f64,
    attr: &AttributeConfig,
    evaluator: &E,
    seed: Seed,
) -> Result<StabilityReport>
where
    R: Partitionable,
    E: Evaluator<R> + ?Sized,
{
    let groups = user_groups(ds, n_groups, seed.derive("stability-users"))?;
    let split_seed = seed.derive("stability-holdout");
    let splits = groups
        .iter()
        .enumerate()
        .map(|(g, users)| {
            let part = ds.restrict_users(users);
            Ok((
                format!("group-{}", g + 1),
                holdout_split(&part, test_fraction, split_seed)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    stability_from_splits("users", &splits, attr, evaluator)
}

/// Per-user `n_folds`-fold split of the points; each fold serves once as the
/// test set with the rest as training data.
pub fn stability_by_data<R, E>(
    ds: &Dataset<R>,
    n_folds: usize,
    attr: &AttributeConfig,
    evaluator: &E,
    seed: Seed,
) -> Result<StabilityReport>
where
    R: Partitionable,
    E: Evaluator<R> + ?Sized,
{
    let folds = kfold_points(ds, n_folds, seed.derive("stability-data"))?;
    let splits: Vec<(String, SplitPair<R>)> = folds
        .iter()
        .enumerate()
        .map(|(f, idx)| {
            (
                format!("fold-{}", f + 1),
                SplitPair {
                    train: ds.without(idx),
                    test: ds.select(idx),
                    seed,
                },
            )
        })
        .collect();
    stability_from_splits("data", &splits, attr, evaluator)
}

//! Accuracy measures for Top-N lists and rating predictions.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{ItemId, UserId};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Precision,
    Recall,
    Rmse,
    Mae,
}

impl Metric {
    pub fn higher_is_better(self) -> bool {
        matches!(self, Metric::Precision | Metric::Recall)
    }

    pub fn is_ranking(self) -> bool {
        self.higher_is_better()
    }

    pub const ALL: [Metric; 4] = [Metric::Precision, Metric::Recall, Metric::Rmse, Metric::Mae];
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Precision => "precision",
            Metric::Recall => "recall",
            Metric::Rmse => "rmse",
            Metric::Mae => "mae",
        })
    }
}

impl FromStr for Metric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "precision" => Ok(Metric::Precision),
            "recall" => Ok(Metric::Recall),
            "rmse" => Ok(Metric::Rmse),
            "mae" => Ok(Metric::Mae),
            other => Err(Error::invalid(format!(
                "unknown metric `{other}` (expected precision, recall, rmse or mae)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub metric: String,
    pub value: f64,
    pub n_users: usize,
    pub n_predictions: usize,
    /// Users skipped because they had nothing to evaluate.
    pub excluded_users: usize,
}

fn hits(list: &[ItemId], n: usize, relevant: Option<&BTreeSet<ItemId>>) -> usize {
    relevant.map_or(0, |rel| {
        list.iter().take(n).filter(|i| rel.contains(i)).count()
    })
}

/// Total hits over total recommendations issued. Lists are truncated to `n`;
/// a user with a shorter list contributes fewer slots.
pub fn precision_at_n(
    recommendations: &BTreeMap<UserId, Vec<ItemId>>,
    test: &BTreeMap<UserId, BTreeSet<ItemId>>,
    n: usize,
) -> Result<AccuracyReport> {
    let mut issued = 0;
    let mut total_hits = 0;
    for (user, list) in recommendations {
        issued += list.len().min(n);
        total_hits += hits(list, n, test.get(user));
    }
    if issued == 0 {
        return Err(Error::UndefinedMetric(
            "precision with no recommendations issued".into(),
        ));
    }
    Ok(AccuracyReport {
        metric: format!("precision@{n}"),
        value: total_hits as f64 / issued as f64,
        n_users: recommendations.len(),
        n_predictions: issued,
        excluded_users: 0,
    })
}

/// Mean over users of hits / test size. Users with an empty test set are
/// excluded; users without a list count as zero recall.
pub fn macro_recall(
    recommendations: &BTreeMap<UserId, Vec<ItemId>>,
    test: &BTreeMap<UserId, BTreeSet<ItemId>>,
    n: usize,
) -> Result<AccuracyReport> {
    let mut sum = 0.0;
    let mut users = 0;
    let mut excluded = 0;
    let mut issued = 0;
    for (user, relevant) in test {
        if relevant.is_empty() {
            excluded += 1;
            continue;
        }
        let list = recommendations.get(user).map_or(&[][..], Vec::as_slice);
        issued += list.len().min(n);
        sum += hits(list, n, Some(relevant)) as f64 / relevant.len() as f64;
        users += 1;
    }
    if users == 0 {
        return Err(Error::UndefinedMetric(
            "recall with no evaluable users".into(),
        ));
    }
    Ok(AccuracyReport {
        metric: format!("recall@{n}"),
        value: sum / users as f64,
        n_users: users,
        n_predictions: issued,
        excluded_users: excluded,
    })
}

fn check_lengths(predictions: &[f64], actuals: &[f64]) -> Result<()> {
    if predictions.len() != actuals.len() {
        return Err(Error::invalid(format!(
            "{} predictions for {} actual values",
            predictions.len(),
            actuals.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::Empty("prediction list"));
    }
    Ok(())
}

pub fn rmse(predictions: &[f64], actuals: &[f64]) -> Result<f64> {
    check_lengths(predictions, actuals)?;
    let sq: f64 = predictions
        .iter()
        .zip(actuals)
        .map(|(p, a)| (p - a).powi(2))
        .sum();
    Ok((sq / predictions.len() as f64).sqrt())
}

pub fn mae(predictions: &[f64], actuals: &[f64]) -> Result<f64> {
    check_lengths(predictions, actuals)?;
    let abs: f64 = predictions
        .iter()
        .zip(actuals)
        .map(|(p, a)| (p - a).abs())
        .sum();
    Ok(abs / predictions.len() as f64)
}

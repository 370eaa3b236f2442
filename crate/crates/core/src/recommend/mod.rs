//! Reference recommenders and the train-then-score evaluators that the
//! ablation engine drives.

pub mod cosine;
pub mod mf;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Rating, Record};
use crate::error::{Error, Result};
use crate::metrics::{self, AccuracyReport, Metric};
use crate::seed::Seed;

pub use cosine::{
    cosine_similarity, location_score, recommend_all, top_n, SimilarityContext, UserVector,
};
pub use mf::{predict_rating, train_mf, MfHyper, MfModel, ModelCache};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub report: AccuracyReport,
    /// Test users with no training data left.
    pub cold_users: usize,
}

impl Evaluation {
    pub fn value(&self) -> f64 {
        self.report.value
    }
}

/// A fixed recommender paired with a fixed accuracy metric: train on `train`,
/// score against `test`. Implementations are deterministic so repeated calls
/// on the same inputs give bit-identical results.
pub trait Evaluator<R: Record>: Sync {
    fn metric(&self) -> Metric;
    fn evaluate(&self, train: &Dataset<R>, test: &Dataset<R>) -> Result<Evaluation>;
}

/// User-based cosine Top-N scored by precision@N or macro recall.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopNEvaluator {
    pub n: usize,
    pub metric: Metric,
}

impl TopNEvaluator {
    pub fn new(n: usize, metric: Metric) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("top-n needs n >= 1"));
        }
        if !metric.is_ranking() {
            return Err(Error::Incompatible(format!(
                "metric {metric} does not apply to Top-N lists"
            )));
        }
        Ok(TopNEvaluator { n, metric })
    }

    pub fn precision(n: usize) -> Self {
        TopNEvaluator {
            n,
            metric: Metric::Precision,
        }
    }
}

impl<R: Record> Evaluator<R> for TopNEvaluator {
    fn metric(&self) -> Metric {
        self.metric
    }

    fn evaluate(&self, train: &Dataset<R>, test: &Dataset<R>) -> Result<Evaluation> {
        let ctx = SimilarityContext::from_dataset(train);
        let test_sets = test.item_sets();
        let users: Vec<_> = test_sets.keys().copied().collect();
        let cold_users = users
            .iter()
            .filter(|u| !train.by_user().contains_key(u))
            .count();
        let recs = recommend_all(&ctx, &users, self.n);
        let report = match self.metric {
            Metric::Recall => metrics::macro_recall(&recs, &test_sets, self.n)?,
            _ => metrics::precision_at_n(&recs, &test_sets, self.n)?,
        };
        Ok(Evaluation { report, cold_users })
    }
}

/// Biased-SGD latent factor model scored by RMSE or MAE.
#[derive(Debug, Clone)]
pub struct MfEvaluator {
    pub hyper: MfHyper,
    pub metric: Metric,
    pub seed: Seed,
    /// Clamp predictions into this range before scoring.
    pub clamp: Option<(f64, f64)>,
    pub cache: Option<ModelCache>,
}

impl MfEvaluator {
    pub fn new(hyper: MfHyper, metric: Metric, seed: Seed) -> Result<Self> {
        if metric.is_ranking() {
            return Err(Error::Incompatible(format!(
                "metric {metric} does not apply to rating prediction"
            )));
        }
        Ok(MfEvaluator {
            hyper,
            metric,
            seed,
            clamp: None,
            cache: None,
        })
    }

    pub fn with_cache(mut self, cache: ModelCache) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn train(&self, train: &Dataset<Rating>) -> Result<MfModel> {
        match &self.cache {
            Some(cache) => cache.get_or_train(train, &self.hyper, self.seed),
            None => train_mf(train, &self.hyper, self.seed),
        }
    }
}

impl Evaluator<Rating> for MfEvaluator {
    fn metric(&self) -> Metric {
        self.metric
    }

    fn evaluate(&self, train: &Dataset<Rating>, test: &Dataset<Rating>) -> Result<Evaluation> {
        let model = self.train(train)?;
        let (preds, actual): (Vec<f64>, Vec<f64>) = test
            .records()
            .iter()
            .map(|r| {
                let p = predict_rating(&model, r.user_id, r.item_id);
                let p = match self.clamp {
                    Some((lo, hi)) => p.clamp(lo, hi),
                    None => p,
                };
                (p, r.value)
            })
            .unzip();
        let value = match self.metric {
            Metric::Mae => metrics::mae(&preds, &actual)?,
            _ => metrics::rmse(&preds, &actual)?,
        };
        let cold_users = test
            .users()
            .filter(|u| !train.by_user().contains_key(u))
            .count();
        Ok(Evaluation {
            report: AccuracyReport {
                metric: self.metric.to_string(),
                value,
                n_users: test.n_users(),
                n_predictions: preds.len(),
                excluded_users: 0,
            },
            cold_users,
        })
    }
}

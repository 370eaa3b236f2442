//! Biased latent-factor model trained by stochastic gradient descent.
//!
//! Prediction is `mu + b_u + b_i + p_u . q_i`. Each rating contributes
//! `0.5 e^2 + 0.5 lambda (b_u^2 + b_i^2 + |p_u|^2 + |q_i|^2)` to the objective,
//! with `e = r - prediction`; `mu` is the training mean and is not learned.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{ItemId, RatingDataset, UserId};
use crate::error::{Error, Result};
use crate::seed::Seed;

pub const MODEL_FORMAT: &str = "diffdata-mf";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MfHyper {
    pub n_factors: usize,
    pub learning_rate: f64,
    pub regularization: f64,
    pub epochs: usize,
    pub init_std: f64,
}

impl Default for MfHyper {
    fn default() -> Self {
        MfHyper {
            n_factors: 20,
            learning_rate: 0.005,
            regularization: 0.02,
            epochs: 30,
            init_std: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MfModel {
    pub format: String,
    pub version: u32,
    pub n_factors: usize,
    pub global_mean: f64,
    /// Sorted; row `k` of the user tables belongs to `user_ids[k]`.
    pub user_ids: Vec<UserId>,
    pub item_ids: Vec<ItemId>,
    pub user_bias: Vec<f64>,
    pub item_bias: Vec<f64>,
    pub user_factors: Vec<f64>,
    pub item_factors: Vec<f64>,
}

/// Partial derivatives of one rating's loss term.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingGradient {
    pub user_bias: f64,
    pub item_bias: f64,
    pub user_factors: Vec<f64>,
    pub item_factors: Vec<f64>,
}

impl MfModel {
    /// Model with zero biases and zero factors for the given ids.
    pub fn zeros(
        n_factors: usize,
        global_mean: f64,
        user_ids: Vec<UserId>,
        item_ids: Vec<ItemId>,
    ) -> Self {
        MfModel {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            n_factors,
            global_mean,
            user_bias: vec![0.0; user_ids.len()],
            item_bias: vec![0.0; item_ids.len()],
            user_factors: vec![0.0; user_ids.len() * n_factors],
            item_factors: vec![0.0; item_ids.len() * n_factors],
            user_ids,
            item_ids,
        }
    }

    pub fn user_index(&self, user: UserId) -> Option<usize> {
        self.user_ids.binary_search(&user).ok()
    }

    pub fn item_index(&self, item: ItemId) -> Option<usize> {
        self.item_ids.binary_search(&item).ok()
    }

    pub fn user_row(&self, u: usize) -> &[f64] {
        &self.user_factors[u * self.n_factors..(u + 1) * self.n_factors]
    }

    pub fn item_row(&self, i: usize) -> &[f64] {
        &self.item_factors[i * self.n_factors..(i + 1) * self.n_factors]
    }

    fn predict_index(&self, u: usize, i: usize) -> f64 {
        let dot: f64 = self
            .user_row(u)
            .iter()
            .zip(self.item_row(i))
            .map(|(a, b)| a * b)
            .sum();
        self.global_mean + self.user_bias[u] + self.item_bias[i] + dot
    }

    /// Loss term of a single rating at dense indexes `(u, i)`.
    pub fn rating_loss(&self, u: usize, i: usize, rating: f64, lambda: f64) -> f64 {
        let e = rating - self.predict_index(u, i);
        let sq = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
        0.5 * e * e
            + 0.5
                * lambda
                * (self.user_bias[u].powi(2)
                    + self.item_bias[i].powi(2)
                    + sq(self.user_row(u))
                    + sq(self.item_row(i)))
    }

    /// Analytic gradient of [`rating_loss`](MfModel::rating_loss).
    pub fn rating_gradient(&self, u: usize, i: usize, rating: f64, lambda: f64) -> RatingGradient {
        let e = rating - self.predict_index(u, i);
        let (pu, qi) = (self.user_row(u), self.item_row(i));
        RatingGradient {
            user_bias: -e + lambda * self.user_bias[u],
            item_bias: -e + lambda * self.item_bias[i],
            user_factors: pu
                .iter()
                .zip(qi)
                .map(|(p, q)| -e * q + lambda * p)
                .collect(),
            item_factors: qi
                .iter()
                .zip(pu)
                .map(|(q, p)| -e * p + lambda * q)
                .collect(),
        }
    }

    /// One SGD step on a single rating: every parameter moves against
    /// [`rating_gradient`](MfModel::rating_gradient) evaluated before the step.
    pub fn sgd_step(&mut self, u: usize, i: usize, rating: f64, lr: f64, lambda: f64) {
        let k = self.n_factors;
        let e = rating - self.predict_index(u, i);
        self.user_bias[u] += lr * (e - lambda * self.user_bias[u]);
        self.item_bias[i] += lr * (e - lambda * self.item_bias[i]);
        let (pu, qi) = (u * k, i * k);
        for f in 0..k {
            let p = self.user_factors[pu + f];
            let q = self.item_factors[qi + f];
            self.user_factors[pu + f] += lr * (e * q - lambda * p);
            self.item_factors[qi + f] += lr * (e * p - lambda * q);
        }
    }

    fn all_finite(&self) -> bool {
        self.user_bias
            .iter()
            .chain(&self.item_bias)
            .chain(&self.user_factors)
            .chain(&self.item_factors)
            .all(|x| x.is_finite())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: MfModel = serde_json::from_str(s)?;
        if m.format != MODEL_FORMAT || m.version != MODEL_VERSION {
            return Err(Error::Incompatible(format!(
                "model dump {} v{} (expected {MODEL_FORMAT} v{MODEL_VERSION})",
                m.format, m.version
            )));
        }
        Ok(m)
    }
}

/// `mu + b_u + b_i + p_u . q_i`; unknown users or items contribute nothing
/// beyond the terms that are known.
pub fn predict_rating(m: &MfModel, user: UserId, item: ItemId) -> f64 {
    let u = m.user_index(user);
    let i = m.item_index(item);
    let mut r = m.global_mean;
    if let Some(u) = u {
        r += m.user_bias[u];
    }
    if let Some(i) = i {
        r += m.item_bias[i];
    }
    if let (Some(u), Some(i)) = (u, i) {
        r += m
            .user_row(u)
            .iter()
            .zip(m.item_row(i))
            .map(|(a, b)| a * b)
            .sum::<f64>();
    }
    r
}

struct Indexed {
    users: Vec<usize>,
    items: Vec<usize>,
    values: Vec<f64>,
}

fn index_ratings(train: &RatingDataset, model: &MfModel) -> Indexed {
    let recs = train.records();
    Indexed {
        users: recs
            .iter()
            .map(|r| model.user_index(r.user_id).unwrap())
            .collect(),
        items: recs
            .iter()
            .map(|r| model.item_index(r.item_id).unwrap())
            .collect(),
        values: recs.iter().map(|r| r.value).collect(),
    }
}

fn objective(model: &MfModel, data: &Indexed, lambda: f64) -> f64 {
    (0..data.values.len())
        .map(|k| model.rating_loss(data.users[k], data.items[k], data.values[k], lambda))
        .sum()
}

pub fn train_mf(train: &RatingDataset, hyper: &MfHyper, seed: Seed) -> Result<MfModel> {
    train_mf_traced(train, hyper, seed).map(|(m, _)| m)
}

/// Trains and also returns the full training objective after each epoch.
pub fn train_mf_traced(
    train: &RatingDataset,
    hyper: &MfHyper,
    seed: Seed,
) -> Result<(MfModel, Vec<f64>)> {
    if train.is_empty() {
        return Err(Error::Empty("training set"));
    }
    if hyper.n_factors == 0 {
        return Err(Error::invalid("need at least one factor"));
    }
    let mean = train.records().iter().map(|r| r.value).sum::<f64>() / train.len() as f64;
    let mut model = MfModel::zeros(
        hyper.n_factors,
        mean,
        train.users().collect(),
        train.catalog(),
    );
    let init = Normal::new(0.0, hyper.init_std).map_err(|e| Error::invalid(e.to_string()))?;
    let mut rng = seed.rng("mf/init");
    for x in model
        .user_factors
        .iter_mut()
        .chain(model.item_factors.iter_mut())
    {
        *x = rng.sample(init);
    }

    let data = index_ratings(train, &model);
    let mut order: Vec<usize> = (0..data.values.len()).collect();
    let mut trace = Vec::with_capacity(hyper.epochs);
    for epoch in 1..=hyper.epochs {
        order.shuffle(&mut seed.rng(&format!("mf/epoch/{epoch}")));
        for &k in &order {
            model.sgd_step(
                data.users[k],
                data.items[k],
                data.values[k],
                hyper.learning_rate,
                hyper.regularization,
            );
        }
        if !model.all_finite() {
            return Err(Error::Diverged { epoch });
        }
        trace.push(objective(&model, &data, hyper.regularization));
    }
    Ok((model, trace))
}

/// Hex digest identifying a training set.
pub fn dataset_digest(ds: &RatingDataset) -> String {
    let mut h = Sha256::new();
    for r in ds.records() {
        h.update(r.user_id.to_le_bytes());
        h.update(r.item_id.to_le_bytes());
        h.update(r.value.to_bits().to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// On-disk cache of trained models keyed by (training data, hyperparameters, seed).
#[derive(Debug, Clone)]
pub struct ModelCache {
    dir: PathBuf,
}

impl ModelCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        ModelCache { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn key(train: &RatingDataset, hyper: &MfHyper, seed: Seed) -> String {
        let mut h = Sha256::new();
        h.update(dataset_digest(train).as_bytes());
        h.update(serde_json::to_string(hyper).unwrap_or_default().as_bytes());
        h.update(seed.master().to_le_bytes());
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn get_or_train(
        &self,
        train: &RatingDataset,
        hyper: &MfHyper,
        seed: Seed,
    ) -> Result<MfModel> {
        let path = self
            .dir
            .join(format!("{}.json", Self::key(train, hyper, seed)));
        if let Ok(text) = fs::read_to_string(&path) {
            if let Ok(model) = MfModel::from_json(&text) {
                return Ok(model);
            }
            log::warn!("ignoring unreadable cached model {}", path.display());
        }
        let model = train_mf(train, hyper, seed)?;
        let io = |source| Error::Io {
            path: path.clone(),
            source,
        };
        fs::create_dir_all(&self.dir).map_err(io)?;
        // Write then rename so concurrent readers never see a partial file.
        let tmp = path.with_extension(format!("tmp{}", std::process::id()));
        fs::write(&tmp, model.to_json()?).map_err(io)?;
        fs::rename(&tmp, &path).map_err(io)?;
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Rating;
    use crate::metrics::rmse;

    fn ds(v: &[(u64, u64, f64)]) -> RatingDataset {
        RatingDataset::new(
            v.iter()
                .map(|&(u, i, r)| Rating {
                    user_id: u,
                    item_id: i,
                    value: r,
                    timestamp: 0,
                })
                .collect(),
        )
    }

    #[test]
    fn cold_start_and_hand_model() {
        let mut m = MfModel::zeros(1, 3.0, vec![1], vec![10]);
        assert_eq!(predict_rating(&m, 7, 70), 3.0);
        assert_eq!(predict_rating(&m, 1, 10), 3.0);
        m.user_bias[0] = 0.5;
        m.item_bias[0] = -0.2;
        m.user_factors[0] = 0.5;
        m.item_factors[0] = 0.2;
        assert!((predict_rating(&m, 1, 10) - 3.4).abs() < 1e-12);
        assert!((predict_rating(&m, 1, 99) - 3.5).abs() < 1e-12);
        assert!((predict_rating(&m, 99, 10) - 2.8).abs() < 1e-12);
    }

    #[test]
    fn constant_data_fits_mean() {
        let data: Vec<_> = (1..=10u64)
            .flat_map(|u| (1..=8u64).map(move |i| (u, i, 3.0)))
            .collect();
        let train = ds(&data);
        let hyper = MfHyper {
            regularization: 0.0,
            n_factors: 3,
            ..MfHyper::default()
        };
        let m = train_mf(&train, &hyper, Seed(1)).unwrap();
        assert_eq!(m.global_mean, 3.0);
        // Biases only soak up the small initial factor products.
        assert!(m
            .user_bias
            .iter()
            .chain(&m.item_bias)
            .all(|b| b.abs() < 0.02));
        let preds: Vec<f64> = data
            .iter()
            .map(|&(u, i, _)| predict_rating(&m, u, i))
            .collect();
        let actual: Vec<f64> = data.iter().map(|t| t.2).collect();
        let e = rmse(&preds, &actual).unwrap();
        // Leftover initial factor products keep the fit from being exact.
        assert!(e < 0.05, "{e}");
    }

    #[test]
    fn sgd_step_follows_gradient() {
        let train = ds(&[(1, 1, 4.0), (1, 2, 2.0), (2, 1, 5.0)]);
        let hyper = MfHyper {
            n_factors: 4,
            epochs: 2,
            ..MfHyper::default()
        };
        let m = train_mf(&train, &hyper, Seed(2)).unwrap();
        let (lr, lambda) = (0.01, 0.05);
        let g = m.rating_gradient(0, 1, 2.0, lambda);
        let mut stepped = m.clone();
        stepped.sgd_step(0, 1, 2.0, lr, lambda);
        assert!((stepped.user_bias[0] - (m.user_bias[0] - lr * g.user_bias)).abs() < 1e-15);
        assert!((stepped.item_bias[1] - (m.item_bias[1] - lr * g.item_bias)).abs() < 1e-15);
        for f in 0..4 {
            assert!(
                (stepped.user_row(0)[f] - (m.user_row(0)[f] - lr * g.user_factors[f])).abs()
                    < 1e-15
            );
            assert!(
                (stepped.item_row(1)[f] - (m.item_row(1)[f] - lr * g.item_factors[f])).abs()
                    < 1e-15
            );
        }
    }

    #[test]
    fn divergence_names_epoch() {
        let train = ds(&[(1, 1, 1e200), (1, 2, -1e200), (2, 1, 1e200)]);
        let hyper = MfHyper {
            learning_rate: 10.0,
            n_factors: 2,
            ..MfHyper::default()
        };
        assert!(matches!(
            train_mf(&train, &hyper, Seed(0)),
            Err(Error::Diverged { epoch: 1 })
        ));
    }

    #[test]
    fn empty_train_rejected() {
        assert!(train_mf(&RatingDataset::default(), &MfHyper::default(), Seed(0)).is_err());
    }

    #[test]
    fn json_dump_roundtrip_and_version_check() {
        let train = ds(&[(1, 1, 4.0), (2, 2, 2.0)]);
        let m = train_mf(
            &train,
            &MfHyper {
                epochs: 1,
                ..MfHyper::default()
            },
            Seed(4),
        )
        .unwrap();
        let back = MfModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
        let bad = m
            .to_json()
            .unwrap()
            .replace("\"version\":1", "\"version\":99");
        assert!(matches!(
            MfModel::from_json(&bad),
            Err(Error::Incompatible(_))
        ));
    }

    #[test]
    fn cache_returns_identical_model() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ModelCache::new(dir.path());
        let train = ds(&[(1, 1, 4.0), (2, 2, 2.0), (2, 1, 3.0)]);
        let hyper = MfHyper {
            epochs: 3,
            ..MfHyper::default()
        };
        let first = cache.get_or_train(&train, &hyper, Seed(5)).unwrap();
        let second = cache.get_or_train(&train, &hyper, Seed(5)).unwrap();
        assert_eq!(first, second);
        assert_eq!(first, train_mf(&train, &hyper, Seed(5)).unwrap());
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}

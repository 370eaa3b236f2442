//! Independent re-derivations checked against the library.

use std::collections::{BTreeMap, BTreeSet};

use diffdata::dataset::{generate_synthetic, Rating, RatingDataset};
use diffdata::metrics::rmse;
use diffdata::recommend::mf::train_mf_traced;
use diffdata::recommend::{
    cosine_similarity, location_score, predict_rating, top_n, train_mf, MfHyper, MfModel,
    SimilarityContext, UserVector,
};
use diffdata::Seed;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Dense 0/1 matrix: `m[u][i]` is 1.0 when user `u` visited location `i`.
struct Dense {
    m: Vec<Vec<f64>>,
}

impl Dense {
    fn w(&self, u: usize, v: usize) -> f64 {
        let dot: f64 = (0..self.m[u].len())
            .map(|i| self.m[u][i] * self.m[v][i])
            .sum();
        let nu: f64 = self.m[u].iter().map(|x| x * x).sum();
        let nv: f64 = self.m[v].iter().map(|x| x * x).sum();
        if dot == 0.0 {
            0.0
        } else {
            dot / (nu * nv).sqrt()
        }
    }

    fn c(&self, u: usize, i: usize) -> f64 {
        let others = (0..self.m.len()).filter(|&v| v != u);
        let den: f64 = others.clone().map(|v| self.w(u, v)).sum();
        let num: f64 = others
            .filter(|&v| self.m[v][i] == 1.0)
            .map(|v| self.w(u, v))
            .sum();
        if den > 0.0 {
            num / den
        } else {
            0.0
        }
    }
}

fn sets_of(dense: &Dense) -> BTreeMap<u64, BTreeSet<u64>> {
    dense
        .m
        .iter()
        .enumerate()
        .map(|(u, row)| {
            let items = row
                .iter()
                .enumerate()
                .filter(|(_, &x)| x == 1.0)
                .map(|(i, _)| i as u64)
                .collect();
            (u as u64, items)
        })
        .collect()
}

#[test]
fn three_user_toy_instance() {
    // u = {0, 1}; v1 = {1, 2} shares one of u's two locations; v2 = {3}.
    let dense = Dense {
        m: vec![
            vec![1.0, 1.0, 0.0, 0.0],
            vec![0.0, 1.0, 1.0, 0.0],
            vec![0.0, 0.0, 0.0, 1.0],
        ],
    };
    let ctx = SimilarityContext::from_item_sets(&sets_of(&dense));
    let u = ctx.vector(0);
    let w1 = 1.0 / 2.0;
    assert_eq!(cosine_similarity(&u, &ctx.vector(1)), w1);
    assert_eq!(cosine_similarity(&u, &ctx.vector(2)), 0.0);
    assert_eq!(location_score(&u, 2, &ctx), w1 / (w1 + 0.0));
    assert_eq!(top_n(&u, &ctx, 1), vec![2]);
}

#[test]
fn half_overlap_cosine() {
    let a = UserVector::new(1, [1, 2]);
    let b = UserVector::new(2, [2, 3]);
    assert_eq!(cosine_similarity(&a, &b), 0.5);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn cosine_scores_match_brute_force(
        cells in prop::collection::vec(prop::collection::vec(prop::bool::weighted(0.4), 8), 1..=6),
        n in 1usize..=8,
    ) {
        let dense = Dense {
            m: cells.iter().map(|r| r.iter().map(|&b| f64::from(u8::from(b))).collect()).collect(),
        };
        let ctx = SimilarityContext::from_item_sets(&sets_of(&dense));
        for u in 0..dense.m.len() {
            let vec_u = ctx.vector(u as u64);
            for v in 0..dense.m.len() {
                prop_assert_eq!(cosine_similarity(&vec_u, &ctx.vector(v as u64)), dense.w(u, v));
            }
            let mut expected: Vec<(f64, u64)> = Vec::new();
            for &item in ctx.catalog() {
                let c = dense.c(u, item as usize);
                prop_assert_eq!(location_score(&vec_u, item, &ctx), c);
                if dense.m[u][item as usize] == 0.0 {
                    expected.push((c, item));
                }
            }
            expected.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            let expected: Vec<u64> = expected.into_iter().take(n).map(|p| p.1).collect();
            prop_assert_eq!(top_n(&vec_u, &ctx, n), expected);
        }
    }
}

/// `1/2 e^2 + 1/2 lambda (b_u^2 + b_i^2 + |p_u|^2 + |q_i|^2)` from the raw fields.
fn loss(m: &MfModel, u: usize, i: usize, r: f64, lambda: f64) -> f64 {
    let k = m.n_factors;
    let p = &m.user_factors[u * k..(u + 1) * k];
    let q = &m.item_factors[i * k..(i + 1) * k];
    let dot: f64 = p.iter().zip(q).map(|(a, b)| a * b).sum();
    let e = r - (m.global_mean + m.user_bias[u] + m.item_bias[i] + dot);
    let sq: f64 = p.iter().chain(q).map(|x| x * x).sum::<f64>()
        + m.user_bias[u].powi(2)
        + m.item_bias[i].powi(2);
    0.5 * e * e + 0.5 * lambda * sq
}

#[test]
fn gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let (n_users, n_items, k) = (6, 5, 4);
    let mut m = MfModel::zeros(k, 3.2, (0..n_users).collect(), (0..n_items).collect());
    for x in m
        .user_bias
        .iter_mut()
        .chain(m.item_bias.iter_mut())
        .chain(m.user_factors.iter_mut())
        .chain(m.item_factors.iter_mut())
    {
        *x = rng.random_range(-1.0..1.0);
    }
    let lambda = 0.05;
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let u = rng.random_range(0..n_users as usize);
        let i = rng.random_range(0..n_items as usize);
        let r = f64::from(rng.random_range(1..=5u8));
        let g = m.rating_gradient(u, i, r, lambda);
        // Pick one of the 2 + 2k parameters the rating touches.
        let which = rng.random_range(0..2 + 2 * k);
        let (analytic, slot): (f64, &mut dyn FnMut(&mut MfModel) -> &mut f64) = match which {
            0 => (g.user_bias, &mut |m: &mut MfModel| &mut m.user_bias[u]),
            1 => (g.item_bias, &mut |m: &mut MfModel| &mut m.item_bias[i]),
            w if w < 2 + k => {
                let f = w - 2;
                (g.user_factors[f], &mut move |m: &mut MfModel| {
                    &mut m.user_factors[u * k + f]
                })
            }
            w => {
                let f = w - 2 - k;
                (g.item_factors[f], &mut move |m: &mut MfModel| {
                    &mut m.item_factors[i * k + f]
                })
            }
        };
        let mut plus = m.clone();
        *slot(&mut plus) += h;
        let mut minus = m.clone();
        *slot(&mut minus) -= h;
        let numeric = (loss(&plus, u, i, r, lambda) - loss(&minus, u, i, r, lambda)) / (2.0 * h);
        let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-12);
        worst = worst.max(rel);
    }
    assert!(worst < 1e-4, "worst relative error {worst}");
}

#[test]
fn synthetic_rating_variance_is_factor_count() {
    // Each rating sums k products of independent standard normals: variance k.
    let k = 20;
    let ds = generate_synthetic(2000, 2000, k, 1_200_000, Seed(3)).unwrap();
    let v: Vec<f64> = ds.records().iter().map(|r| r.value).collect();
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    assert!(mean.abs() < 0.1, "mean {mean}");
    assert!((var - k as f64).abs() / (k as f64) < 0.05, "variance {var}");
}

#[test]
fn rank_one_data_is_fit_by_one_factor() {
    let ds = generate_synthetic(50, 50, 1, 2000, Seed(5)).unwrap();
    let hyper = MfHyper {
        n_factors: 1,
        regularization: 0.0,
        learning_rate: 0.01,
        epochs: 300,
        init_std: 0.1,
    };
    let m = train_mf(&ds, &hyper, Seed(1)).unwrap();
    let preds: Vec<f64> = ds
        .records()
        .iter()
        .map(|r| predict_rating(&m, r.user_id, r.item_id))
        .collect();
    let actual: Vec<f64> = ds.records().iter().map(|r| r.value).collect();
    let e = rmse(&preds, &actual).unwrap();
    assert!(e < 0.05, "train rmse {e}");
}

#[test]
fn training_loss_non_increasing_at_default_rate() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let recs: Vec<Rating> = (0..30u64)
        .flat_map(|u| (0..20u64).map(move |i| (u, i)))
        .map(|(u, i)| Rating {
            user_id: u,
            item_id: i,
            value: f64::from(rng.random_range(1..=5u8)),
            timestamp: 0,
        })
        .collect();
    let ds = RatingDataset::new(recs);
    let (_, trace) = train_mf_traced(&ds, &MfHyper::default(), Seed(2)).unwrap();
    for w in trace.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-9), "{} then {}", w[0], w[1]);
    }
}

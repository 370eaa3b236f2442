use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use super::{AttributeRanking, RankedPoint};
use crate::dataset::{Rating, RatingDataset};
use crate::seed::Seed;

/// Ascending by value; equal values end up in a seeded random order.
pub fn rank_by_rating(ratings: &[Rating], seed: Seed) -> Vec<RankedPoint> {
    let mut pts: Vec<RankedPoint> = ratings
        .iter()
        .map(|r| RankedPoint {
            item: r.item_id,
            score: r.value,
        })
        .collect();
    pts.shuffle(&mut seed.rng("rating-ties"));
    // Stable, so the shuffle survives inside each value class.
    pts.sort_by(|a, b| a.score.total_cmp(&b.score));
    pts
}

pub fn rank_ratings(ds: &RatingDataset, seed: Seed) -> AttributeRanking {
    let users = ds
        .by_user()
        .iter()
        .map(|(&u, idxs)| {
            let recs: Vec<Rating> = idxs.iter().map(|&i| ds.records()[i].clone()).collect();
            (
                u,
                rank_by_rating(&recs, seed.derive(&format!("rating/{u}"))),
            )
        })
        .collect::<BTreeMap<_, _>>();
    AttributeRanking {
        attribute: "rating".into(),
        users,
        excluded: Vec::new(),
    }
}

//! User hardship: how far a point lies from where the user usually is.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{AttributeRanking, RankedPoint};
use crate::dataset::{CheckinDataset, ItemId, UserId};
use crate::error::{Error, Result};
use crate::geo::{haversine_km, kmeans, GeoPoint};
use crate::seed::Seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Hardship {
    /// Distance to the nearest of the user's `k` KMeans centroids.
    KMeans { k: usize },
    /// Distance to the user's nearest other point.
    Density,
}

impl Hardship {
    pub fn name(&self) -> &'static str {
        match self {
            Hardship::KMeans { .. } => "hardship-kmeans",
            Hardship::Density => "hardship-density",
        }
    }

    fn min_required(&self) -> usize {
        match *self {
            Hardship::KMeans { k } => k.max(1),
            Hardship::Density => 2,
        }
    }
}

fn sorted(mut v: Vec<RankedPoint>) -> Vec<RankedPoint> {
    v.sort_by(|a, b| a.score.total_cmp(&b.score).then(a.item.cmp(&b.item)));
    v
}

pub fn rank_hardship_kmeans(
    points: &[(ItemId, GeoPoint)],
    k: usize,
    seed: Seed,
) -> Result<Vec<RankedPoint>> {
    if points.len() < k.max(1) {
        return Err(Error::invalid(format!(
            "{} points cannot support {k} centroids",
            points.len()
        )));
    }
    let geo: Vec<GeoPoint> = points.iter().map(|p| p.1).collect();
    let centroids = kmeans(&geo, k, seed)?;
    Ok(sorted(
        points
            .iter()
            .map(|&(item, p)| RankedPoint {
                item,
                score: centroids.nearest(p).1,
            })
            .collect(),
    ))
}

pub fn rank_hardship_density(points: &[(ItemId, GeoPoint)]) -> Result<Vec<RankedPoint>> {
    if points.len() < 2 {
        return Err(Error::invalid("density hardship needs at least two points"));
    }
    Ok(sorted(
        points
            .iter()
            .enumerate()
            .map(|(i, &(item, p))| {
                let score = points
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, &(_, q))| haversine_km(p, q))
                    .fold(f64::INFINITY, f64::min);
                RankedPoint { item, score }
            })
            .collect(),
    ))
}

/// Scores `candidates` against a user's real points: distance to the nearest
/// real point (density) or to the nearest centroid of the real points.
pub fn score_against(
    real: &[GeoPoint],
    candidates: &[(ItemId, GeoPoint)],
    hardship: Hardship,
    seed: Seed,
) -> Result<Vec<RankedPoint>> {
    if real.is_empty() {
        return Err(Error::Empty("reference points"));
    }
    let score: Box<dyn Fn(GeoPoint) -> f64> = match hardship {
        Hardship::Density => Box::new(|p| {
            real.iter()
                .map(|&q| haversine_km(p, q))
                .fold(f64::INFINITY, f64::min)
        }),
        Hardship::KMeans { k } => {
            let c = kmeans(real, k, seed)?;
            Box::new(move |p| c.nearest(p).1)
        }
    };
    Ok(sorted(
        candidates
            .iter()
            .map(|&(item, p)| RankedPoint {
                item,
                score: score(p),
            })
            .collect(),
    ))
}

/// Ranks every user of `ds` with at least `min_points` distinct points.
pub fn rank_checkins_by_hardship(
    ds: &CheckinDataset,
    hardship: Hardship,
    min_points: usize,
    seed: Seed,
) -> AttributeRanking {
    let threshold = min_points.max(hardship.min_required());
    let users: Vec<UserId> = ds.users().collect();
    let ranked: Vec<(UserId, Option<Vec<RankedPoint>>)> = users
        .par_iter()
        .map(|&u| {
            let pts = ds.user_geo_points(u);
            if pts.len() < threshold {
                return (u, None);
            }
            let r = match hardship {
                Hardship::KMeans { k } => {
                    rank_hardship_kmeans(&pts, k, seed.derive(&format!("kmeans/{u}")))
                }
                Hardship::Density => rank_hardship_density(&pts),
            };
            (u, r.ok())
        })
        .collect();
    let mut out = BTreeMap::new();
    let mut excluded = Vec::new();
    for (u, r) in ranked {
        match r {
            Some(r) => {
                out.insert(u, r);
            }
            None => excluded.push(u),
        }
    }
    if !excluded.is_empty() {
        log::debug!(
            "{}: {} users below {threshold} points left unranked",
            hardship.name(),
            excluded.len()
        );
    }
    AttributeRanking {
        attribute: hardship.name().to_string(),
        users: out,
        excluded,
    }
}

//! Synthetic data: low-rank rating matrices and a clustered check-in city.

use chrono::{Duration, NaiveDate, NaiveDateTime, NaiveTime};
use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::seq::{index, IndexedRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{LogNormal, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Checkin, CheckinDataset, Rating, RatingDataset};
use crate::error::{Error, Result};
use crate::geo::{GeoPoint, KM_PER_DEGREE};
use crate::seed::Seed;

/// Samples `n_ratings` distinct cells of `U Vᵀ`, where `U` is
/// `n_users × n_factors` and `V` is `n_items × n_factors`, both with i.i.d.
/// standard normal entries. Users and items are numbered from 1; ratings come
/// out in row-major cell order with timestamp 0.
pub fn generate_synthetic(
    n_users: usize,
    n_items: usize,
    n_factors: usize,
    n_ratings: usize,
    seed: Seed,
) -> Result<RatingDataset> {
    let cells = n_users
        .checked_mul(n_items)
        .ok_or_else(|| Error::invalid("rating matrix too large"))?;
    if n_ratings > cells {
        return Err(Error::invalid(format!(
            "{n_ratings} ratings requested but the matrix has only {cells} cells"
        )));
    }
    if n_factors == 0 {
        return Err(Error::invalid("need at least one factor"));
    }
    let mut rng = seed.rng("synthetic/factors");
    let u: Vec<f64> = (0..n_users * n_factors)
        .map(|_| rng.sample(StandardNormal))
        .collect();
    let v: Vec<f64> = (0..n_items * n_factors)
        .map(|_| rng.sample(StandardNormal))
        .collect();

    let mut rng = seed.rng("synthetic/positions");
    let mut positions = index::sample(&mut rng, cells, n_ratings).into_vec();
    positions.sort_unstable();

    let records = positions
        .into_iter()
        .map(|cell| {
            let (row, col) = (cell / n_items, cell % n_items);
            let pu = &u[row * n_factors..(row + 1) * n_factors];
            let qi = &v[col * n_factors..(col + 1) * n_factors];
            Rating {
                user_id: row as u64 + 1,
                item_id: col as u64 + 1,
                value: pu.iter().zip(qi).map(|(a, b)| a * b).sum(),
                timestamp: 0,
            }
        })
        .collect();
    Ok(RatingDataset::new(records))
}

/// Parameters of the clustered-city check-in generator.
///
/// Locations sit in neighborhoods scattered over a disc. Each user has a home
/// and a work neighborhood and draws most of their points there, weighted by
/// location popularity; the remaining `far_fraction` of points are uniform
/// over the rest of the city. Far-flung visits happen late at night with
/// probability `far_night_prob`; local visits happen between 07:00 and 23:59.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct CityConfig {
    pub n_users: usize,
    pub n_locations: usize,
    pub n_neighborhoods: usize,
    pub center: GeoPoint,
    pub city_radius_km: f64,
    pub neighborhood_radius_km: f64,
    pub min_points: usize,
    pub max_points: usize,
    pub home_share: f64,
    pub far_fraction: f64,
    pub repeat_visit_prob: f64,
    pub far_night_prob: f64,
    pub popularity_sigma: f64,
    /// Far visits pick locations with weight `popularity^far_popularity_exponent`.
    pub far_popularity_exponent: f64,
}

impl Default for CityConfig {
    fn default() -> Self {
        CityConfig {
            n_users: 500,
            n_locations: 2000,
            n_neighborhoods: 40,
            center: GeoPoint::new(30.2672, -97.7431),
            city_radius_km: 20.0,
            neighborhood_radius_km: 0.5,
            min_points: 20,
            max_points: 60,
            home_share: 0.6,
            far_fraction: 0.2,
            repeat_visit_prob: 0.2,
            far_night_prob: 0.5,
            popularity_sigma: 1.0,
            far_popularity_exponent: 1.75,
        }
    }
}

fn offset(center: GeoPoint, north_km: f64, east_km: f64) -> GeoPoint {
    let lat = center.lat + north_km / KM_PER_DEGREE;
    let lon = center.lon + east_km / (KM_PER_DEGREE * center.lat.to_radians().cos());
    GeoPoint::new(lat.clamp(-90.0, 90.0), lon.clamp(-180.0, 180.0))
}

fn visit_time(rng: &mut ChaCha8Rng, hour: u32) -> NaiveDateTime {
    let start = NaiveDate::from_ymd_opt(2010, 6, 1).unwrap();
    let day = start + Duration::days(rng.random_range(0..150));
    let time =
        NaiveTime::from_hms_opt(hour, rng.random_range(0..60), rng.random_range(0..60)).unwrap();
    day.and_time(time)
}

/// Hour weights for local visits: nothing before 07:00, evening peak.
const LOCAL_HOUR_WEIGHTS: [f64; 24] = [
    0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 2.0, 4.0, 4.0, 4.0, 5.0, 7.0, 7.0, 5.0, 4.0, 4.0, 5.0, 7.0,
    8.0, 8.0, 7.0, 5.0, 3.0,
];

/// Weighted sampling without replacement from `pool`.
fn draw_weighted(rng: &mut ChaCha8Rng, pool: &mut Vec<usize>, weights: &[f64]) -> Option<usize> {
    if pool.is_empty() {
        return None;
    }
    let w: Vec<f64> = pool.iter().map(|&l| weights[l]).collect();
    let pick = WeightedIndex::new(&w).ok()?.sample(rng);
    Some(pool.swap_remove(pick))
}

pub fn generate_city(cfg: &CityConfig, seed: Seed) -> Result<CheckinDataset> {
    if cfg.n_neighborhoods < 2 || cfg.n_locations < cfg.n_neighborhoods {
        return Err(Error::invalid(
            "need at least two neighborhoods and one location each",
        ));
    }
    if cfg.min_points == 0 || cfg.min_points > cfg.max_points {
        return Err(Error::invalid("bad per-user point range"));
    }
    if !(0.0..=1.0).contains(&cfg.far_fraction) {
        return Err(Error::invalid("far fraction outside [0, 1]"));
    }
    let mut rng = seed.rng("city");
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let popularity = LogNormal::new(0.0, cfg.popularity_sigma.max(0.0))
        .map_err(|e| Error::invalid(e.to_string()))?;

    let centers: Vec<GeoPoint> = (0..cfg.n_neighborhoods)
        .map(|_| {
            let r = cfg.city_radius_km * rng.random::<f64>().sqrt();
            let theta = rng.random::<f64>() * std::f64::consts::TAU;
            offset(cfg.center, r * theta.sin(), r * theta.cos())
        })
        .collect();

    let hood_of: Vec<usize> = (0..cfg.n_locations)
        .map(|l| l % cfg.n_neighborhoods)
        .collect();
    let coords: Vec<GeoPoint> = hood_of
        .iter()
        .map(|&h| {
            let n = cfg.neighborhood_radius_km * unit.sample(&mut rng);
            let e = cfg.neighborhood_radius_km * unit.sample(&mut rng);
            offset(centers[h], n, e)
        })
        .collect();
    let weights: Vec<f64> = (0..cfg.n_locations)
        .map(|_| popularity.sample(&mut rng))
        .collect();
    let far_weights: Vec<f64> = weights
        .iter()
        .map(|w| w.powf(cfg.far_popularity_exponent))
        .collect();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); cfg.n_neighborhoods];
    for (l, &h) in hood_of.iter().enumerate() {
        members[h].push(l);
    }

    let hood_ids: Vec<usize> = (0..cfg.n_neighborhoods).collect();
    let local_hours = WeightedIndex::new(LOCAL_HOUR_WEIGHTS).expect("hour weights");
    let mut records = Vec::new();
    for user in 1..=cfg.n_users as u64 {
        let picked: Vec<usize> = hood_ids.choose_multiple(&mut rng, 2).copied().collect();
        let (home, work) = (picked[0], picked[1]);
        let n_points = rng.random_range(cfg.min_points..=cfg.max_points);
        let n_far = (n_points as f64 * cfg.far_fraction).round() as usize;
        let mut home_pool = members[home].clone();
        let mut work_pool = members[work].clone();
        let mut far_pool: Vec<usize> = (0..cfg.n_locations)
            .filter(|&l| hood_of[l] != home && hood_of[l] != work)
            .collect();

        let mut points: Vec<(usize, bool)> = Vec::with_capacity(n_points);
        for _ in 0..n_points - n_far {
            let first_home = rng.random::<f64>() < cfg.home_share;
            let (a, b) = if first_home {
                (&mut home_pool, &mut work_pool)
            } else {
                (&mut work_pool, &mut home_pool)
            };
            let loc = draw_weighted(&mut rng, a, &weights)
                .or_else(|| draw_weighted(&mut rng, b, &weights));
            match loc {
                Some(l) => points.push((l, false)),
                None => break,
            }
        }
        for _ in 0..n_far {
            match draw_weighted(&mut rng, &mut far_pool, &far_weights) {
                Some(l) => points.push((l, true)),
                None => break,
            }
        }

        for (loc, far) in points {
            let visits = if rng.random::<f64>() < cfg.repeat_visit_prob {
                rng.random_range(2..=3)
            } else {
                1
            };
            for _ in 0..visits {
                let hour = if far && rng.random::<f64>() < cfg.far_night_prob {
                    rng.random_range(2..4)
                } else if far {
                    rng.random_range(0..24)
                } else {
                    local_hours.sample(&mut rng) as u32
                };
                records.push(Checkin {
                    user_id: user,
                    location_id: loc as u64 + 1,
                    lat: coords[loc].lat,
                    lon: coords[loc].lon,
                    local_time: visit_time(&mut rng, hour),
                });
            }
        }
    }
    Ok(CheckinDataset::new(records))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Rank by Gaussian elimination with partial pivoting.
    fn rank(mut m: Vec<Vec<f64>>, tol: f64) -> usize {
        let (rows, cols) = (m.len(), m[0].len());
        let mut r = 0;
        for c in 0..cols {
            let piv = (r..rows).max_by(|&a, &b| m[a][c].abs().total_cmp(&m[b][c].abs()));
            let Some(p) = piv else { break };
            if m[p][c].abs() < tol {
                continue;
            }
            m.swap(r, p);
            let (top, rest) = m.split_at_mut(r + 1);
            let pivot = &top[r];
            for row in rest.iter_mut().take(rows - r - 1) {
                let f = row[c] / pivot[c];
                for (x, &p) in row[c..cols].iter_mut().zip(&pivot[c..cols]) {
                    *x -= f * p;
                }
            }
            r += 1;
            if r == rows {
                break;
            }
        }
        r
    }

    fn dense(ds: &RatingDataset, n_users: usize, n_items: usize) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; n_items]; n_users];
        for r in ds.records() {
            m[r.user_id as usize - 1][r.item_id as usize - 1] = r.value;
        }
        m
    }

    #[test]
    fn full_rank_one_two_by_two_is_singular() {
        let ds = generate_synthetic(2, 2, 1, 4, Seed(11)).unwrap();
        assert_eq!(ds.len(), 4);
        let m = dense(&ds, 2, 2);
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        assert!(det.abs() < 1e-12, "det = {det}");
    }

    #[test]
    fn dense_matrix_rank_bounded_by_factors() {
        for (k, seed) in [(1, 1u64), (3, 2), (5, 3)] {
            let ds = generate_synthetic(12, 9, k, 108, Seed(seed)).unwrap();
            assert_eq!(rank(dense(&ds, 12, 9), 1e-9), k);
        }
    }

    #[test]
    fn too_many_ratings_rejected() {
        assert!(generate_synthetic(3, 3, 2, 10, Seed(0)).is_err());
    }

    #[test]
    fn positions_are_distinct_and_deterministic() {
        let a = generate_synthetic(30, 20, 4, 300, Seed(5)).unwrap();
        let b = generate_synthetic(30, 20, 4, 300, Seed(5)).unwrap();
        assert_eq!(a.records(), b.records());
        assert_eq!(a.n_points(), 300);
    }

    #[test]
    fn city_shape() {
        let cfg = CityConfig {
            n_users: 50,
            ..CityConfig::default()
        };
        let ds = generate_city(&cfg, Seed(1)).unwrap();
        assert_eq!(ds.n_users(), 50);
        for idxs in ds.by_user().values() {
            let pts: std::collections::BTreeSet<_> =
                idxs.iter().map(|&i| ds.records()[i].location_id).collect();
            assert!(pts.len() >= cfg.min_points && pts.len() <= cfg.max_points);
        }
        let again = generate_city(&cfg, Seed(1)).unwrap();
        assert_eq!(again.records(), ds.records());
    }
}

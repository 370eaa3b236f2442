//! Great-circle distance and KMeans over coordinates.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::Seed;

pub const EARTH_RADIUS_KM: f64 = 6371.0;
/// Length of one degree of arc on the reference sphere.
pub const KM_PER_DEGREE: f64 = EARTH_RADIUS_KM * std::f64::consts::PI / 180.0;

pub const KMEANS_MAX_ITERATIONS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Self {
        GeoPoint { lat, lon }
    }

    pub fn is_valid(&self) -> bool {
        (-90.0..=90.0).contains(&self.lat) && (-180.0..=180.0).contains(&self.lon)
    }
}

/// Haversine distance on a sphere of radius 6371 km.
pub fn haversine_km(a: GeoPoint, b: GeoPoint) -> f64 {
    let (lat1, lat2) = (a.lat.to_radians(), b.lat.to_radians());
    let dlat = (b.lat - a.lat).to_radians();
    let dlon = (b.lon - a.lon).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Centroids {
    pub points: Vec<GeoPoint>,
    pub k: usize,
}

impl Centroids {
    /// Index and distance of the nearest centroid (lowest index on ties).
    pub fn nearest(&self, p: GeoPoint) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (i, &c) in self.points.iter().enumerate() {
            let d = haversine_km(p, c);
            if d < best.1 {
                best = (i, d);
            }
        }
        best
    }
}

#[derive(Debug, Clone)]
pub struct KMeansFit {
    pub centroids: Centroids,
    pub assignment: Vec<usize>,
    pub iterations: usize,
    pub converged: bool,
    /// Sum of squared assigned distances after each assignment step.
    pub objective: Vec<f64>,
}

pub fn kmeans(points: &[GeoPoint], k: usize, seed: Seed) -> Result<Centroids> {
    kmeans_fit(points, k, seed).map(|fit| fit.centroids)
}

/// Lloyd's algorithm: haversine assignment, coordinate-mean update.
///
/// Initial centroids are `k` distinct input positions sampled uniformly. When
/// `k` exceeds the number of points the surplus centroids duplicate sampled
/// points. Stops when no assignment changes or after 100 iterations.
pub fn kmeans_fit(points: &[GeoPoint], k: usize, seed: Seed) -> Result<KMeansFit> {
    if points.is_empty() {
        return Err(Error::Empty("kmeans input"));
    }
    if k == 0 {
        return Err(Error::invalid("kmeans needs k >= 1"));
    }
    let mut rng = seed.rng("kmeans/init");
    let n = points.len();
    let mut centers: Vec<GeoPoint> = index::sample(&mut rng, n, k.min(n))
        .into_iter()
        .map(|i| points[i])
        .collect();
    while centers.len() < k {
        centers.push(points[rng.random_range(0..n)]);
    }
    let mut centroids = Centroids { points: centers, k };
    let mut assignment = vec![usize::MAX; n];
    let mut objective = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    while iterations < KMEANS_MAX_ITERATIONS {
        iterations += 1;
        let mut changed = false;
        let mut obj = 0.0;
        for (slot, &p) in assignment.iter_mut().zip(points) {
            let (c, d) = centroids.nearest(p);
            obj += d * d;
            if *slot != c {
                *slot = c;
                changed = true;
            }
        }
        objective.push(obj);
        if !changed {
            converged = true;
            break;
        }
        let mut sums = vec![(0.0, 0.0, 0usize); k];
        for (&c, p) in assignment.iter().zip(points) {
            sums[c].0 += p.lat;
            sums[c].1 += p.lon;
            sums[c].2 += 1;
        }
        for (c, (lat, lon, count)) in sums.into_iter().enumerate() {
            // An emptied cluster keeps its previous centroid.
            if count > 0 {
                centroids.points[c] = GeoPoint::new(lat / count as f64, lon / count as f64);
            }
        }
    }
    Ok(KMeansFit {
        centroids,
        assignment,
        iterations,
        converged,
        objective,
    })
}

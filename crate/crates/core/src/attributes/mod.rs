//! Attribute rankers and the chunk partitions they induce.
//!
//! A ranking orders each user's training points by a score; a partition
//! slices every user's ranking into contiguous chunks and maps the points
//! back to record indexes of the dataset the ranking came from.

mod hardship;
mod rating;
mod time;

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{Checkin, Dataset, ItemId, Rating, Record, UserId};
use crate::error::{Error, Result};
use crate::seed::Seed;

pub use hardship::{
    rank_checkins_by_hardship, rank_hardship_density, rank_hardship_kmeans, score_against, Hardship,
};
pub use rating::{rank_by_rating, rank_ratings};
pub use time::{build_time_intervals, TimeInterval, TimeIntervals};

/// Default minimum number of training points for a user to be ranked.
pub const DEFAULT_MIN_POINTS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankedPoint {
    pub item: ItemId,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeRanking {
    pub attribute: String,
    /// Per user, ascending by score.
    pub users: BTreeMap<UserId, Vec<RankedPoint>>,
    /// Users left unranked (too few points).
    pub excluded: Vec<UserId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chunk {
    pub label: String,
    /// Record indexes into the dataset the partition was built from.
    pub records: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkPartition {
    pub attribute: String,
    pub chunks: Vec<Chunk>,
    /// Number of records in the source dataset.
    pub n_records: usize,
}

impl ChunkPartition {
    pub fn len(&self) -> usize {
        self.chunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }

    pub fn labels(&self) -> Vec<String> {
        self.chunks.iter().map(|c| c.label.clone()).collect()
    }

    /// Chunk position of every record, `None` for unranked records.
    pub fn chunk_of(&self) -> Vec<Option<usize>> {
        let mut out = vec![None; self.n_records];
        for (c, chunk) in self.chunks.iter().enumerate() {
            for &r in &chunk.records {
                out[r] = Some(c);
            }
        }
        out
    }

    pub fn position(&self, label: &str) -> Option<usize> {
        self.chunks.iter().position(|c| c.label == label)
    }
}

/// Sizes of `n_chunks` contiguous slices of `n` items; the first
/// `n mod n_chunks` slices get one extra.
pub fn chunk_sizes(n: usize, n_chunks: usize) -> Vec<usize> {
    let (base, extra) = (n / n_chunks, n % n_chunks);
    (0..n_chunks)
        .map(|c| base + usize::from(c < extra))
        .collect()
}

/// Slices each user's ranking into `n_chunks` contiguous pieces and maps the
/// points to the records of `ds` (all visits of a point share its chunk).
pub fn partition_deciles<R: Record>(
    ranking: &AttributeRanking,
    ds: &Dataset<R>,
    n_chunks: usize,
) -> Result<ChunkPartition> {
    if n_chunks == 0 {
        return Err(Error::invalid("need at least one chunk"));
    }
    let mut chunks: Vec<Chunk> = (1..=n_chunks)
        .map(|c| Chunk {
            label: c.to_string(),
            records: Vec::new(),
        })
        .collect();
    for (&user, ranked) in &ranking.users {
        let points = ds.user_points(user);
        let mut pos = 0;
        for (c, size) in chunk_sizes(ranked.len(), n_chunks).into_iter().enumerate() {
            for rp in &ranked[pos..pos + size] {
                let recs = points.get(&rp.item).ok_or_else(|| {
                    Error::invalid(format!("ranked point ({user}, {}) not in dataset", rp.item))
                })?;
                chunks[c].records.extend(recs);
            }
            pos += size;
        }
    }
    for c in &mut chunks {
        c.records.sort_unstable();
    }
    Ok(ChunkPartition {
        attribute: ranking.attribute.clone(),
        chunks,
        n_records: ds.len(),
    })
}

/// `user_id,point_ref,score,chunk` rows for a ranking sliced into `n_chunks`.
pub fn write_ranking_csv<W: Write>(
    ranking: &AttributeRanking,
    n_chunks: usize,
    writer: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["user_id", "point_ref", "score", "chunk"])?;
    for (user, ranked) in &ranking.users {
        let mut pos = 0;
        for (c, size) in chunk_sizes(ranked.len(), n_chunks.max(1))
            .into_iter()
            .enumerate()
        {
            for rp in &ranked[pos..pos + size] {
                w.write_record([
                    user.to_string(),
                    rp.item.to_string(),
                    rp.score.to_string(),
                    (c + 1).to_string(),
                ])?;
            }
            pos += size;
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Attribute {
    HardshipKmeans { k: usize },
    HardshipDensity,
    Time { min_frac: f64, max_frac: f64 },
    Rating,
}

impl Attribute {
    pub const NAMES: [&'static str; 4] = ["hardship-kmeans", "hardship-density", "time", "rating"];

    pub fn name(&self) -> &'static str {
        match self {
            Attribute::HardshipKmeans { .. } => "hardship-kmeans",
            Attribute::HardshipDensity => "hardship-density",
            Attribute::Time { .. } => "time",
            Attribute::Rating => "rating",
        }
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Attribute {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hardship-kmeans" | "kmeans" => Ok(Attribute::HardshipKmeans { k: 2 }),
            "hardship-density" | "density" => Ok(Attribute::HardshipDensity),
            "time" | "timestamp" => Ok(Attribute::Time {
                min_frac: 0.10,
                max_frac: 0.15,
            }),
            "rating" => Ok(Attribute::Rating),
            other => Err(Error::invalid(format!(
                "unknown attribute `{other}`; registered attributes: {}",
                Attribute::NAMES.join(", ")
            ))),
        }
    }
}

/// Which attribute to rank by and how to chunk it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeConfig {
    pub attribute: Attribute,
    pub n_chunks: usize,
    /// Users with fewer training points stay unranked.
    pub min_points: usize,
    pub seed: Seed,
}

impl AttributeConfig {
    pub fn new(attribute: Attribute, seed: Seed) -> Self {
        AttributeConfig {
            attribute,
            n_chunks: 10,
            min_points: DEFAULT_MIN_POINTS,
            seed,
        }
    }
}

/// Record types that know how to be chunked by an attribute.
pub trait Partitionable: Record + Sized {
    fn partition(ds: &Dataset<Self>, cfg: &AttributeConfig) -> Result<ChunkPartition>;
}

impl Partitionable for Checkin {
    fn partition(ds: &Dataset<Checkin>, cfg: &AttributeConfig) -> Result<ChunkPartition> {
        match cfg.attribute {
            Attribute::HardshipKmeans { k } => {
                let r =
                    rank_checkins_by_hardship(ds, Hardship::KMeans { k }, cfg.min_points, cfg.seed);
                partition_deciles(&r, ds, cfg.n_chunks)
            }
            Attribute::HardshipDensity => {
                let r = rank_checkins_by_hardship(ds, Hardship::Density, cfg.min_points, cfg.seed);
                partition_deciles(&r, ds, cfg.n_chunks)
            }
            Attribute::Time { min_frac, max_frac } => {
                Ok(build_time_intervals(ds, min_frac, max_frac)?.partition)
            }
            Attribute::Rating => Err(Error::Incompatible(
                "check-in data carries no rating values".into(),
            )),
        }
    }
}

impl Partitionable for Rating {
    fn partition(ds: &Dataset<Rating>, cfg: &AttributeConfig) -> Result<ChunkPartition> {
        match cfg.attribute {
            Attribute::Rating => partition_deciles(&rank_ratings(ds, cfg.seed), ds, cfg.n_chunks),
            other => Err(Error::Incompatible(format!(
                "attribute {other} needs check-in data"
            ))),
        }
    }
}

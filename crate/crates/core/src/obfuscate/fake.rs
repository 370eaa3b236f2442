use std::collections::{BTreeMap, BTreeSet};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::{index, IndexedRandom, SliceRandom};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::suppression::{build_suppression_plan, suppression_mask};
use crate::attributes::{chunk_sizes, score_against, Chunk, ChunkPartition, Hardship};
use crate::dataset::{Checkin, CheckinDataset, ItemId, UserId};
use crate::diffscan::{ChunkAccuracy, DifferentialResult, ZScoreTable};
use crate::error::{Error, Result};
use crate::geo::GeoPoint;
use crate::recommend::Evaluator;
use crate::seed::Seed;

/// Fake check-ins for every user, ranked by hardship against the user's real
/// points and cut into chunks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FakePool {
    pub multiplier: usize,
    pub hardship: Hardship,
    /// All fakes; each user's fakes are contiguous and in ranked order.
    pub fakes: Vec<Checkin>,
    /// Chunks over indexes into `fakes`.
    pub partition: ChunkPartition,
    /// Users whose fakes had to be drawn with replacement.
    pub with_replacement: Vec<UserId>,
}

impl FakePool {
    pub fn n_chunks(&self) -> usize {
        self.partition.len()
    }

    pub fn chunk(&self, c: usize) -> impl Iterator<Item = &Checkin> + '_ {
        self.partition.chunks[c]
            .records
            .iter()
            .map(move |&i| &self.fakes[i])
    }
}

/// `multiplier` fakes per real training point of every user, at catalog
/// locations the user never visited, cut into `n_chunks` chunks (default
/// `multiplier`, so each chunk holds as many fakes as the user has real
/// points). A fake's time is copied from one of the user's real check-ins.
pub fn generate_fake(
    train: &CheckinDataset,
    catalog: &BTreeMap<ItemId, GeoPoint>,
    multiplier: usize,
    n_chunks: Option<usize>,
    hardship: Hardship,
    seed: Seed,
) -> Result<FakePool> {
    if catalog.is_empty() {
        return Err(Error::Empty("location catalog"));
    }
    if multiplier == 0 {
        return Err(Error::invalid("fake multiplier must be at least 1"));
    }
    let n_chunks = n_chunks.unwrap_or(multiplier);
    if n_chunks == 0 {
        return Err(Error::invalid("need at least one fake chunk"));
    }
    let locations: Vec<(ItemId, GeoPoint)> = catalog.iter().map(|(&l, &p)| (l, p)).collect();
    let users: Vec<UserId> = train.users().collect();
    let per_user = users
        .par_iter()
        .map(
            |&user| -> Result<(UserId, Vec<Checkin>, Vec<usize>, bool)> {
                let mut rng = seed.rng(&format!("fake/{user}"));
                let real = train.user_geo_points(user);
                let visited: BTreeSet<ItemId> = real.iter().map(|p| p.0).collect();
                let needed = multiplier * real.len();
                let pool: Vec<(ItemId, GeoPoint)> = locations
                    .iter()
                    .filter(|(l, _)| !visited.contains(l))
                    .copied()
                    .collect();
                let (pool, mut replaced) = if pool.is_empty() {
                    (locations.clone(), true)
                } else {
                    (pool, false)
                };
                let picked: Vec<(ItemId, GeoPoint)> = if pool.len() >= needed {
                    index::sample(&mut rng, pool.len(), needed)
                        .into_iter()
                        .map(|i| pool[i])
                        .collect()
                } else {
                    replaced = true;
                    let mut v = pool.clone();
                    v.shuffle(&mut rng);
                    while v.len() < needed {
                        v.push(*pool.choose(&mut rng).expect("non-empty pool"));
                    }
                    v
                };
                let real_pts: Vec<GeoPoint> = real.iter().map(|p| p.1).collect();
                let ranked = score_against(
                    &real_pts,
                    &picked,
                    hardship,
                    seed.derive(&format!("fake-rank/{user}")),
                )?;
                let times: Vec<_> = train.by_user()[&user]
                    .iter()
                    .map(|&i| train.records()[i].local_time)
                    .collect();
                let coords: BTreeMap<ItemId, GeoPoint> = picked.iter().copied().collect();
                let fakes = ranked
                    .iter()
                    .map(|rp| {
                        let p = coords[&rp.item];
                        Checkin {
                            user_id: user,
                            location_id: rp.item,
                            lat: p.lat,
                            lon: p.lon,
                            local_time: *times.choose(&mut rng).expect("user has check-ins"),
                        }
                    })
                    .collect();
                Ok((user, fakes, chunk_sizes(ranked.len(), n_chunks), replaced))
            },
        )
        .collect::<Result<Vec<_>>>()?;

    let mut fakes = Vec::new();
    let mut chunks: Vec<Chunk> = (1..=n_chunks)
        .map(|c| Chunk {
            label: c.to_string(),
            records: Vec::new(),
        })
        .collect();
    let mut with_replacement = Vec::new();
    for (user, user_fakes, sizes, replaced) in per_user {
        if replaced {
            with_replacement.push(user);
        }
        let mut pos = fakes.len();
        fakes.extend(user_fakes);
        for (c, size) in sizes.into_iter().enumerate() {
            chunks[c].records.extend(pos..pos + size);
            pos += size;
        }
    }
    if !with_replacement.is_empty() {
        log::warn!(
            "{} users had too few unvisited locations; their fakes repeat",
            with_replacement.len()
        );
    }
    Ok(FakePool {
        multiplier,
        hardship,
        partition: ChunkPartition {
            attribute: format!("fake-{}", hardship.name()),
            chunks,
            n_records: fakes.len(),
        },
        fakes,
        with_replacement,
    })
}

/// Accuracy with each fake chunk added in turn to the training data.
pub fn differential_fake_run<E>(
    train: &CheckinDataset,
    test: &CheckinDataset,
    pool: &FakePool,
    evaluator: &E,
) -> Result<DifferentialResult>
where
    E: Evaluator<Checkin> + ?Sized,
{
    let full = evaluator.evaluate(train, test)?;
    let chunks = pool
        .partition
        .chunks
        .par_iter()
        .enumerate()
        .map(|(c, chunk)| {
            let eval = evaluator.evaluate(&train.extended(pool.chunk(c).cloned()), test)?;
            Ok(ChunkAccuracy {
                label: chunk.label.clone(),
                accuracy: eval.value(),
                size: chunk.records.len(),
                cold_users: eval.cold_users,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DifferentialResult {
        attribute: pool.partition.attribute.clone(),
        metric: evaluator.metric(),
        full_accuracy: full.value(),
        n_train: train.len(),
        chunks,
    })
}

/// Which fake chunks replacements are drawn from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FakeMix {
    /// A single chunk, by position.
    Chunk(usize),
    /// Uniformly over all chunks.
    Uniform,
    /// One weight per chunk.
    Weighted(Vec<f64>),
}

impl FakeMix {
    fn weights(&self, n_chunks: usize) -> Result<Vec<f64>> {
        let w = match self {
            FakeMix::Chunk(c) if *c < n_chunks => (0..n_chunks)
                .map(|i| f64::from(u8::from(i == *c)))
                .collect(),
            FakeMix::Chunk(c) => {
                return Err(Error::invalid(format!(
                    "fake chunk {c} out of range 0..{n_chunks}"
                )))
            }
            FakeMix::Uniform => vec![1.0; n_chunks],
            FakeMix::Weighted(w) if w.len() == n_chunks => w.clone(),
            FakeMix::Weighted(w) => {
                return Err(Error::invalid(format!(
                    "{} weights for {n_chunks} fake chunks",
                    w.len()
                )))
            }
        };
        Ok(w)
    }
}

#[derive(Debug, Clone)]
pub struct Replacement {
    pub data: CheckinDataset,
    /// Points suppressed, and fakes added in their place.
    pub removed_points: usize,
    /// Fakes taken from another user's pool because the user's own ran out.
    pub borrowed: usize,
}

/// Suppresses real points by the z-scores and puts one fake in place of every
/// removed point, so the number of points per user is unchanged.
///
/// Fakes come from the user's own pool in the chunks chosen by `mix`; when
/// those run out, unused fakes from the same chunks of other users are
/// reassigned.
#[allow(clippy::too_many_arguments)]
pub fn replace(
    train: &CheckinDataset,
    partition: &ChunkPartition,
    table: &ZScoreTable,
    pool: &FakePool,
    mix: &FakeMix,
    fraction: f64,
    beta: f64,
    seed: Seed,
) -> Result<Replacement> {
    let weights = mix.weights(pool.n_chunks())?;
    let plan = build_suppression_plan(table, fraction, beta)?;
    let mask = suppression_mask(train, partition, &plan, seed.derive("replace-suppress"))?;
    let kept = train.without_mask(&mask);
    let before = train.item_sets();
    let mut after = kept.item_sets();

    // Per chunk, each user's unused fakes in ranked order.
    let mut own: Vec<BTreeMap<UserId, Vec<usize>>> = vec![BTreeMap::new(); pool.n_chunks()];
    for (c, chunk) in pool.partition.chunks.iter().enumerate() {
        for &i in &chunk.records {
            own[c].entry(pool.fakes[i].user_id).or_default().push(i);
        }
    }
    let mut used = vec![false; pool.fakes.len()];
    let mut added = Vec::new();
    let (mut removed_points, mut borrowed) = (0, 0);
    let live: Vec<usize> = (0..weights.len()).filter(|&c| weights[c] > 0.0).collect();
    if live.is_empty() {
        return Err(Error::invalid("fake mix has no positive weight"));
    }
    let live_w: Vec<f64> = live.iter().map(|&c| weights[c]).collect();
    let dist = WeightedIndex::new(&live_w).map_err(|e| Error::invalid(e.to_string()))?;

    for (&user, items) in &before {
        let have = after.entry(user).or_default();
        let missing = items.len() - have.len();
        removed_points += missing;
        if missing == 0 {
            continue;
        }
        let mut rng = seed.rng(&format!("replace/{user}"));
        for c in &mut own {
            if let Some(v) = c.get_mut(&user) {
                v.shuffle(&mut rng);
            }
        }
        for _ in 0..missing {
            let first = live[dist.sample(&mut rng)];
            let order = std::iter::once(first).chain(live.iter().copied().filter(|&c| c != first));
            let mut found = None;
            for c in order.clone() {
                if let Some(v) = own[c].get_mut(&user) {
                    while let Some(i) = v.pop() {
                        let loc = pool.fakes[i].location_id;
                        if !used[i] && !have.contains(&loc) && !items.contains(&loc) {
                            found = Some(i);
                            break;
                        }
                    }
                }
                if found.is_some() {
                    break;
                }
            }
            if found.is_none() {
                'outer: for c in order {
                    for (&other, v) in &own[c] {
                        if other == user {
                            continue;
                        }
                        for &i in v.iter().rev() {
                            let loc = pool.fakes[i].location_id;
                            if !used[i] && !have.contains(&loc) && !items.contains(&loc) {
                                found = Some(i);
                                borrowed += 1;
                                break 'outer;
                            }
                        }
                    }
                }
            }
            let i = found.ok_or_else(|| {
                Error::InsufficientFakes(format!("no unused fake left for user {user}"))
            })?;
            used[i] = true;
            let mut fake = pool.fakes[i].clone();
            fake.user_id = user;
            have.insert(fake.location_id);
            added.push(fake);
        }
    }
    Ok(Replacement {
        data: kept.extended(added),
        removed_points,
        borrowed,
    })
}

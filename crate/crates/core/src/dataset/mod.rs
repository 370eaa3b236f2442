//! Interaction datasets: location check-ins and star ratings.
//!
//! Both kinds share the generic [`Dataset`] container, which keeps records in
//! insertion order and maintains per-user and per-item indexes. A *point* is a
//! distinct `(user, item)` pair; several check-in records may map to the same
//! point (repeat visits), which downstream code treats as one binary rating.

mod io;
mod split;
mod synthetic;

use std::collections::{BTreeMap, BTreeSet};

use chrono::{NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::geo::GeoPoint;

pub use io::{
    load_checkins, load_movielens, load_ratings_csv, read_checkins, read_movielens,
    read_ratings_csv, write_checkins_csv, write_ratings_csv,
};
pub use split::{half_split, holdout_split, kfold_points, user_groups, SplitPair};
pub use synthetic::{generate_city, generate_synthetic, CityConfig};

pub type UserId = u64;
pub type ItemId = u64;

/// A record attributable to one user and one item.
pub trait Record: Clone + Send + Sync + 'static {
    fn user(&self) -> UserId;
    fn item(&self) -> ItemId;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkin {
    pub user_id: UserId,
    pub location_id: ItemId,
    pub lat: f64,
    pub lon: f64,
    /// Wall-clock time, already local to the user.
    pub local_time: NaiveDateTime,
}

impl Checkin {
    pub fn point(&self) -> GeoPoint {
        GeoPoint::new(self.lat, self.lon)
    }

    pub fn hour(&self) -> u32 {
        self.local_time.hour()
    }
}

impl Record for Checkin {
    fn user(&self) -> UserId {
        self.user_id
    }
    fn item(&self) -> ItemId {
        self.location_id
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rating {
    pub user_id: UserId,
    pub item_id: ItemId,
    /// Stars for MovieLens data, arbitrary reals for synthetic data.
    pub value: f64,
    /// Seconds since the epoch; 0 for synthetic data.
    pub timestamp: i64,
}

impl Record for Rating {
    fn user(&self) -> UserId {
        self.user_id
    }
    fn item(&self) -> ItemId {
        self.item_id
    }
}

/// Immutable collection of records with user and item indexes.
#[derive(Debug, Clone)]
pub struct Dataset<R> {
    records: Vec<R>,
    by_user: BTreeMap<UserId, Vec<usize>>,
    by_item: BTreeMap<ItemId, Vec<usize>>,
}

pub type CheckinDataset = Dataset<Checkin>;
pub type RatingDataset = Dataset<Rating>;

impl<R> Default for Dataset<R> {
    fn default() -> Self {
        Dataset {
            records: Vec::new(),
            by_user: BTreeMap::new(),
            by_item: BTreeMap::new(),
        }
    }
}

impl<R: Record> FromIterator<R> for Dataset<R> {
    fn from_iter<I: IntoIterator<Item = R>>(iter: I) -> Self {
        Dataset::new(iter.into_iter().collect())
    }
}

impl<R: Record> Dataset<R> {
    pub fn new(records: Vec<R>) -> Self {
        let mut by_user: BTreeMap<UserId, Vec<usize>> = BTreeMap::new();
        let mut by_item: BTreeMap<ItemId, Vec<usize>> = BTreeMap::new();
        for (idx, r) in records.iter().enumerate() {
            by_user.entry(r.user()).or_default().push(idx);
            by_item.entry(r.item()).or_default().push(idx);
        }
        Dataset {
            records,
            by_user,
            by_item,
        }
    }

    pub fn records(&self) -> &[R] {
        &self.records
    }

    pub fn into_records(self) -> Vec<R> {
        self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn by_user(&self) -> &BTreeMap<UserId, Vec<usize>> {
        &self.by_user
    }

    pub fn by_item(&self) -> &BTreeMap<ItemId, Vec<usize>> {
        &self.by_item
    }

    pub fn users(&self) -> impl Iterator<Item = UserId> + '_ {
        self.by_user.keys().copied()
    }

    pub fn n_users(&self) -> usize {
        self.by_user.len()
    }

    /// Distinct item identifiers, ascending.
    pub fn catalog(&self) -> Vec<ItemId> {
        self.by_item.keys().copied().collect()
    }

    pub fn n_items(&self) -> usize {
        self.by_item.len()
    }

    /// Record indexes of one user's data grouped by item.
    pub fn user_points(&self, user: UserId) -> BTreeMap<ItemId, Vec<usize>> {
        let mut out: BTreeMap<ItemId, Vec<usize>> = BTreeMap::new();
        if let Some(idxs) = self.by_user.get(&user) {
            for &i in idxs {
                out.entry(self.records[i].item()).or_default().push(i);
            }
        }
        out
    }

    /// Number of distinct `(user, item)` pairs.
    pub fn n_points(&self) -> usize {
        self.by_user
            .values()
            .map(|idxs| {
                idxs.iter()
                    .map(|&i| self.records[i].item())
                    .collect::<BTreeSet<_>>()
                    .len()
            })
            .sum()
    }

    /// Binary view: the set of items each user interacted with.
    pub fn item_sets(&self) -> BTreeMap<UserId, BTreeSet<ItemId>> {
        self.by_user
            .iter()
            .map(|(&u, idxs)| (u, idxs.iter().map(|&i| self.records[i].item()).collect()))
            .collect()
    }

    /// Dataset of the records at `indices`, in the given order.
    pub fn select(&self, indices: &[usize]) -> Self {
        Dataset::new(indices.iter().map(|&i| self.records[i].clone()).collect())
    }

    /// Dataset without the records whose index is flagged in `removed`.
    pub fn without_mask(&self, removed: &[bool]) -> Self {
        debug_assert_eq!(removed.len(), self.records.len());
        Dataset::new(
            self.records
                .iter()
                .zip(removed)
                .filter(|(_, &gone)| !gone)
                .map(|(r, _)| r.clone())
                .collect(),
        )
    }

    /// Dataset without the records at `indices`.
    pub fn without(&self, indices: &[usize]) -> Self {
        let mut mask = vec![false; self.records.len()];
        for &i in indices {
            mask[i] = true;
        }
        self.without_mask(&mask)
    }

    /// Records of the given users only.
    pub fn restrict_users(&self, users: &BTreeSet<UserId>) -> Self {
        Dataset::new(
            self.records
                .iter()
                .filter(|r| users.contains(&r.user()))
                .cloned()
                .collect(),
        )
    }

    /// This dataset followed by `extra` records.
    pub fn extended(&self, extra: impl IntoIterator<Item = R>) -> Self {
        let mut records = self.records.clone();
        records.extend(extra);
        Dataset::new(records)
    }
}

impl CheckinDataset {
    /// Coordinates of every location (first occurrence wins).
    pub fn locations(&self) -> BTreeMap<ItemId, GeoPoint> {
        self.by_item
            .iter()
            .map(|(&loc, idxs)| (loc, self.records[idxs[0]].point()))
            .collect()
    }

    /// One representative coordinate per point of `user`, ascending by location.
    pub fn user_geo_points(&self, user: UserId) -> Vec<(ItemId, GeoPoint)> {
        self.user_points(user)
            .into_iter()
            .map(|(loc, idxs)| (loc, self.records[idxs[0]].point()))
            .collect()
    }
}

//! User-based cosine Top-N over binary visit vectors.
//!
//! `w(u,v) = |u ∩ v| / sqrt(|u| |v|)` and the score of location `i` for
//! `u` is the similarity mass of users who visited `i` divided by the total
//! similarity mass of all other users. The target user is never counted as
//! their own neighbour.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;

use crate::dataset::{Dataset, ItemId, Record, UserId};

/// Sparse binary indicator of the locations a user visited.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserVector {
    pub user: UserId,
    items: Vec<ItemId>,
}

impl UserVector {
    pub fn new(user: UserId, items: impl IntoIterator<Item = ItemId>) -> Self {
        let mut items: Vec<ItemId> = items.into_iter().collect();
        items.sort_unstable();
        items.dedup();
        UserVector { user, items }
    }

    pub fn items(&self) -> &[ItemId] {
        &self.items
    }

    pub fn contains(&self, item: ItemId) -> bool {
        self.items.binary_search(&item).is_ok()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

fn overlap(a: &[ItemId], b: &[ItemId]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            Ordering::Less => i += 1,
            Ordering::Greater => j += 1,
            Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

fn weight(dot: usize, len_u: usize, len_v: usize) -> f64 {
    if dot == 0 {
        return 0.0;
    }
    dot as f64 / ((len_u * len_v) as f64).sqrt()
}

/// Cosine similarity of two binary vectors; 0 when either is all-zero.
pub fn cosine_similarity(u: &UserVector, v: &UserVector) -> f64 {
    if u.is_empty() || v.is_empty() {
        return 0.0;
    }
    weight(overlap(&u.items, &v.items), u.items.len(), v.items.len())
}

/// Frozen training population: every user's vector plus, per location, the
/// users who visited it.
#[derive(Debug, Clone)]
pub struct SimilarityContext {
    users: Vec<UserId>,
    user_items: Vec<Vec<u32>>,
    items: Vec<ItemId>,
    item_users: Vec<Vec<u32>>,
}

impl SimilarityContext {
    pub fn from_item_sets(sets: &BTreeMap<UserId, BTreeSet<ItemId>>) -> Self {
        let items: Vec<ItemId> = sets
            .values()
            .flatten()
            .copied()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let users: Vec<UserId> = sets.keys().copied().collect();
        let mut item_users = vec![Vec::new(); items.len()];
        let mut user_items = Vec::with_capacity(users.len());
        for (ui, set) in sets.values().enumerate() {
            let dense: Vec<u32> = set
                .iter()
                .map(|it| items.binary_search(it).expect("item in catalog") as u32)
                .collect();
            for &d in &dense {
                item_users[d as usize].push(ui as u32);
            }
            user_items.push(dense);
        }
        SimilarityContext {
            users,
            user_items,
            items,
            item_users,
        }
    }

    pub fn from_dataset<R: Record>(ds: &Dataset<R>) -> Self {
        Self::from_item_sets(&ds.item_sets())
    }

    /// Locations that can be recommended, ascending.
    pub fn catalog(&self) -> &[ItemId] {
        &self.items
    }

    pub fn users(&self) -> &[UserId] {
        &self.users
    }

    /// The training vector of `user`; empty when the user has no training data.
    pub fn vector(&self, user: UserId) -> UserVector {
        match self.users.binary_search(&user) {
            Ok(ui) => UserVector {
                user,
                items: self.user_items[ui]
                    .iter()
                    .map(|&d| self.items[d as usize])
                    .collect(),
            },
            Err(_) => UserVector::new(user, []),
        }
    }

    /// Users who visited `item` (the set L_i).
    pub fn visitors(&self, item: ItemId) -> Vec<UserId> {
        match self.items.binary_search(&item) {
            Ok(d) => self.item_users[d]
                .iter()
                .map(|&ui| self.users[ui as usize])
                .collect(),
            Err(_) => Vec::new(),
        }
    }

    /// Similarity of `u` to every context user in ascending user order, with
    /// `u` itself forced to zero.
    fn similarities(&self, u: &UserVector) -> Vec<f64> {
        let mut dots = vec![0usize; self.users.len()];
        for it in &u.items {
            if let Ok(d) = self.items.binary_search(it) {
                for &v in &self.item_users[d] {
                    dots[v as usize] += 1;
                }
            }
        }
        let self_idx = self.users.binary_search(&u.user).ok();
        dots.iter()
            .enumerate()
            .map(|(v, &dot)| {
                if Some(v) == self_idx {
                    0.0
                } else {
                    weight(dot, u.items.len(), self.user_items[v].len())
                }
            })
            .collect()
    }

    /// Scores of every catalog location for `u`, aligned with [`catalog`].
    ///
    /// Numerators and the denominator are accumulated in ascending user order.
    ///
    /// [`catalog`]: SimilarityContext::catalog
    pub fn scores(&self, u: &UserVector) -> Vec<f64> {
        let w = self.similarities(u);
        let denom: f64 = w.iter().sum();
        let mut num = vec![0.0; self.items.len()];
        if denom <= 0.0 {
            return num;
        }
        for (v, &wv) in w.iter().enumerate() {
            if wv > 0.0 {
                for &d in &self.user_items[v] {
                    num[d as usize] += wv;
                }
            }
        }
        for s in &mut num {
            *s /= denom;
        }
        num
    }
}

/// Similarity-weighted fraction of other users who visited `item`.
pub fn location_score(u: &UserVector, item: ItemId, ctx: &SimilarityContext) -> f64 {
    match ctx.items.binary_search(&item) {
        Ok(d) => ctx.scores(u)[d],
        Err(_) => 0.0,
    }
}

/// The `n` highest-scoring locations `u` has not visited. Ties go to the
/// lower location id; fewer than `n` candidates yield a shorter list.
pub fn top_n(u: &UserVector, ctx: &SimilarityContext, n: usize) -> Vec<ItemId> {
    let scores = ctx.scores(u);
    let mut cands: Vec<(f64, ItemId)> = ctx
        .items
        .iter()
        .zip(scores)
        .filter(|(it, _)| !u.contains(**it))
        .map(|(&it, s)| (s, it))
        .collect();
    let by_rank = |a: &(f64, ItemId), b: &(f64, ItemId)| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1));
    if cands.len() > n {
        cands.select_nth_unstable_by(n, by_rank);
        cands.truncate(n);
    }
    cands.sort_by(by_rank);
    cands.into_iter().map(|(_, it)| it).collect()
}

/// Top-N lists for `users` (their training vectors come from `ctx`).
pub fn recommend_all(
    ctx: &SimilarityContext,
    users: &[UserId],
    n: usize,
) -> BTreeMap<UserId, Vec<ItemId>> {
    users
        .par_iter()
        .map(|&u| (u, top_n(&ctx.vector(u), ctx, n)))
        .collect()
}

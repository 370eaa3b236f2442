use std::collections::BTreeSet;

use rand::seq::{index, SliceRandom};

use super::{Dataset, Record, UserId};
use crate::error::{Error, Result};
use crate::seed::Seed;

#[derive(Debug, Clone)]
pub struct SplitPair<R> {
    pub train: Dataset<R>,
    pub test: Dataset<R>,
    pub seed: Seed,
}

/// Number of points of a user with `n` points that go to the test side.
pub(crate) fn test_count(n: usize, fraction: f64) -> usize {
    ((n as f64) * fraction + 1e-9).floor() as usize
}

/// Per-user holdout: `floor(n * test_fraction)` of each user's points,
/// chosen uniformly without replacement, move to the test set. All visits of
/// a held-out point move together so train and test never share a point.
pub fn holdout_split<R: Record>(
    ds: &Dataset<R>,
    test_fraction: f64,
    seed: Seed,
) -> Result<SplitPair<R>> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "test fraction {test_fraction} not in (0, 1)"
        )));
    }
    let mut in_test = vec![false; ds.len()];
    for user in ds.users() {
        let points: Vec<Vec<usize>> = ds.user_points(user).into_values().collect();
        let k = test_count(points.len(), test_fraction);
        if k == 0 {
            continue;
        }
        let mut rng = seed.rng(&format!("holdout/{user}"));
        for pick in index::sample(&mut rng, points.len(), k) {
            for &i in &points[pick] {
                in_test[i] = true;
            }
        }
    }
    let test_idx: Vec<usize> = (0..ds.len()).filter(|&i| in_test[i]).collect();
    Ok(SplitPair {
        train: ds.without_mask(&in_test),
        test: ds.select(&test_idx),
        seed,
    })
}

/// Shuffles users and deals them round-robin into `n_groups` disjoint sets
/// whose sizes differ by at most one.
pub fn user_groups<R: Record>(
    ds: &Dataset<R>,
    n_groups: usize,
    seed: Seed,
) -> Result<Vec<BTreeSet<UserId>>> {
    if n_groups == 0 {
        return Err(Error::invalid("number of groups must be positive"));
    }
    if ds.n_users() < n_groups {
        return Err(Error::invalid(format!(
            "{} users cannot fill {n_groups} groups",
            ds.n_users()
        )));
    }
    let mut users: Vec<UserId> = ds.users().collect();
    users.shuffle(&mut seed.rng("user-groups"));
    let mut groups = vec![BTreeSet::new(); n_groups];
    for (pos, u) in users.into_iter().enumerate() {
        groups[pos % n_groups].insert(u);
    }
    Ok(groups)
}

/// Splits users into two halves; each half carries all of its users' data.
pub fn half_split<R: Record>(ds: &Dataset<R>, seed: Seed) -> Result<(Dataset<R>, Dataset<R>)> {
    if ds.n_users() < 2 {
        return Err(Error::invalid("half split needs at least two users"));
    }
    let groups = user_groups(ds, 2, seed.derive("half-split"))?;
    Ok((ds.restrict_users(&groups[0]), ds.restrict_users(&groups[1])))
}

/// Per-user k-fold assignment over points. Returns, for each fold, the record
/// indexes it holds. A user's points are shuffled and dealt round-robin, so
/// fold sizes per user differ by at most one.
pub fn kfold_points<R: Record>(
    ds: &Dataset<R>,
    n_folds: usize,
    seed: Seed,
) -> Result<Vec<Vec<usize>>> {
    if n_folds < 2 {
        return Err(Error::invalid("need at least two folds"));
    }
    let mut folds = vec![Vec::new(); n_folds];
    for user in ds.users() {
        let mut points: Vec<Vec<usize>> = ds.user_points(user).into_values().collect();
        points.shuffle(&mut seed.rng(&format!("kfold/{user}")));
        for (pos, idxs) in points.into_iter().enumerate() {
            folds[pos % n_folds].extend(idxs);
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

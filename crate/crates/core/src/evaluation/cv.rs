use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// L2 strengths searched by cross validation: `1e-4, 1e-3, ..., 1e2`.
pub const LAMBDA_GRID: [f64; 7] = [1e-4, 1e-3, 1e-2, 1e-1, 1e0, 1e1, 1e2];

/// Fold id in `0..k` for every example. Each class is shuffled with a
/// seeded generator and dealt round-robin, continuing the count across
/// classes, so folds are stratified and differ in size by at most one.
pub fn stratified_folds(labels: &[usize], k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {k}")));
    }
    if labels.len() < k {
        return Err(Error::Degenerate(format!("{} examples cannot fill {k} folds", labels.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let classes = labels.iter().max().map_or(0, |&m| m + 1);
    let mut folds = vec![0; labels.len()];
    let mut dealt = 0;
    for c in 0..classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        members.shuffle(&mut rng);
        for i in members {
            folds[i] = dealt % k;
            dealt += 1;
        }
    }
    Ok(folds)
}

/// Training and validation indices of fold `f`.
pub fn split(folds: &[usize], f: usize) -> (Vec<usize>, Vec<usize>) {
    (0..folds.len()).partition(|&i| folds[i] != f)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaSearch {
    pub lambda: f64,
    /// Mean validation score per grid entry, in grid order.
    pub scores: Vec<f64>,
}

/// Grid entry with the highest mean validation score; ties keep the
/// earlier (weaker) entry. `score(train, valid, lambda)` evaluates one fold.
pub fn select_lambda<S>(folds: &[usize], k: usize, grid: &[f64], mut score: S) -> Result<LambdaSearch>
where
    S: FnMut(&[usize], &[usize], f64) -> Result<f64>,
{
    if grid.is_empty() {
        return Err(Error::Config("empty regularization grid".into()));
    }
    let mut scores = Vec::with_capacity(grid.len());
    for &lambda in grid {
        let mut total = 0.0;
        for f in 0..k {
            let (tr, va) = split(folds, f);
            total += score(&tr, &va, lambda)?;
        }
        scores.push(total / k as f64);
    }
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    Ok(LambdaSearch {
        lambda: grid[best],
        scores,
    })
}

use std::collections::BTreeMap;

use super::check_samples;
use crate::error::{Error, Result};

/// Majority vote of the `k` nearest training samples (Euclidean, ties in
/// distance by training order). A tied vote goes to the class of the
/// nearest neighbour among the tied classes. `k` is capped at the number of
/// training samples.
pub fn knn_predict(train_x: &[Vec<f64>], train_y: &[u32], query: &[f64], k: usize) -> Result<u32> {
    let d = check_samples(train_x, train_y)?;
    if k == 0 {
        return Err(Error::InvalidInput("k must be positive".into()));
    }
    if query.len() != d {
        return Err(Error::InvalidInput(format!(
            "expected {d} features, found {}",
            query.len()
        )));
    }
    let mut dist: Vec<(f64, usize)> = train_x
        .iter()
        .enumerate()
        .map(|(i, x)| (x.iter().zip(query).map(|(a, b)| (a - b) * (a - b)).sum(), i))
        .collect();
    dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let nearest = &dist[..k.min(dist.len())];
    let mut votes: BTreeMap<u32, usize> = BTreeMap::new();
    for &(_, i) in nearest {
        *votes.entry(train_y[i]).or_default() += 1;
    }
    let top = *votes.values().max().unwrap();
    let winner = nearest
        .iter()
        .map(|&(_, i)| train_y[i])
        .find(|c| votes[c] == top)
        .unwrap();
    Ok(winner)
}

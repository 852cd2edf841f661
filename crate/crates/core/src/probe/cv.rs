use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_samples, fit_logreg, knn_predict};
use crate::error::{Error, Result};

/// One point of the model-selection grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum Hyper {
    Logreg { lambda: f64 },
    Knn { k: usize },
}

impl Hyper {
    fn rank(&self) -> (u8, f64) {
        match *self {
            Hyper::Logreg { lambda } => (0, lambda),
            Hyper::Knn { k } => (1, k as f64),
        }
    }
}

/// lambda in 1e-4..=1e2 (one per decade) and k in {1, 3, 5, 7, 11}.
pub fn default_grid() -> Vec<Hyper> {
    let mut g: Vec<Hyper> = (-4..=2)
        .map(|e| Hyper::Logreg {
            lambda: 10f64.powi(e),
        })
        .collect();
    g.extend([1, 3, 5, 7, 11].map(|k| Hyper::Knn { k }));
    g
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CvResult {
    pub hyper: Hyper,
    /// Macro F1 of every non-empty fold.
    pub fold_f1: Vec<f64>,
    pub mean_f1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CvReport {
    pub folds: usize,
    pub seed: u64,
    pub results: Vec<CvResult>,
    /// Index into `results`.
    pub best: usize,
}

impl CvReport {
    pub fn best(&self) -> &CvResult {
        &self.results[self.best]
    }
}

/// Fold index of every sample. Each class is shuffled with the seed and
/// dealt round-robin, continuing from where the previous class stopped, so
/// per-class fold sizes differ by at most one.
pub fn stratified_folds(y: &[u32], k: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let classes: BTreeSet<u32> = y.iter().copied().collect();
    let mut fold = vec![0; y.len()];
    let mut offset = 0;
    for c in classes {
        let mut idx: Vec<usize> = (0..y.len()).filter(|&i| y[i] == c).collect();
        idx.shuffle(&mut rng);
        for (j, i) in idx.iter().enumerate() {
            fold[*i] = (offset + j) % k;
        }
        offset += idx.len();
    }
    fold
}

/// F1 averaged over every class that occurs in either labels or predictions.
pub fn macro_f1(truth: &[u32], pred: &[u32]) -> f64 {
    let classes: BTreeSet<u32> = truth.iter().chain(pred).copied().collect();
    if classes.is_empty() {
        return 0.0;
    }
    let total: f64 = classes
        .iter()
        .map(|&c| {
            let tp = truth
                .iter()
                .zip(pred)
                .filter(|&(&t, &p)| t == c && p == c)
                .count();
            let n_true = truth.iter().filter(|&&t| t == c).count();
            let n_pred = pred.iter().filter(|&&p| p == c).count();
            if tp == 0 {
                0.0
            } else {
                2.0 * tp as f64 / (n_true + n_pred) as f64
            }
        })
        .sum();
    total / classes.len() as f64
}

fn predict_fold(hyper: Hyper, tx: &[Vec<f64>], ty: &[u32], qx: &[&Vec<f64>]) -> Result<Vec<u32>> {
    let distinct: BTreeSet<u32> = ty.iter().copied().collect();
    if distinct.len() == 1 {
        let only = ty[0];
        return Ok(vec![only; qx.len()]);
    }
    match hyper {
        Hyper::Logreg { lambda } => {
            let (m, _) = fit_logreg(tx, ty, lambda)?;
            qx.iter().map(|x| m.predict(x)).collect()
        }
        Hyper::Knn { k } => qx.iter().map(|x| knn_predict(tx, ty, x, k)).collect(),
    }
}

/// Macro F1 of `hyper` on every non-empty fold of `assignment`.
pub fn evaluate_hyper(
    x: &[Vec<f64>],
    y: &[u32],
    assignment: &[usize],
    folds: usize,
    hyper: Hyper,
) -> Result<CvResult> {
    let mut fold_f1 = Vec::new();
    for f in 0..folds {
        let (mut tx, mut ty, mut qx, mut qy) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for (i, &a) in assignment.iter().enumerate() {
            if a == f {
                qx.push(&x[i]);
                qy.push(y[i]);
            } else {
                tx.push(x[i].clone());
                ty.push(y[i]);
            }
        }
        if qx.is_empty() || tx.is_empty() {
            continue;
        }
        let pred = predict_fold(hyper, &tx, &ty, &qx)?;
        fold_f1.push(macro_f1(&qy, &pred));
    }
    let mean_f1 = if fold_f1.is_empty() {
        0.0
    } else {
        fold_f1.iter().sum::<f64>() / fold_f1.len() as f64
    };
    Ok(CvResult {
        hyper,
        fold_f1,
        mean_f1,
    })
}

/// Index of the highest mean F1; ties go to logistic regression over kNN,
/// then to the smaller lambda or k.
pub fn select_best(results: &[CvResult]) -> usize {
    let mut best = 0;
    for (i, r) in results.iter().enumerate().skip(1) {
        let b = &results[best];
        let better = r.mean_f1 > b.mean_f1
            || (r.mean_f1 == b.mean_f1
                && r.hyper.rank().partial_cmp(&b.hyper.rank()) == Some(std::cmp::Ordering::Less));
        if better {
            best = i;
        }
    }
    best
}

pub fn check_cv_args(x: &[Vec<f64>], y: &[u32], folds: usize, grid: &[Hyper]) -> Result<()> {
    check_samples(x, y)?;
    if folds < 2 {
        return Err(Error::InvalidInput(
            "at least two folds are required".into(),
        ));
    }
    if grid.is_empty() {
        return Err(Error::InvalidInput("empty hyperparameter grid".into()));
    }
    for h in grid {
        match *h {
            Hyper::Logreg { lambda } if !(lambda >= 0.0 && lambda.is_finite()) => {
                return Err(Error::InvalidInput(format!("invalid lambda {lambda}")));
            }
            Hyper::Knn { k: 0 } => return Err(Error::InvalidInput("k must be positive".into())),
            _ => {}
        }
    }
    Ok(())
}

/// Stratified k-fold model selection by macro F1; see [`select_best`].
pub fn cross_validate(
    x: &[Vec<f64>],
    y: &[u32],
    folds: usize,
    grid: &[Hyper],
    seed: u64,
) -> Result<CvReport> {
    check_cv_args(x, y, folds, grid)?;
    let assignment = stratified_folds(y, folds, seed);
    let results = grid
        .iter()
        .map(|&h| evaluate_hyper(x, y, &assignment, folds, h))
        .collect::<Result<Vec<_>>>()?;
    let best = select_best(&results);
    Ok(CvReport {
        folds,
        seed,
        results,
        best,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_predictor_on_balanced_pair() {
        let truth = [1, 1, 2, 2];
        assert!((macro_f1(&truth, &[1, 1, 1, 1]) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(macro_f1(&truth, &truth), 1.0);
    }

    #[test]
    fn folds_are_balanced_per_class() {
        let y: Vec<u32> = (0..53).map(|i| (i % 3) as u32 + (i / 40) as u32).collect();
        let f = stratified_folds(&y, 10, 7);
        for c in 0..4 {
            let mut sizes = [0usize; 10];
            for (i, &fi) in f.iter().enumerate() {
                if y[i] == c {
                    sizes[fi] += 1;
                }
            }
            assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        }
        assert_eq!(f, stratified_folds(&y, 10, 7));
    }

    #[test]
    fn separated_clusters_score_perfectly() {
        let x: Vec<Vec<f64>> = (0..40)
            .map(|i| vec![(i % 2) as f64 * 10.0 + (i as f64) * 0.01])
            .collect();
        let y: Vec<u32> = (0..40).map(|i| (i % 2) as u32).collect();
        let rep = cross_validate(&x, &y, 10, &default_grid(), 3).unwrap();
        assert!(rep
            .results
            .iter()
            .all(|r| r.fold_f1.iter().all(|&f| f == 1.0)));
        assert_eq!(rep.best().hyper, Hyper::Logreg { lambda: 1e-4 });
    }
}

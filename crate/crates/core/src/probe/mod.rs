//! Building roof-material probe on frozen encoder features: masked average
//! pooling, multinomial logistic regression, kNN and stratified CV.

mod cv;
mod features;
mod knn;
mod logreg;

pub use cv::{
    check_cv_args, cross_validate, default_grid, evaluate_hyper, macro_f1, select_best,
    stratified_folds, CvReport, CvResult, Hyper,
};
pub use features::{
    bilinear_upsample, downsample_mask, masked_pool, pool_building, FeatureMap, PoolingMode,
};
pub use knn::knn_predict;
pub use logreg::{
    fit_logreg, objective_and_gradient, FitReport, ProbeModel, MAX_ITERATIONS, TOLERANCE,
};

use crate::error::{Error, Result};

/// Checks that `x` is a non-empty rectangular finite matrix matching `y`.
pub(crate) fn check_samples(x: &[Vec<f64>], y: &[u32]) -> Result<usize> {
    if x.is_empty() {
        return Err(Error::InvalidInput("no samples".into()));
    }
    if x.len() != y.len() {
        return Err(Error::InvalidInput(format!(
            "{} samples but {} labels",
            x.len(),
            y.len()
        )));
    }
    let d = x[0].len();
    if d == 0 {
        return Err(Error::InvalidInput("samples have no features".into()));
    }
    for row in x {
        if row.len() != d {
            return Err(Error::InvalidInput("samples differ in length".into()));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite feature value".into()));
        }
    }
    Ok(d)
}

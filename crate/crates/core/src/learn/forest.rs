//! Bootstrap random forests over CART regression trees.

use rayon::prelude::*;

use super::tree::{fit_tree_on_indices, RegressionTree};
use super::LearnError;
use crate::matrix::Matrix;
use crate::rng::{index_below, stream};

/// Averaged ensemble of bootstrap-trained regression trees. Tree `t` draws
/// its bootstrap sample from the chacha8 stream keyed by `(seed, t)`, so the
/// forest is bit-deterministic for a fixed seed at any parallelism degree.
#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    pub trees: Vec<RegressionTree>,
    pub seed: u64,
    pub n_estimators: usize,
    pub max_depth: usize,
}

impl ForestModel {
    /// Arithmetic mean of the per-tree predictions.
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict_row(row)).sum();
        sum / self.trees.len() as f64
    }
}

/// Fits `n_estimators` trees, each on `n` draws with replacement from the
/// training rows, considering every feature at every split.
pub fn fit_forest(
    features: &Matrix,
    target: &[f64],
    n_estimators: usize,
    max_depth: usize,
    seed: u64,
) -> Result<ForestModel, LearnError> {
    if n_estimators == 0 {
        return Err(LearnError::InvalidParameter("n_estimators must be >= 1".to_string()));
    }
    let rows = features.n_rows();
    if rows == 0 {
        return Err(LearnError::EmptyInput);
    }
    if rows < 2 {
        return Err(LearnError::TooFewRows { rows, needed: 2 });
    }
    if target.len() != rows {
        return Err(LearnError::LengthMismatch { features: rows, targets: target.len() });
    }
    let trees: Result<Vec<RegressionTree>, LearnError> = (0..n_estimators)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream(seed, t as u64);
            let indices: Vec<usize> = (0..rows).map(|_| index_below(&mut rng, rows)).collect();
            fit_tree_on_indices(features, target, max_depth, 1, Some(&indices))
        })
        .collect();
    Ok(ForestModel { trees: trees?, seed, n_estimators, max_depth })
}

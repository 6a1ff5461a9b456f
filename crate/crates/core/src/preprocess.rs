//! Data cleaning and conditioning: percentile clipping, median imputation,
//! standardization, and the seeded train/test split.
//!
//! The training pipeline applies these in a fixed order — sanitize, derive
//! characteristics, clip, impute, encode — and reordering clip against
//! impute changes the fitted statistics (the clip bounds see a different
//! column), so the order is enforced by the callers and locked by tests.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::matrix::Matrix;
use crate::rng;

/// Guard below which a column counts as constant and standardizes to zero.
pub const CONSTANT_STD_GUARD: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum PreprocessError {
    #[error("empty input")]
    EmptyInput,
    #[error("quantile {0} outside [0, 1]")]
    InvalidQuantile(f64),
    #[error("column has no present values")]
    AllMissing,
    #[error("matrix contains missing or non-finite values")]
    IncompleteMatrix,
    #[error("stats cover {stats} columns but the matrix has {matrix}")]
    StatsWidthMismatch { stats: usize, matrix: usize },
    #[error("need at least 2 rows to split, got {0}")]
    TooFewRows(usize),
}

/// Linear-interpolation percentile: for sorted v[0..n-1] the value at rank
/// position q*(n-1), interpolating between neighbours.
pub fn percentile(values: &[f64], q: f64) -> Result<f64, PreprocessError> {
    if values.is_empty() {
        return Err(PreprocessError::EmptyInput);
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(PreprocessError::InvalidQuantile(q));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - lo as f64;
    Ok(sorted[lo] + frac * (sorted[hi] - sorted[lo]))
}

/// Clamps present values to the [low_q, high_q] percentile bounds computed
/// over present values only. Missing entries pass through untouched.
/// Returns (clipped column, lower bound, upper bound).
pub fn clip_outliers(
    column: &[Option<f64>],
    low_q: f64,
    high_q: f64,
) -> Result<(Vec<Option<f64>>, f64, f64), PreprocessError> {
    let present: Vec<f64> = column.iter().filter_map(|v| *v).collect();
    if present.is_empty() {
        return Err(PreprocessError::AllMissing);
    }
    let lower = percentile(&present, low_q)?;
    let upper = percentile(&present, high_q)?;
    let clipped = column
        .iter()
        .map(|v| v.map(|x| x.clamp(lower, upper)))
        .collect();
    Ok((clipped, lower, upper))
}

/// Clamps present values to fixed bounds; missing entries pass through.
/// Re-applying [`clip_outliers`]' own bounds this way is an identity.
pub fn clip_to_bounds(column: &[Option<f64>], lower: f64, upper: f64) -> Vec<Option<f64>> {
    column.iter().map(|v| v.map(|x| x.clamp(lower, upper))).collect()
}

/// Fills every missing entry with the median of the present values.
/// Returns (complete column, median).
pub fn impute_median(column: &[Option<f64>]) -> Result<(Vec<f64>, f64), PreprocessError> {
    let present: Vec<f64> = column.iter().filter_map(|v| *v).collect();
    if present.is_empty() {
        return Err(PreprocessError::AllMissing);
    }
    let median = percentile(&present, 0.5)?;
    Ok((column.iter().map(|v| v.unwrap_or(median)).collect(), median))
}

/// Clip bounds and imputation median fitted on one training column.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipStats {
    pub lower: f64,
    pub upper: f64,
    pub median: f64,
}

/// Fitted per-column statistics. `clip` is `None` for columns the cleaning
/// pipeline leaves unclipped (the ordinal layout code, which is categorical
/// until encoding).
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnStats {
    pub clip: Option<ClipStats>,
    pub mean: f64,
    pub stddev: f64,
    pub constant: bool,
}

/// Statistics for every feature column, in feature order. Embedded in model
/// files so inference reproduces the training transform.
#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessStats {
    pub columns: Vec<ColumnStats>,
}

/// Standardizes each column to (x - mean) / stddev with the population
/// standard deviation. Constant columns (stddev below the guard) map to
/// all-zero. When `stats` is supplied (the inference path) the stored
/// mean/stddev are reused instead of refitted.
pub fn standardize(
    matrix: &Matrix,
    stats: Option<&PreprocessStats>,
) -> Result<(Matrix, PreprocessStats), PreprocessError> {
    if !matrix.is_finite() {
        return Err(PreprocessError::IncompleteMatrix);
    }
    let stats = match stats {
        Some(existing) => {
            if existing.columns.len() != matrix.n_cols() {
                return Err(PreprocessError::StatsWidthMismatch {
                    stats: existing.columns.len(),
                    matrix: matrix.n_cols(),
                });
            }
            existing.clone()
        }
        None => {
            let n = matrix.n_rows().max(1) as f64;
            let columns = (0..matrix.n_cols())
                .map(|j| {
                    let col = matrix.col(j);
                    // two-pass mean with a correction term, so columns with a
                    // large offset and tiny spread still center to ~eps
                    let first = col.iter().sum::<f64>() / n;
                    let mean = first + col.iter().map(|x| x - first).sum::<f64>() / n;
                    let variance = col.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
                    let stddev = variance.sqrt();
                    ColumnStats { clip: None, mean, stddev, constant: stddev < CONSTANT_STD_GUARD }
                })
                .collect();
            PreprocessStats { columns }
        }
    };
    let mut out = Matrix::zeros(matrix.n_rows(), matrix.n_cols());
    for j in 0..matrix.n_cols() {
        let col_stats = &stats.columns[j];
        for i in 0..matrix.n_rows() {
            let v = if col_stats.constant {
                0.0
            } else {
                (matrix.get(i, j) - col_stats.mean) / col_stats.stddev
            };
            out.set(i, j, v);
        }
    }
    Ok((out, stats))
}

/// Seeded Fisher–Yates split of row indices 0..n into (train, test).
///
/// The test size is round(n * test_fraction) with half-away-from-zero
/// rounding. Indices are shuffled by the recorded chacha8 generator
/// (swap positions drawn by modulo reduction, walking from the last index
/// down); the first |test| shuffled indices form the test set.
pub fn train_test_split(
    n: usize,
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>), PreprocessError> {
    if n < 2 {
        return Err(PreprocessError::TooFewRows(n));
    }
    let test_len = ((n as f64 * test_fraction).round() as usize).min(n);
    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in (1..n).rev() {
        let j = rng::index_below(&mut rng, i + 1);
        indices.swap(i, j);
    }
    let test = indices[..test_len].to_vec();
    let train = indices[test_len..].to_vec();
    Ok((train, test))
}

//! Predictors: the linear baseline, CART regression trees, bootstrap
//! random forests, the multi-output wrapper, and the weighted ensemble.

mod ensemble;
mod forest;
mod linear;
mod persist;
mod tree;

pub use ensemble::{calibrate_weights, ensemble_predict, EnsembleModel, MultiTargetPredictor};
pub use forest::{fit_forest, ForestModel};
pub use linear::{fit_linear, LinearModel};
pub use persist::{load_model, load_model_str, save_model, save_model_string, MODEL_FORMAT_VERSION};
pub use tree::{fit_tree, RegressionTree, TreeNode};

use thiserror::Error;

use crate::features::{self, FEATURE_ORDER, LAYOUT_CODE_INDEX, TARGET_ORDER};
use crate::ingest;
use crate::matrix::Matrix;
use crate::preprocess::{self, ClipStats, ColumnStats, PreprocessStats};
use crate::rng;
use crate::types::{Dataset, GemmConfig};

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("training data is empty")]
    EmptyInput,
    #[error("need at least {needed} rows, got {rows}")]
    TooFewRows { rows: usize, needed: usize },
    #[error("{0}")]
    InvalidParameter(String),
    #[error("feature matrix and target length differ ({features} vs {targets})")]
    LengthMismatch { features: usize, targets: usize },
    #[error("input contains non-finite values")]
    NonFiniteInput,
    #[error("normal equations are singular even after ridge fallback")]
    DegenerateSystem,
    #[error("model was fitted with a different feature order")]
    ModelFeatureMismatch,
    #[error("ensemble weights must be nonnegative and sum to 1: {0}")]
    WeightSumInvalid(String),
    #[error("model file version {found:?} is not supported (expected {expected:?})")]
    VersionMismatch { found: String, expected: String },
    #[error("corrupt model file: {0}")]
    CorruptModel(String),
    #[error(transparent)]
    Preprocess(#[from] preprocess::PreprocessError),
    #[error(transparent)]
    Feature(#[from] features::FeatureError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Prediction targets, in the fixed order used by target matrices and model
/// files.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    RuntimeMs,
    PowerW,
    EnergyJ,
    Tflops,
}

impl Target {
    pub const ALL: [Target; 4] = [Target::RuntimeMs, Target::PowerW, Target::EnergyJ, Target::Tflops];

    pub fn name(self) -> &'static str {
        TARGET_ORDER[self.index()]
    }

    pub fn index(self) -> usize {
        match self {
            Target::RuntimeMs => 0,
            Target::PowerW => 1,
            Target::EnergyJ => 2,
            Target::Tflops => 3,
        }
    }
}

/// One predicted metric bundle, in physical units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub runtime_ms: f64,
    pub power_w: f64,
    pub energy_j: f64,
    pub tflops: f64,
}

impl Prediction {
    pub fn get(&self, target: Target) -> f64 {
        match target {
            Target::RuntimeMs => self.runtime_ms,
            Target::PowerW => self.power_w,
            Target::EnergyJ => self.energy_j,
            Target::Tflops => self.tflops,
        }
    }

    pub(crate) fn from_array(values: [f64; 4]) -> Self {
        Prediction {
            runtime_ms: values[0],
            power_w: values[1],
            energy_j: values[2],
            tflops: values[3],
        }
    }
}

/// Which base estimator backs each per-target model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaseKind {
    Forest,
    Linear,
}

impl BaseKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BaseKind::Forest => "forest",
            BaseKind::Linear => "linear",
        }
    }
}

impl std::str::FromStr for BaseKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "forest" => Ok(BaseKind::Forest),
            "linear" => Ok(BaseKind::Linear),
            other => Err(format!("unknown base estimator {other:?} (expected forest or linear)")),
        }
    }
}

/// Training options for [`fit_multi_output`].
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub base: BaseKind,
    pub n_estimators: usize,
    pub max_depth: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { base: BaseKind::Forest, n_estimators: 100, max_depth: 6, seed: 0 }
    }
}

/// One fitted per-target estimator.
#[derive(Debug, Clone, PartialEq)]
pub enum BaseModel {
    Forest(ForestModel),
    Linear(LinearModel),
}

impl BaseModel {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        match self {
            BaseModel::Forest(forest) => forest.predict_row(row),
            BaseModel::Linear(linear) => linear.predict_row(row),
        }
    }
}

/// The persisted multi-output predictor: fitted preprocessing statistics
/// plus one independent base model per target.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiOutputModel {
    pub stats: PreprocessStats,
    pub feature_order: Vec<String>,
    pub models: Vec<(Target, BaseModel)>,
    pub base: BaseKind,
    pub n_estimators: usize,
    pub max_depth: usize,
    pub seed: u64,
    pub rng_name: String,
}

impl MultiOutputModel {
    pub fn model_for(&self, target: Target) -> &BaseModel {
        &self.models[target.index()].1
    }
}

/// Pulls one training column out of a feature matrix, runs clip + impute,
/// and writes the cleaned column back. Returns the fitted clip statistics.
fn clean_column(matrix: &mut Matrix, col: usize) -> Result<ClipStats, preprocess::PreprocessError> {
    let raw = matrix.col_with_missing(col);
    let (clipped, lower, upper) = preprocess::clip_outliers(&raw, 0.01, 0.99)?;
    let (complete, median) = preprocess::impute_median(&clipped)?;
    matrix.set_col(col, &complete);
    Ok(ClipStats { lower, upper, median })
}

/// Fits the full training pipeline on `train`: sanitize, derive the GEMM
/// characteristics, clip and impute every numeric feature and target column,
/// encode the layout, standardize the features, then fit one base model per
/// target. Targets are cleaned but never standardized, so predictions stay
/// in physical units. All statistics are fitted on `train` only.
pub fn fit_multi_output(train: &Dataset, config: &TrainConfig) -> Result<MultiOutputModel, LearnError> {
    if train.is_empty() {
        return Err(LearnError::EmptyInput);
    }
    let sanitized = ingest::sanitize_numeric(train, &ingest::sanitize_columns())
        .expect("sanitize set is part of the schema");
    let (mut features, mut targets) = features::featurize(&sanitized)?;

    let mut column_stats = Vec::with_capacity(features.n_cols());
    for col in 0..features.n_cols() {
        if col == LAYOUT_CODE_INDEX {
            column_stats.push(None);
        } else {
            column_stats.push(Some(clean_column(&mut features, col)?));
        }
    }
    for col in 0..targets.n_cols() {
        clean_column(&mut targets, col)?;
    }

    let (scaled, scaler) = preprocess::standardize(&features, None)?;
    let stats = PreprocessStats {
        columns: scaler
            .columns
            .into_iter()
            .zip(column_stats)
            .map(|(scale, clip)| ColumnStats { clip, ..scale })
            .collect(),
    };

    let mut models = Vec::with_capacity(Target::ALL.len());
    for target in Target::ALL {
        let y = targets.col(target.index());
        let model = match config.base {
            BaseKind::Forest => {
                let seed = rng::splitmix64(config.seed ^ rng::splitmix64(target.index() as u64));
                BaseModel::Forest(fit_forest(&scaled, &y, config.n_estimators, config.max_depth, seed)?)
            }
            BaseKind::Linear => BaseModel::Linear(fit_linear(&scaled, &y)?),
        };
        models.push((target, model));
    }

    Ok(MultiOutputModel {
        stats,
        feature_order: FEATURE_ORDER.iter().map(|s| s.to_string()).collect(),
        models,
        base: config.base,
        n_estimators: config.n_estimators,
        max_depth: config.max_depth,
        seed: config.seed,
        rng_name: rng::RNG_NAME.to_string(),
    })
}

/// Predicts all four targets for each config: features are computed,
/// standardized with the stored statistics, and fed to each per-target
/// model independently.
pub fn predict(model: &MultiOutputModel, configs: &[GemmConfig]) -> Result<Vec<Prediction>, LearnError> {
    if model.feature_order != FEATURE_ORDER {
        return Err(LearnError::ModelFeatureMismatch);
    }
    if configs.is_empty() {
        return Ok(Vec::new());
    }
    let rows: Result<Vec<Vec<f64>>, _> =
        configs.iter().map(|c| features::feature_row(c).map(|r| r.to_vec())).collect();
    let matrix = Matrix::from_rows(&rows?);
    let (scaled, _) = preprocess::standardize(&matrix, Some(&model.stats))?;
    let predictions = scaled
        .rows_iter()
        .map(|row| {
            Prediction::from_array([
                model.model_for(Target::RuntimeMs).predict_row(row),
                model.model_for(Target::PowerW).predict_row(row),
                model.model_for(Target::EnergyJ).predict_row(row),
                model.model_for(Target::Tflops).predict_row(row),
            ])
        })
        .collect();
    Ok(predictions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, SynthSpec};

    fn small_spec(noise: f64) -> SynthSpec {
        SynthSpec {
            m_values: vec![128, 512, 1024, 2048],
            n_values: vec![128, 512, 1024, 2048],
            k_values: vec![256, 1024],
            noise_fraction: noise,
            seed: 11,
            ..SynthSpec::default()
        }
    }

    #[test]
    fn fits_one_model_per_target() {
        let dataset = generate(&small_spec(0.0)).unwrap();
        let config = TrainConfig { n_estimators: 10, ..TrainConfig::default() };
        let model = fit_multi_output(&dataset, &config).unwrap();
        assert_eq!(model.models.len(), 4);
        assert_eq!(model.feature_order, FEATURE_ORDER);
        for (i, (target, _)) in model.models.iter().enumerate() {
            assert_eq!(target.index(), i);
        }
    }

    #[test]
    fn memorizes_noiseless_training_rows() {
        let dataset = generate(&small_spec(0.0)).unwrap();
        let config = TrainConfig { n_estimators: 30, max_depth: 12, ..TrainConfig::default() };
        let model = fit_multi_output(&dataset, &config).unwrap();
        let configs: Vec<GemmConfig> = dataset.records.iter().map(|r| r.config.clone()).collect();
        let predictions = predict(&model, &configs).unwrap();
        let mut total_rel = 0.0;
        for (record, prediction) in dataset.records.iter().zip(&predictions) {
            total_rel += (prediction.runtime_ms - record.runtime_ms).abs() / record.runtime_ms;
        }
        let mean_rel = total_rel / predictions.len() as f64;
        assert!(mean_rel <= 0.10, "mean relative error {mean_rel}");
    }

    #[test]
    fn forest_predictions_stay_within_training_range() {
        let dataset = generate(&small_spec(0.05)).unwrap();
        let config = TrainConfig { n_estimators: 15, ..TrainConfig::default() };
        let model = fit_multi_output(&dataset, &config).unwrap();
        let (lo, hi) = dataset
            .records
            .iter()
            .map(|r| r.runtime_ms)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        // Probe configs outside the training grid.
        let probes = vec![GemmConfig::new(64, 64, 64), GemmConfig::new(4096, 4096, 4096)];
        for p in predict(&model, &probes).unwrap() {
            assert!(p.runtime_ms >= lo && p.runtime_ms <= hi);
        }
    }

    #[test]
    fn predict_on_empty_config_list_is_empty() {
        let dataset = generate(&small_spec(0.0)).unwrap();
        let config = TrainConfig { n_estimators: 5, ..TrainConfig::default() };
        let model = fit_multi_output(&dataset, &config).unwrap();
        assert!(predict(&model, &[]).unwrap().is_empty());
    }

    #[test]
    fn stale_feature_order_is_rejected() {
        let dataset = generate(&small_spec(0.0)).unwrap();
        let config = TrainConfig { n_estimators: 5, ..TrainConfig::default() };
        let mut model = fit_multi_output(&dataset, &config).unwrap();
        model.feature_order.swap(0, 1);
        assert!(matches!(
            predict(&model, &[GemmConfig::new(8, 8, 8)]),
            Err(LearnError::ModelFeatureMismatch)
        ));
    }
}

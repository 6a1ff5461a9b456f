//! Derived GEMM workload characteristics and feature-vector assembly.
//!
//! The byte model counts each matrix once at 4 bytes per element (single
//! precision): `total_flops = 2*M*N*K`, `bytes = 4*(M*K + K*N + M*N)`.

use thiserror::Error;

use crate::matrix::Matrix;
use crate::types::{Dataset, DeviceModel, GemmConfig};

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("dimension product exceeds the representable range")]
    Overflow,
    #[error("m, n and k must all be ≥ 1")]
    InvalidDimensions,
    #[error("runtime must be > 0 ms, got {0}")]
    NonPositiveRuntime(f64),
    #[error("dataset is empty")]
    EmptyDataset,
}

/// Derived size and intensity characteristics of one GEMM workload.
#[derive(Debug, Clone, PartialEq)]
pub struct GemmCharacteristics {
    pub total_flops: f64,
    pub bytes_accessed: f64,
    pub arithmetic_intensity: f64,
    pub mn: f64,
    pub mk: f64,
    pub nk: f64,
    pub mnk: f64,
}

/// Feature-vector field names, in the order they appear in every feature
/// row. This order is part of the model-file contract.
pub const FEATURE_ORDER: [&str; 18] = [
    "m",
    "n",
    "k",
    "block_m",
    "block_n",
    "block_k",
    "stages",
    "alpha",
    "beta",
    "mn",
    "mk",
    "nk",
    "mnk",
    "total_flops",
    "bytes_accessed",
    "arithmetic_intensity",
    "layout_code",
    "tile_size",
];

/// Index of the ordinal layout code within [`FEATURE_ORDER`]. The layout
/// column is categorical until encoding, so the cleaning pipeline leaves it
/// unclipped.
pub const LAYOUT_CODE_INDEX: usize = 16;

/// Prediction target names, in the order used by every target matrix and
/// model file.
pub const TARGET_ORDER: [&str; 4] = ["runtime_ms", "power_w", "energy_j", "tflops"];

pub type FeatureMatrix = Matrix;

/// Computes the derived characteristics of a config. Products are formed in
/// 128-bit integers first so absurd dimensions surface as an error instead
/// of silently wrapping.
pub fn compute_gemm_characteristics(config: &GemmConfig) -> Result<GemmCharacteristics, FeatureError> {
    if config.m < 1 || config.n < 1 || config.k < 1 {
        return Err(FeatureError::InvalidDimensions);
    }
    let m = config.m as u128;
    let n = config.n as u128;
    let k = config.k as u128;
    let mn = m.checked_mul(n).ok_or(FeatureError::Overflow)?;
    let mk = m.checked_mul(k).ok_or(FeatureError::Overflow)?;
    let nk = n.checked_mul(k).ok_or(FeatureError::Overflow)?;
    let mnk = mn.checked_mul(k).ok_or(FeatureError::Overflow)?;
    let total_flops = mnk.checked_mul(2).ok_or(FeatureError::Overflow)?;
    let bytes_accessed = mk
        .checked_add(nk)
        .and_then(|s| s.checked_add(mn))
        .and_then(|s| s.checked_mul(4))
        .ok_or(FeatureError::Overflow)?;
    let total_flops = total_flops as f64;
    let bytes_accessed = bytes_accessed as f64;
    Ok(GemmCharacteristics {
        total_flops,
        bytes_accessed,
        arithmetic_intensity: total_flops / bytes_accessed,
        mn: mn as f64,
        mk: mk as f64,
        nk: nk as f64,
        mnk: mnk as f64,
    })
}

/// Achieved throughput in TFLOPS: 2*M*N*K / runtime_s / 1e12.
pub fn tflops_from_runtime(config: &GemmConfig, runtime_ms: f64) -> Result<f64, FeatureError> {
    if !(runtime_ms > 0.0) {
        return Err(FeatureError::NonPositiveRuntime(runtime_ms));
    }
    let chars = compute_gemm_characteristics(config)?;
    Ok(chars.total_flops / (runtime_ms / 1000.0) / 1e12)
}

/// Achieved throughput as a fraction of the device peak.
pub fn tflops_efficiency(
    config: &GemmConfig,
    runtime_ms: f64,
    device: &DeviceModel,
) -> Result<f64, FeatureError> {
    Ok(tflops_from_runtime(config, runtime_ms)? / device.peak_tflops)
}

/// Achieved bandwidth as a percentage of the device peak.
pub fn memory_efficiency(achieved_bandwidth_gbs: f64, device: &DeviceModel) -> f64 {
    achieved_bandwidth_gbs / device.peak_bandwidth_gbs * 100.0
}

/// One feature row in [`FEATURE_ORDER`] order. A missing tile size encodes
/// as 0 to keep the vector fixed-width.
pub fn feature_row(config: &GemmConfig) -> Result<[f64; 18], FeatureError> {
    let chars = compute_gemm_characteristics(config)?;
    Ok([
        config.m as f64,
        config.n as f64,
        config.k as f64,
        config.block_m as f64,
        config.block_n as f64,
        config.block_k as f64,
        config.stages as f64,
        config.alpha,
        config.beta,
        chars.mn,
        chars.mk,
        chars.nk,
        chars.mnk,
        chars.total_flops,
        chars.bytes_accessed,
        chars.arithmetic_intensity,
        config.layout.code() as f64,
        config.tile_size.map_or(0.0, |t| t as f64),
    ])
}

/// Builds the feature matrix and the aligned target matrix
/// (runtime_ms, power_w, energy_j, tflops per row). Rows are emitted in
/// dataset order, one per record, never reordered.
pub fn featurize(dataset: &Dataset) -> Result<(FeatureMatrix, Matrix), FeatureError> {
    if dataset.is_empty() {
        return Err(FeatureError::EmptyDataset);
    }
    let mut features = Matrix::zeros(dataset.len(), FEATURE_ORDER.len());
    let mut targets = Matrix::zeros(dataset.len(), TARGET_ORDER.len());
    for (i, record) in dataset.records.iter().enumerate() {
        let row = feature_row(&record.config)?;
        for (j, v) in row.iter().enumerate() {
            features.set(i, j, *v);
        }
        targets.set(i, 0, record.runtime_ms);
        targets.set(i, 1, record.power_w);
        targets.set(i, 2, record.energy_j);
        targets.set(i, 3, record.tflops);
    }
    Ok((features, targets))
}

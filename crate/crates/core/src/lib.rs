//! GEMM performance toolkit: analytical roofline and occupancy models plus
//! learned multi-target predictors for runtime, power, energy and TFLOPS.
//!
//! The crate is organized around a small pipeline:
//!
//! * [`types`] — workload configs, profile records, datasets, device model
//! * [`ingest`] — the dataset CSV format and numeric sanitization
//! * [`features`] — derived GEMM characteristics and feature vectors
//! * [`preprocess`] — clipping, imputation, scaling, train/test split
//! * [`analytical`] — roofline, occupancy, grid and shared-memory formulas
//! * [`learn`] — linear baseline, CART trees, random forests, ensembles
//! * [`evaluate`] — metrics, calibration lines, correlation analysis
//! * [`synth`] — deterministic synthetic device simulator
//! * [`cli`] — the `gemm-perf-oracle` command-line front end

pub mod analytical;
pub mod cli;
pub mod evaluate;
pub mod features;
pub mod ingest;
pub mod learn;
pub mod matrix;
pub mod preprocess;
mod rng;
pub mod synth;
pub mod types;

pub use matrix::Matrix;
pub use types::{Dataset, DeviceModel, GemmConfig, Layout, ProfileRecord, Provenance};

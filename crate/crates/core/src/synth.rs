//! Deterministic synthetic device simulator.
//!
//! Generates desk-scale datasets with a known closed-form ground truth so
//! the learning pipeline can be tested end to end without hardware. The
//! noiseless model is a two-roof latency model with a fixed launch
//! overhead:
//!
//! ```text
//! compute_time = total_flops / (peak_tflops * 1e12 * eff_c)
//! memory_time  = bytes_accessed / (peak_bandwidth * 1e9 * eff_m)
//! runtime_s    = max(compute_time, memory_time) + 5e-6
//! power_w      = base + (max - base) * min(1, 0.9 * compute_time/runtime_s + 0.1)
//! energy_j     = power_w * runtime_s
//! ```
//!
//! The base efficiencies `eff_c = 0.7` and `eff_m = 0.8` are modulated by a
//! fixed per-layout and per-block lookup table (all factors within ±10%).
//! Bounded multiplicative noise `(1 + u * noise_fraction)`, with `u` drawn
//! uniformly from [-1, 1) out of a stream keyed by (seed, config hash), is
//! applied to runtime and power; energy and TFLOPS are derived from the
//! noisy values so each record stays internally consistent.

use thiserror::Error;

use crate::features::{compute_gemm_characteristics, tflops_from_runtime};
use crate::rng::{splitmix64, stream, uniform_signed};
use crate::types::{Dataset, DeviceModel, GemmConfig, Layout, ProfileRecord, Provenance};

/// Base compute efficiency against the theoretical peak.
pub const EFF_COMPUTE: f64 = 0.7;
/// Base memory efficiency against the peak bandwidth.
pub const EFF_MEMORY: f64 = 0.8;
/// Fixed kernel-launch overhead in seconds.
pub const LAUNCH_OVERHEAD_S: f64 = 5e-6;

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("grid for {0} is empty")]
    EmptyGrid(&'static str),
}

/// Compute-efficiency modulation per layout. Combined with the block
/// factor the product stays within ±10% of the base efficiency.
fn layout_compute_factor(layout: Layout) -> f64 {
    match layout {
        Layout::Nn => 1.00,
        Layout::Nt => 0.97,
        Layout::Tn => 0.945,
        Layout::Tt => 0.92,
    }
}

/// Memory-efficiency modulation per layout. Transposed operands pay a
/// little more than they do on the compute side.
fn layout_memory_factor(layout: Layout) -> f64 {
    match layout {
        Layout::Nn => 1.00,
        Layout::Nt => 0.965,
        Layout::Tn => 0.94,
        Layout::Tt => 0.925,
    }
}

/// Block-shape modulation as (compute, memory) factors; unknown shapes fall
/// back to 1.0.
fn block_factors(block_m: u32, block_n: u32, block_k: u32) -> (f64, f64) {
    match (block_m, block_n, block_k) {
        (64, 64, 32) => (1.00, 1.00),
        (128, 64, 32) => (1.05, 0.975),
        (128, 128, 8) => (0.98, 1.03),
        _ => (1.00, 1.00),
    }
}

/// Stable 64-bit FNV-1a hash of the canonical config encoding; keys the
/// per-record noise stream.
fn config_hash(config: &GemmConfig) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = OFFSET;
    let mut eat = |bytes: &[u8]| {
        for b in bytes {
            h ^= *b as u64;
            h = h.wrapping_mul(PRIME);
        }
    };
    eat(&config.m.to_le_bytes());
    eat(&config.n.to_le_bytes());
    eat(&config.k.to_le_bytes());
    eat(&[config.layout.code()]);
    eat(&config.block_m.to_le_bytes());
    eat(&config.block_n.to_le_bytes());
    eat(&config.block_k.to_le_bytes());
    eat(&config.stages.to_le_bytes());
    eat(&config.alpha.to_bits().to_le_bytes());
    eat(&config.beta.to_bits().to_le_bytes());
    eat(config.kernel_name.as_bytes());
    eat(&config.tile_size.map_or(u64::MAX, u64::from).to_le_bytes());
    h
}

/// Generation recipe: the dimension grid, the categorical sets, the noise
/// level, and the simulated device.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub m_values: Vec<u64>,
    pub n_values: Vec<u64>,
    pub k_values: Vec<u64>,
    pub layouts: Vec<Layout>,
    pub alpha_beta: Vec<(f64, f64)>,
    pub blocks: Vec<(u32, u32, u32)>,
    pub stages: u32,
    pub noise_fraction: f64,
    pub seed: u64,
    pub device: DeviceModel,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            m_values: vec![256, 512, 1024, 2048],
            n_values: vec![256, 512, 1024, 2048],
            k_values: vec![256, 512, 1024, 2048],
            layouts: Layout::ALL.to_vec(),
            alpha_beta: vec![(1.0, 0.0), (1.0, 1.0), (0.5, 0.5), (2.0, 0.0)],
            blocks: vec![(64, 64, 32), (128, 64, 32)],
            stages: 2,
            noise_fraction: 0.05,
            seed: 0,
            device: DeviceModel::default(),
        }
    }
}

impl SynthSpec {
    /// Number of records [`generate`] will emit.
    pub fn record_count(&self) -> usize {
        self.m_values.len()
            * self.n_values.len()
            * self.k_values.len()
            * self.layouts.len()
            * self.alpha_beta.len()
            * self.blocks.len()
    }

    /// Comment lines describing the simulator constants, embedded in
    /// generated CSV headers.
    pub fn header_comments(&self) -> Vec<String> {
        vec![
            format!("synthetic device model: eff_c={EFF_COMPUTE} eff_m={EFF_MEMORY} overhead_s={LAUNCH_OVERHEAD_S}"),
            format!(
                "device: peak_tflops={} peak_bandwidth_gbs={} base_power_w={} max_power_w={}",
                self.device.peak_tflops,
                self.device.peak_bandwidth_gbs,
                self.device.base_power_w,
                self.device.max_power_w
            ),
            format!("noise_fraction: {}", self.noise_fraction),
            format!("seed: {}", self.seed),
        ]
    }
}

/// Simulates one observation for a config. Deterministic in
/// (spec.seed, config): the same pair always yields the same record.
pub fn synth_record(config: &GemmConfig, spec: &SynthSpec) -> ProfileRecord {
    let device = &spec.device;
    let chars = compute_gemm_characteristics(config).expect("valid config dimensions");
    let (block_c, block_m) = block_factors(config.block_m, config.block_n, config.block_k);
    let eff_c = EFF_COMPUTE * layout_compute_factor(config.layout) * block_c;
    let eff_m = EFF_MEMORY * layout_memory_factor(config.layout) * block_m;

    let compute_time = chars.total_flops / (device.peak_tflops * 1e12 * eff_c);
    let memory_time = chars.bytes_accessed / (device.peak_bandwidth_gbs * 1e9 * eff_m);
    let runtime_s = compute_time.max(memory_time) + LAUNCH_OVERHEAD_S;
    let utilization = (0.9 * compute_time / runtime_s + 0.1).min(1.0);
    let power_w = device.base_power_w + (device.max_power_w - device.base_power_w) * utilization;

    let mut rng = stream(spec.seed, splitmix64(config_hash(config)));
    let runtime_noise = 1.0 + uniform_signed(&mut rng) * spec.noise_fraction;
    let power_noise = 1.0 + uniform_signed(&mut rng) * spec.noise_fraction;
    let runtime_s = runtime_s * runtime_noise;
    let power_w = power_w * power_noise;

    let runtime_ms = runtime_s * 1000.0;
    let mut record = ProfileRecord::new(
        config.clone(),
        runtime_ms,
        power_w,
        power_w * runtime_s,
        tflops_from_runtime(config, runtime_ms).expect("positive runtime"),
    );
    record.shared_memory_used = Some(true);
    record
}

/// Generates the full Cartesian product of the spec grids in lexicographic
/// order (m, then n, k, layout, alpha/beta, block).
pub fn generate(spec: &SynthSpec) -> Result<Dataset, SynthError> {
    if spec.m_values.is_empty() {
        return Err(SynthError::EmptyGrid("m"));
    }
    if spec.n_values.is_empty() {
        return Err(SynthError::EmptyGrid("n"));
    }
    if spec.k_values.is_empty() {
        return Err(SynthError::EmptyGrid("k"));
    }
    if spec.layouts.is_empty() {
        return Err(SynthError::EmptyGrid("layouts"));
    }
    if spec.alpha_beta.is_empty() {
        return Err(SynthError::EmptyGrid("alpha_beta"));
    }
    if spec.blocks.is_empty() {
        return Err(SynthError::EmptyGrid("blocks"));
    }

    let mut records = Vec::with_capacity(spec.record_count());
    for &m in &spec.m_values {
        for &n in &spec.n_values {
            for &k in &spec.k_values {
                for &layout in &spec.layouts {
                    for &(alpha, beta) in &spec.alpha_beta {
                        for &(block_m, block_n, block_k) in &spec.blocks {
                            let mut config = GemmConfig::new(m, n, k)
                                .with_layout(layout)
                                .with_blocks(block_m, block_n, block_k)
                                .with_scalars(alpha, beta)
                                .with_kernel_name(format!(
                                    "synth_sgemm_{block_m}x{block_n}_{block_k}x{}_{layout}",
                                    spec.stages
                                ));
                            config.stages = spec.stages;
                            records.push(synth_record(&config, spec));
                        }
                    }
                }
            }
        }
    }
    Ok(Dataset::new(records, Provenance::Synthetic))
}

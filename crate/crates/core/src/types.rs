//! Domain vocabulary shared by every module: GEMM workload configurations,
//! profiled observations, datasets, and the device description consumed by
//! the analytical models.
//!
//! All types here are immutable value objects; they are `Clone` and can be
//! shared or sent between threads freely.

use std::fmt;
use std::str::FromStr;

/// Transpose disposition of the A and B operands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Layout {
    Nn,
    Nt,
    Tn,
    Tt,
}

impl Layout {
    pub const ALL: [Layout; 4] = [Layout::Nn, Layout::Nt, Layout::Tn, Layout::Tt];

    /// Ordinal encoding used by the feature vector: nn=0, nt=1, tn=2, tt=3.
    pub fn code(self) -> u8 {
        match self {
            Layout::Nn => 0,
            Layout::Nt => 1,
            Layout::Tn => 2,
            Layout::Tt => 3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Layout::Nn => "nn",
            Layout::Nt => "nt",
            Layout::Tn => "tn",
            Layout::Tt => "tt",
        }
    }
}

impl FromStr for Layout {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "nn" => Ok(Layout::Nn),
            "nt" => Ok(Layout::Nt),
            "tn" => Ok(Layout::Tn),
            "tt" => Ok(Layout::Tt),
            other => Err(format!("unknown layout {other:?} (expected nn, nt, tn or tt)")),
        }
    }
}

impl fmt::Display for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One GEMM workload description: C = alpha * A x B + beta * C with
/// dimensions M x K times K x N, plus the kernel tiling parameters.
///
/// `tile_size` describes the square shared-memory tile of the naive kernel
/// path; the block_* fields describe the thread-block tile of library
/// kernels. The two shapes are unified in one type and either part may be
/// left at its defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct GemmConfig {
    pub m: u64,
    pub n: u64,
    pub k: u64,
    pub layout: Layout,
    pub block_m: u32,
    pub block_n: u32,
    pub block_k: u32,
    pub stages: u32,
    pub alpha: f64,
    pub beta: f64,
    pub kernel_name: String,
    pub tile_size: Option<u32>,
}

impl GemmConfig {
    /// Config with the given dimensions and conventional defaults
    /// (nn layout, 128x128x8 block, 2 stages, alpha=1, beta=0, no tile).
    pub fn new(m: u64, n: u64, k: u64) -> Self {
        GemmConfig {
            m,
            n,
            k,
            layout: Layout::Nn,
            block_m: 128,
            block_n: 128,
            block_k: 8,
            stages: 2,
            alpha: 1.0,
            beta: 0.0,
            kernel_name: "sgemm".to_string(),
            tile_size: None,
        }
    }

    pub fn with_layout(mut self, layout: Layout) -> Self {
        self.layout = layout;
        self
    }

    pub fn with_blocks(mut self, block_m: u32, block_n: u32, block_k: u32) -> Self {
        self.block_m = block_m;
        self.block_n = block_n;
        self.block_k = block_k;
        self
    }

    pub fn with_scalars(mut self, alpha: f64, beta: f64) -> Self {
        self.alpha = alpha;
        self.beta = beta;
        self
    }

    pub fn with_tile(mut self, tile_size: u32) -> Self {
        self.tile_size = Some(tile_size);
        self
    }

    pub fn with_kernel_name(mut self, name: impl Into<String>) -> Self {
        self.kernel_name = name.into();
        self
    }
}

/// A violated [`GemmConfig`] invariant. Violations are data, not failures:
/// [`validate_config`] reports every one of them and never errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConfigViolation {
    NonPositiveM,
    NonPositiveN,
    NonPositiveK,
    NonPositiveBlockM,
    NonPositiveBlockN,
    NonPositiveBlockK,
    NonPositiveStages,
    TileTooSmall,
    TileTooLarge,
}

impl fmt::Display for ConfigViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rule = match self {
            ConfigViolation::NonPositiveM => "m ≥ 1",
            ConfigViolation::NonPositiveN => "n ≥ 1",
            ConfigViolation::NonPositiveK => "k ≥ 1",
            ConfigViolation::NonPositiveBlockM => "block_m ≥ 1",
            ConfigViolation::NonPositiveBlockN => "block_n ≥ 1",
            ConfigViolation::NonPositiveBlockK => "block_k ≥ 1",
            ConfigViolation::NonPositiveStages => "stages ≥ 1",
            ConfigViolation::TileTooSmall => "tile_size ≥ 1",
            ConfigViolation::TileTooLarge => "tile_size ≤ 32",
        };
        f.write_str(rule)
    }
}

/// Checks every [`GemmConfig`] invariant and returns all violations, not
/// just the first. An empty vector means the config is valid.
pub fn validate_config(config: &GemmConfig) -> Vec<ConfigViolation> {
    let mut violations = Vec::new();
    if config.m < 1 {
        violations.push(ConfigViolation::NonPositiveM);
    }
    if config.n < 1 {
        violations.push(ConfigViolation::NonPositiveN);
    }
    if config.k < 1 {
        violations.push(ConfigViolation::NonPositiveK);
    }
    if config.block_m < 1 {
        violations.push(ConfigViolation::NonPositiveBlockM);
    }
    if config.block_n < 1 {
        violations.push(ConfigViolation::NonPositiveBlockN);
    }
    if config.block_k < 1 {
        violations.push(ConfigViolation::NonPositiveBlockK);
    }
    if config.stages < 1 {
        violations.push(ConfigViolation::NonPositiveStages);
    }
    if let Some(tile) = config.tile_size {
        if tile < 1 {
            violations.push(ConfigViolation::TileTooSmall);
        }
        if tile > 32 {
            violations.push(ConfigViolation::TileTooLarge);
        }
    }
    violations
}

/// One measured or synthesized observation attached to a [`GemmConfig`].
///
/// The four core metrics (`runtime_ms`, `power_w`, `energy_j`, `tflops`) are
/// stored as plain `f64`; a NaN value means "missing" in memory and is
/// serialized as an empty CSV cell. Telemetry fields are optional and their
/// absence is explicit (`None`), never zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileRecord {
    pub config: GemmConfig,
    pub runtime_ms: f64,
    pub power_w: f64,
    pub energy_j: f64,
    pub tflops: f64,
    pub temperature_c: Option<f64>,
    pub gpu_util_pct: Option<f64>,
    pub mem_util_pct: Option<f64>,
    pub sm_clock_mhz: Option<f64>,
    pub shared_memory_used: Option<bool>,
    pub mem_total_mb: Option<f64>,
    pub mem_free_mb: Option<f64>,
    pub mem_used_mb: Option<f64>,
}

impl ProfileRecord {
    pub fn new(config: GemmConfig, runtime_ms: f64, power_w: f64, energy_j: f64, tflops: f64) -> Self {
        ProfileRecord {
            config,
            runtime_ms,
            power_w,
            energy_j,
            tflops,
            temperature_c: None,
            gpu_util_pct: None,
            mem_util_pct: None,
            sm_clock_mhz: None,
            shared_memory_used: None,
            mem_total_mb: None,
            mem_free_mb: None,
            mem_used_mb: None,
        }
    }

    /// Field-by-field comparison at a relative tolerance, treating a missing
    /// value (NaN or `None`) as equal only to another missing value.
    pub fn approx_eq(&self, other: &ProfileRecord, rel_tol: f64) -> bool {
        fn close(a: f64, b: f64, rel: f64) -> bool {
            if a.is_nan() && b.is_nan() {
                return true;
            }
            if !a.is_finite() || !b.is_finite() {
                return a == b;
            }
            let scale = a.abs().max(b.abs()).max(1e-300);
            (a - b).abs() <= rel * scale
        }
        fn close_opt(a: Option<f64>, b: Option<f64>, rel: f64) -> bool {
            match (a, b) {
                (None, None) => true,
                (Some(x), Some(y)) => close(x, y, rel),
                _ => false,
            }
        }
        self.config.m == other.config.m
            && self.config.n == other.config.n
            && self.config.k == other.config.k
            && self.config.layout == other.config.layout
            && self.config.block_m == other.config.block_m
            && self.config.block_n == other.config.block_n
            && self.config.block_k == other.config.block_k
            && self.config.stages == other.config.stages
            && close(self.config.alpha, other.config.alpha, rel_tol)
            && close(self.config.beta, other.config.beta, rel_tol)
            && self.config.kernel_name == other.config.kernel_name
            && self.config.tile_size == other.config.tile_size
            && close(self.runtime_ms, other.runtime_ms, rel_tol)
            && close(self.power_w, other.power_w, rel_tol)
            && close(self.energy_j, other.energy_j, rel_tol)
            && close(self.tflops, other.tflops, rel_tol)
            && close_opt(self.temperature_c, other.temperature_c, rel_tol)
            && close_opt(self.gpu_util_pct, other.gpu_util_pct, rel_tol)
            && close_opt(self.mem_util_pct, other.mem_util_pct, rel_tol)
            && close_opt(self.sm_clock_mhz, other.sm_clock_mhz, rel_tol)
            && self.shared_memory_used == other.shared_memory_used
            && close_opt(self.mem_total_mb, other.mem_total_mb, rel_tol)
            && close_opt(self.mem_free_mb, other.mem_free_mb, rel_tol)
            && close_opt(self.mem_used_mb, other.mem_used_mb, rel_tol)
    }
}

/// A quality flag raised by [`validate_record`]. Flagged records stay in the
/// dataset; downstream cleaning decides what to do with them.
#[derive(Debug, Clone, PartialEq)]
pub enum RecordFlag {
    Config(ConfigViolation),
    NegativeMetric { field: &'static str },
    /// |energy - power * runtime/1000| / energy exceeded the 5% tolerance.
    EnergyInconsistent { relative_error: f64 },
    UtilizationOutOfRange { field: &'static str },
}

impl fmt::Display for RecordFlag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RecordFlag::Config(v) => write!(f, "config: {v}"),
            RecordFlag::NegativeMetric { field } => write!(f, "{field} ≥ 0"),
            RecordFlag::EnergyInconsistent { relative_error } => write!(
                f,
                "energy_j ≈ power_w × runtime_ms/1000 (off by {:.1}%)",
                relative_error * 100.0
            ),
            RecordFlag::UtilizationOutOfRange { field } => write!(f, "{field} in [0, 100]"),
        }
    }
}

/// Energy/power/runtime consistency tolerance. Measured power is sampled
/// while runtime is event-timed, so a 5% relative mismatch is tolerated.
pub const ENERGY_CONSISTENCY_TOL: f64 = 0.05;

/// Flags every violated [`ProfileRecord`] invariant. Inconsistent records
/// are flagged, not rejected.
pub fn validate_record(record: &ProfileRecord) -> Vec<RecordFlag> {
    let mut flags: Vec<RecordFlag> = validate_config(&record.config)
        .into_iter()
        .map(RecordFlag::Config)
        .collect();
    for (field, value) in [
        ("runtime_ms", record.runtime_ms),
        ("power_w", record.power_w),
        ("energy_j", record.energy_j),
        ("tflops", record.tflops),
    ] {
        if value.is_finite() && value < 0.0 {
            flags.push(RecordFlag::NegativeMetric { field });
        }
    }
    if record.runtime_ms > 0.0 && record.power_w > 0.0 && record.energy_j > 0.0 {
        let implied = record.power_w * record.runtime_ms / 1000.0;
        let rel = (record.energy_j - implied).abs() / record.energy_j;
        if rel > ENERGY_CONSISTENCY_TOL {
            flags.push(RecordFlag::EnergyInconsistent { relative_error: rel });
        }
    }
    for (field, value) in [
        ("gpu_util_pct", record.gpu_util_pct),
        ("mem_util_pct", record.mem_util_pct),
    ] {
        if let Some(v) = value {
            if !(0.0..=100.0).contains(&v) {
                flags.push(RecordFlag::UtilizationOutOfRange { field });
            }
        }
    }
    flags
}

/// Where a dataset came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Measured,
    Synthetic,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Measured => "measured",
            Provenance::Synthetic => "synthetic",
        }
    }
}

impl FromStr for Provenance {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "measured" => Ok(Provenance::Measured),
            "synthetic" => Ok(Provenance::Synthetic),
            other => Err(format!("unknown provenance {other:?}")),
        }
    }
}

/// An ordered collection of profile records. Record order is stable under
/// serialization round-trips.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub records: Vec<ProfileRecord>,
    pub provenance: Provenance,
}

impl Dataset {
    pub fn new(records: Vec<ProfileRecord>, provenance: Provenance) -> Self {
        Dataset { records, provenance }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Pure description of the target device. Defaults describe an RTX 4070
/// class part: 504.2 GB/s of memory bandwidth, 29.15 TFLOP/s single
/// precision, 1536 threads and 24 blocks per SM, 100 KiB of shared memory
/// per SM, and an 80-200 W power envelope.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceModel {
    pub peak_bandwidth_gbs: f64,
    pub peak_tflops: f64,
    pub max_threads_per_sm: u32,
    pub max_blocks_per_sm: u32,
    pub shared_mem_per_sm_bytes: u64,
    pub base_power_w: f64,
    pub max_power_w: f64,
}

impl Default for DeviceModel {
    fn default() -> Self {
        DeviceModel {
            peak_bandwidth_gbs: 504.2,
            peak_tflops: 29.15,
            max_threads_per_sm: 1536,
            max_blocks_per_sm: 24,
            shared_mem_per_sm_bytes: 102_400,
            base_power_w: 80.0,
            max_power_w: 200.0,
        }
    }
}

impl DeviceModel {
    /// Arithmetic intensity (FLOPs/Byte) at which the compute roof meets the
    /// memory roof.
    pub fn ridge_point(&self) -> f64 {
        self.peak_tflops * 1000.0 / self.peak_bandwidth_gbs
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_round_trips_and_codes() {
        for layout in Layout::ALL {
            assert_eq!(layout.as_str().parse::<Layout>().unwrap(), layout);
        }
        assert_eq!(Layout::Nn.code(), 0);
        assert_eq!(Layout::Nt.code(), 1);
        assert_eq!(Layout::Tn.code(), 2);
        assert_eq!(Layout::Tt.code(), 3);
        assert!("xx".parse::<Layout>().is_err());
    }

    #[test]
    fn paper_style_config_is_valid() {
        let config = GemmConfig::new(512, 512, 1024);
        assert!(validate_config(&config).is_empty());
    }

    #[test]
    fn zero_m_is_reported() {
        let mut config = GemmConfig::new(1, 1, 1);
        config.m = 0;
        let violations = validate_config(&config);
        assert_eq!(violations, vec![ConfigViolation::NonPositiveM]);
        assert_eq!(violations[0].to_string(), "m ≥ 1");
    }

    #[test]
    fn oversized_tile_is_reported() {
        let config = GemmConfig::new(64, 64, 64).with_tile(64);
        let violations = validate_config(&config);
        assert_eq!(violations, vec![ConfigViolation::TileTooLarge]);
        assert_eq!(violations[0].to_string(), "tile_size ≤ 32");
    }

    #[test]
    fn all_violations_are_returned() {
        let mut config = GemmConfig::new(0, 0, 1).with_tile(0);
        config.stages = 0;
        let violations = validate_config(&config);
        assert!(violations.contains(&ConfigViolation::NonPositiveM));
        assert!(violations.contains(&ConfigViolation::NonPositiveN));
        assert!(violations.contains(&ConfigViolation::NonPositiveStages));
        assert!(violations.contains(&ConfigViolation::TileTooSmall));
        assert_eq!(violations.len(), 4);
    }

    #[test]
    fn validate_config_is_pure() {
        let config = GemmConfig::new(0, 2, 3).with_tile(40);
        assert_eq!(validate_config(&config), validate_config(&config));
    }

    #[test]
    fn consistent_energy_passes() {
        // 95 W for 1.25 ms -> 0.11875 J
        let record = ProfileRecord::new(GemmConfig::new(512, 512, 1024), 1.25, 95.0, 0.11875, 1.718);
        assert!(validate_record(&record).is_empty());
    }

    #[test]
    fn inconsistent_energy_is_flagged_not_rejected() {
        let record = ProfileRecord::new(GemmConfig::new(512, 512, 1024), 1.25, 95.0, 0.5, 1.718);
        let flags = validate_record(&record);
        assert_eq!(flags.len(), 1);
        assert!(matches!(flags[0], RecordFlag::EnergyInconsistent { .. }));
    }

    #[test]
    fn missing_metrics_skip_consistency_check() {
        let record = ProfileRecord::new(GemmConfig::new(8, 8, 8), f64::NAN, 95.0, 0.5, 0.1);
        assert!(validate_record(&record).is_empty());
    }

    #[test]
    fn default_device_ridge_point() {
        let device = DeviceModel::default();
        let ridge = device.ridge_point();
        assert!(ridge.is_finite() && ridge > 0.0);
        assert!((ridge - 57.814).abs() < 0.01);
    }

    #[test]
    fn approx_eq_treats_missing_as_equal() {
        let a = ProfileRecord::new(GemmConfig::new(8, 8, 8), f64::NAN, 1.0, 2.0, 3.0);
        let b = a.clone();
        assert!(a.approx_eq(&b, 1e-9));
        let c = ProfileRecord::new(GemmConfig::new(8, 8, 8), 0.5, 1.0, 2.0, 3.0);
        assert!(!a.approx_eq(&c, 1e-9));
    }
}

//! Command-line front end: one binary, subcommand per pipeline stage.
//!
//! Exit contract: 0 on success, 1 on user/input errors (bad flags, schema
//! violations, unreadable files), 2 on an internal invariant failure
//! (a panic caught by `main`). Diagnostics go to stderr; data goes to
//! stdout or the `--output` file. Seeds are echoed in output headers
//! wherever randomness is involved.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::analytical;
use crate::evaluate;
use crate::features;
use crate::ingest;
use crate::learn::{self, BaseKind, TrainConfig};
use crate::preprocess;
use crate::synth::{generate, SynthSpec};
use crate::types::{validate_record, Dataset, DeviceModel, GemmConfig, Layout};

#[derive(Parser)]
#[command(name = "gemm-perf-oracle", version, about = "GEMM performance prediction toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Read a dataset CSV, optionally sanitize it, and write it back out
    Ingest(IngestArgs),
    /// Write the feature/target table for a dataset
    Featurize(FeaturizeArgs),
    /// Generate a synthetic dataset from the device simulator
    Synth(SynthArgs),
    /// Fit the multi-output predictor on a dataset
    Train(TrainArgs),
    /// Predict runtime/power/energy/TFLOPS for one workload
    Predict(PredictArgs),
    /// Evaluate a model file against a dataset
    Evaluate(EvaluateArgs),
    /// Print the dimension/metric correlation matrix of a dataset
    Correlate(CorrelateArgs),
    /// Attainable performance at an arithmetic intensity
    Roofline(RooflineArgs),
    /// Per-SM occupancy limits for a square tile
    Occupancy(OccupancyArgs),
    /// Print the artifact and model-format versions
    Version,
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Replace non-finite values in the core and target columns
    #[arg(long)]
    sanitize: bool,
}

#[derive(Args)]
struct FeaturizeArgs {
    #[arg(long)]
    input: PathBuf,
    /// Destination file; stdout when omitted
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Comma-separated M grid, e.g. 256,512,1024
    #[arg(long, value_delimiter = ',', required = true)]
    m: Vec<u64>,
    #[arg(long, value_delimiter = ',', required = true)]
    n: Vec<u64>,
    #[arg(long, value_delimiter = ',', required = true)]
    k: Vec<u64>,
    /// Layout subset, e.g. nn,nt,tn,tt
    #[arg(long, value_delimiter = ',')]
    layouts: Option<Vec<Layout>>,
    /// Alpha:beta pairs, e.g. 1:0,1:1,0.5:0.5,2:0
    #[arg(long = "alpha-beta", value_delimiter = ',')]
    alpha_beta: Option<Vec<String>>,
    /// Block shapes, e.g. 64x64x32,128x64x32
    #[arg(long, value_delimiter = ',')]
    blocks: Option<Vec<String>>,
    #[arg(long, default_value_t = 2)]
    stages: u32,
    /// Multiplicative noise fraction
    #[arg(long, default_value_t = 0.05)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Device description file (key=value lines)
    #[arg(long)]
    device: Option<PathBuf>,
    /// Destination file; stdout when omitted
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    input: PathBuf,
    /// Model file destination
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "forest")]
    base: BaseKind,
    #[arg(long, default_value_t = 100)]
    estimators: usize,
    #[arg(long, default_value_t = 6)]
    depth: usize,
    /// Held-out fraction used for the post-training report
    #[arg(long = "test-fraction", default_value_t = 0.2)]
    test_fraction: f64,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    m: u64,
    #[arg(long)]
    n: u64,
    #[arg(long)]
    k: u64,
    #[arg(long, default_value = "nn")]
    layout: Layout,
    /// Thread-block shape as MxNxK, e.g. 128x128x8
    #[arg(long, default_value = "128x128x8")]
    block: String,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 0.0)]
    beta: f64,
    #[arg(long)]
    tile: Option<u32>,
    #[arg(long, default_value_t = 2)]
    stages: u32,
    /// Emit a CSV row instead of the key=value line
    #[arg(long)]
    csv: bool,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    input: PathBuf,
    /// Also write the text report to this file
    #[arg(long)]
    report: Option<PathBuf>,
    /// Also write the machine-readable CSV report to this file
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct CorrelateArgs {
    #[arg(long)]
    input: PathBuf,
    /// Emit CSV instead of the aligned table
    #[arg(long)]
    csv: bool,
}

#[derive(Args)]
struct RooflineArgs {
    /// Arithmetic intensity in FLOPs/Byte
    #[arg(long)]
    ai: f64,
    /// Device description file (key=value lines)
    #[arg(long)]
    device: Option<PathBuf>,
    /// Emit a CSV header and row instead of the one-line report
    #[arg(long)]
    csv: bool,
}

#[derive(Args)]
struct OccupancyArgs {
    /// Square tile side length
    #[arg(long)]
    tile: u32,
    /// Device description file (key=value lines)
    #[arg(long)]
    device: Option<PathBuf>,
    /// Emit a CSV header and row instead of the one-line report
    #[arg(long)]
    csv: bool,
}

#[derive(Debug)]
struct UserError(String);

impl<E: std::fmt::Display> From<E> for UserError {
    fn from(e: E) -> Self {
        UserError(e.to_string())
    }
}

type CliResult = Result<(), UserError>;

fn user<T>(message: impl Into<String>) -> Result<T, UserError> {
    Err(UserError(message.into()))
}

/// Parses a device description file of `key = value` lines over the
/// [`DeviceModel`] fields; unknown keys are an error, omitted keys keep
/// their defaults.
fn load_device(path: &Path) -> Result<DeviceModel, UserError> {
    let text = fs::read_to_string(path).map_err(|e| UserError(format!("{}: {e}", path.display())))?;
    let mut device = DeviceModel::default();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return user(format!("{}:{}: expected key=value", path.display(), no + 1));
        };
        let key = key.trim();
        let value = value.trim();
        let parse_f = || value.parse::<f64>().map_err(|_| UserError(format!("bad value for {key}: {value:?}")));
        let parse_u32 = || value.parse::<u32>().map_err(|_| UserError(format!("bad value for {key}: {value:?}")));
        match key {
            "peak_bandwidth_gbs" => device.peak_bandwidth_gbs = parse_f()?,
            "peak_tflops" => device.peak_tflops = parse_f()?,
            "max_threads_per_sm" => device.max_threads_per_sm = parse_u32()?,
            "max_blocks_per_sm" => device.max_blocks_per_sm = parse_u32()?,
            "shared_mem_per_sm_bytes" => {
                device.shared_mem_per_sm_bytes =
                    value.parse().map_err(|_| UserError(format!("bad value for {key}: {value:?}")))?
            }
            "base_power_w" => device.base_power_w = parse_f()?,
            "max_power_w" => device.max_power_w = parse_f()?,
            other => return user(format!("unknown device key {other:?}")),
        }
    }
    Ok(device)
}

fn device_or_default(path: &Option<PathBuf>) -> Result<DeviceModel, UserError> {
    match path {
        Some(p) => load_device(p),
        None => Ok(DeviceModel::default()),
    }
}

fn parse_block(text: &str) -> Result<(u32, u32, u32), UserError> {
    let parts: Vec<&str> = text.split('x').collect();
    if parts.len() != 3 {
        return user(format!("bad block shape {text:?} (expected MxNxK, e.g. 128x128x8)"));
    }
    let parse = |s: &str| s.trim().parse::<u32>().map_err(|_| UserError(format!("bad block shape {text:?}")));
    Ok((parse(parts[0])?, parse(parts[1])?, parse(parts[2])?))
}

fn parse_alpha_beta(text: &str) -> Result<(f64, f64), UserError> {
    let Some((a, b)) = text.split_once(':') else {
        return user(format!("bad alpha:beta pair {text:?} (expected e.g. 1:0)"));
    };
    let parse = |s: &str| s.trim().parse::<f64>().map_err(|_| UserError(format!("bad alpha:beta pair {text:?}")));
    Ok((parse(a)?, parse(b)?))
}

fn write_or_stdout(output: &Option<PathBuf>, text: &str) -> CliResult {
    match output {
        Some(path) => fs::write(path, text).map_err(|e| UserError(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_dataset(path: &Path) -> Result<Dataset, UserError> {
    ingest::load_dataset(path).map_err(|e| UserError(format!("{}: {e}", path.display())))
}

fn run_ingest(args: &IngestArgs) -> CliResult {
    let mut dataset = load_dataset(&args.input)?;
    if args.sanitize {
        dataset = ingest::sanitize_numeric(&dataset, &ingest::sanitize_columns())?;
    }
    let flagged = dataset.records.iter().filter(|r| !validate_record(r).is_empty()).count();
    ingest::save_dataset(&dataset, &args.output)?;
    eprintln!(
        "ingested {} records ({} flagged) -> {}",
        dataset.len(),
        flagged,
        args.output.display()
    );
    Ok(())
}

fn run_featurize(args: &FeaturizeArgs) -> CliResult {
    let dataset = load_dataset(&args.input)?;
    let (features, targets) = features::featurize(&dataset)?;
    let mut out = String::new();
    out.push_str(&features::FEATURE_ORDER.join(","));
    out.push(',');
    out.push_str(&features::TARGET_ORDER.join(","));
    out.push('\n');
    for i in 0..features.n_rows() {
        let row: Vec<String> = features
            .row(i)
            .iter()
            .chain(targets.row(i).iter())
            .map(|v| if v.is_nan() { String::new() } else { format!("{v}") })
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    write_or_stdout(&args.output, &out)
}

fn run_synth(args: &SynthArgs) -> CliResult {
    let mut spec = SynthSpec {
        m_values: args.m.clone(),
        n_values: args.n.clone(),
        k_values: args.k.clone(),
        stages: args.stages,
        noise_fraction: args.noise,
        seed: args.seed,
        device: device_or_default(&args.device)?,
        ..SynthSpec::default()
    };
    if let Some(layouts) = &args.layouts {
        spec.layouts = layouts.clone();
    }
    if let Some(pairs) = &args.alpha_beta {
        spec.alpha_beta = pairs.iter().map(|p| parse_alpha_beta(p)).collect::<Result<_, _>>()?;
    }
    if let Some(blocks) = &args.blocks {
        spec.blocks = blocks.iter().map(|b| parse_block(b)).collect::<Result<_, _>>()?;
    }
    if args.noise < 0.0 {
        return user("--noise must be >= 0");
    }
    let dataset = generate(&spec)?;
    let text = ingest::dataset_to_csv_string(&dataset, &spec.header_comments());
    write_or_stdout(&args.output, &text)?;
    eprintln!("generated {} records (seed {})", dataset.len(), spec.seed);
    Ok(())
}

fn run_train(args: &TrainArgs) -> CliResult {
    let dataset = load_dataset(&args.input)?;
    if dataset.len() < 2 {
        return user(format!(
            "training requires at least 2 data rows, got {}",
            dataset.len()
        ));
    }
    if !(0.0..1.0).contains(&args.test_fraction) {
        return user("--test-fraction must be in [0, 1)");
    }
    let (train_idx, test_idx) = preprocess::train_test_split(dataset.len(), args.test_fraction, args.seed)?;
    let subset = |indices: &[usize]| Dataset {
        records: indices.iter().map(|&i| dataset.records[i].clone()).collect(),
        provenance: dataset.provenance,
    };
    let train_set = subset(&train_idx);
    let config = TrainConfig {
        base: args.base,
        n_estimators: args.estimators,
        max_depth: args.depth,
        seed: args.seed,
    };
    let model = learn::fit_multi_output(&train_set, &config)?;
    learn::save_model(&model, &args.output)?;

    let mut out = String::new();
    let _ = writeln!(
        out,
        "# train seed={} base={} estimators={} depth={} test_fraction={} train_rows={} test_rows={}",
        args.seed,
        args.base.as_str(),
        args.estimators,
        args.depth,
        args.test_fraction,
        train_idx.len(),
        test_idx.len()
    );
    if !test_idx.is_empty() {
        let report = evaluate::evaluate_model(&model, &subset(&test_idx))?;
        out.push_str(&report.render_text());
    }
    print!("{out}");
    eprintln!("model written to {}", args.output.display());
    Ok(())
}

fn run_predict(args: &PredictArgs) -> CliResult {
    let model = learn::load_model(&args.model)?;
    let (block_m, block_n, block_k) = parse_block(&args.block)?;
    let mut config = GemmConfig::new(args.m, args.n, args.k)
        .with_layout(args.layout)
        .with_blocks(block_m, block_n, block_k)
        .with_scalars(args.alpha, args.beta)
        .with_kernel_name("user_sgemm");
    config.stages = args.stages;
    config.tile_size = args.tile;
    let violations = crate::types::validate_config(&config);
    if !violations.is_empty() {
        let rules: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        return user(format!("invalid config: {}", rules.join(", ")));
    }
    let prediction = learn::predict(&model, std::slice::from_ref(&config))?
        .pop()
        .expect("one prediction per config");
    if args.csv {
        println!("runtime_ms,power_w,energy_j,tflops");
        println!(
            "{},{},{},{}",
            prediction.runtime_ms, prediction.power_w, prediction.energy_j, prediction.tflops
        );
    } else {
        println!(
            "runtime_ms={:.6} power_w={:.4} energy_j={:.6} tflops={:.4}",
            prediction.runtime_ms, prediction.power_w, prediction.energy_j, prediction.tflops
        );
    }
    Ok(())
}

fn run_evaluate(args: &EvaluateArgs) -> CliResult {
    let model = learn::load_model(&args.model)?;
    let dataset = load_dataset(&args.input)?;
    let report = evaluate::evaluate_model(&model, &dataset)?;
    let text = report.render_text();
    print!("{text}");
    if let Some(path) = &args.report {
        fs::write(path, &text).map_err(|e| UserError(format!("{}: {e}", path.display())))?;
    }
    if let Some(path) = &args.csv {
        fs::write(path, report.to_csv()).map_err(|e| UserError(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

fn run_correlate(args: &CorrelateArgs) -> CliResult {
    let dataset = load_dataset(&args.input)?;
    let matrix = evaluate::correlation_matrix(&dataset)?;
    if args.csv {
        let mut out = String::new();
        let _ = writeln!(out, "dimension,{}", features::TARGET_ORDER.join(","));
        for (d, label) in evaluate::DIMENSION_LABELS.iter().enumerate() {
            let cells: Vec<String> = (0..4)
                .map(|t| matrix.get(d, t).map_or_else(String::new, |r| format!("{r}")))
                .collect();
            let _ = writeln!(out, "{label},{}", cells.join(","));
        }
        print!("{out}");
    } else {
        print!("{:<8}", "corr");
        for name in features::TARGET_ORDER {
            print!(" {name:>12}");
        }
        println!();
        for (d, label) in evaluate::DIMENSION_LABELS.iter().enumerate() {
            print!("{label:<8}");
            for t in 0..4 {
                match matrix.get(d, t) {
                    Some(r) => print!(" {r:>12.4}"),
                    None => print!(" {:>12}", "—"),
                }
            }
            println!();
        }
    }
    Ok(())
}

fn run_roofline(args: &RooflineArgs) -> CliResult {
    let device = device_or_default(&args.device)?;
    let point = analytical::roofline(args.ai, &device)?;
    if args.csv {
        println!("ai,attainable_tflops,regime,ridge_point,peak_tflops,peak_bandwidth_gbs");
        println!(
            "{},{},{},{},{},{}",
            point.arithmetic_intensity,
            point.attainable_tflops,
            point.regime.as_str(),
            device.ridge_point(),
            device.peak_tflops,
            device.peak_bandwidth_gbs
        );
    } else {
        println!(
            "ai={} attainable_tflops={:.4} regime={} ridge_point={:.4}",
            point.arithmetic_intensity,
            point.attainable_tflops,
            point.regime.as_str(),
            device.ridge_point()
        );
    }
    Ok(())
}

fn run_occupancy(args: &OccupancyArgs) -> CliResult {
    let device = device_or_default(&args.device)?;
    if args.tile < 1 {
        return user("--tile must be >= 1");
    }
    let report = analytical::max_active_blocks(args.tile, &device)?;
    if args.csv {
        println!("tile,threads_per_block,shared_mem_bytes,blocks_limit_threads,blocks_limit_smem,blocks_limit_hw,max_active_blocks");
        println!(
            "{},{},{},{},{},{},{}",
            report.tile_size,
            report.threads_per_block,
            report.shared_mem_bytes,
            report.blocks_limit_threads,
            report.blocks_limit_smem,
            report.blocks_limit_hw,
            report.max_active_blocks
        );
    } else {
        println!(
            "tile={} threads_per_block={} shared_mem_bytes={} blocks_limit_threads={} blocks_limit_smem={} blocks_limit_hw={} max_active_blocks={}",
            report.tile_size,
            report.threads_per_block,
            report.shared_mem_bytes,
            report.blocks_limit_threads,
            report.blocks_limit_smem,
            report.blocks_limit_hw,
            report.max_active_blocks
        );
    }
    Ok(())
}

/// Parses argv and runs the requested subcommand, returning the process
/// exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        Command::Ingest(args) => run_ingest(args),
        Command::Featurize(args) => run_featurize(args),
        Command::Synth(args) => run_synth(args),
        Command::Train(args) => run_train(args),
        Command::Predict(args) => run_predict(args),
        Command::Evaluate(args) => run_evaluate(args),
        Command::Correlate(args) => run_correlate(args),
        Command::Roofline(args) => run_roofline(args),
        Command::Occupancy(args) => run_occupancy(args),
        Command::Version => {
            println!(
                "gemm-perf-oracle {} (model format {})",
                env!("CARGO_PKG_VERSION"),
                learn::MODEL_FORMAT_VERSION
            );
            Ok(())
        }
    };
    match result {
        Ok(()) => 0,
        Err(UserError(message)) => {
            eprintln!("error: {message}");
            1
        }
    }
}

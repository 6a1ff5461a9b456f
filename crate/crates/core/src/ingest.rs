//! Reads and writes the profiling dataset CSV format and performs numeric
//! sanitization ahead of the cleaning pipeline.
//!
//! The format is plain comma-separated UTF-8 with a case-sensitive header,
//! "." as the decimal separator, and an empty cell as the missing marker.
//! Lines starting with `#` are metadata comments and are skipped; a
//! `# provenance: <measured|synthetic>` comment, when present, tags the
//! dataset origin. Numbers are written with full round-trip precision.

use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::features::TARGET_ORDER;
use crate::types::{Dataset, GemmConfig, Layout, ProfileRecord, Provenance};

/// Columns every dataset file must carry, in canonical write order.
pub const REQUIRED_COLUMNS: [&str; 15] = [
    "m",
    "n",
    "k",
    "layout",
    "block_m",
    "block_n",
    "block_k",
    "stages",
    "alpha",
    "beta",
    "kernel_name",
    "runtime_ms",
    "power_w",
    "energy_j",
    "tflops",
];

/// Optional telemetry columns, written after the required ones.
pub const OPTIONAL_COLUMNS: [&str; 9] = [
    "tile_size",
    "temperature_c",
    "gpu_util_pct",
    "mem_util_pct",
    "sm_clock_mhz",
    "shared_memory_used",
    "mem_total_mb",
    "mem_free_mb",
    "mem_used_mb",
];

/// Configuration columns sanitized together with the targets before
/// training.
pub const CORE_FEATURE_COLUMNS: [&str; 10] = [
    "m",
    "n",
    "k",
    "block_m",
    "block_n",
    "block_k",
    "stages",
    "alpha",
    "beta",
    "tile_size",
];

/// The default sanitization set: core features plus targets.
pub fn sanitize_columns() -> Vec<&'static str> {
    CORE_FEATURE_COLUMNS.iter().chain(TARGET_ORDER.iter()).copied().collect()
}

pub fn is_schema_column(name: &str) -> bool {
    REQUIRED_COLUMNS.contains(&name) || OPTIONAL_COLUMNS.contains(&name)
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("missing required column {0:?}")]
    MissingColumn(String),
    #[error("line {line}, column {column:?}: cannot parse {token:?}")]
    RowParseError { line: u64, column: String, token: String },
    #[error("unknown column {0:?}")]
    UnknownColumn(String),
    #[error("csv layer: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

struct HeaderIndex {
    positions: Vec<Option<usize>>,
}

impl HeaderIndex {
    fn build(headers: &csv::StringRecord) -> Result<Self, IngestError> {
        let find = |name: &str| headers.iter().position(|h| h == name);
        for required in REQUIRED_COLUMNS {
            if find(required).is_none() {
                return Err(IngestError::MissingColumn(required.to_string()));
            }
        }
        let positions = REQUIRED_COLUMNS
            .iter()
            .chain(OPTIONAL_COLUMNS.iter())
            .map(|name| find(name))
            .collect();
        Ok(HeaderIndex { positions })
    }

    fn get<'r>(&self, record: &'r csv::StringRecord, column: &str) -> Option<&'r str> {
        let slot = REQUIRED_COLUMNS
            .iter()
            .chain(OPTIONAL_COLUMNS.iter())
            .position(|c| *c == column)
            .expect("column is part of the schema");
        self.positions[slot].and_then(|idx| record.get(idx))
    }
}

fn parse_error(line: u64, column: &str, token: &str) -> IngestError {
    IngestError::RowParseError {
        line,
        column: column.to_string(),
        token: token.to_string(),
    }
}

/// Required integer field: must hold a parseable non-negative integer.
fn required_int<T: std::str::FromStr>(idx: &HeaderIndex, record: &csv::StringRecord, column: &str, line: u64) -> Result<T, IngestError> {
    let token = idx.get(record, column).unwrap_or("");
    token.trim().parse::<T>().map_err(|_| parse_error(line, column, token))
}

/// Required float field: an empty cell is the missing marker (NaN in
/// memory); anything else must parse as a float. Non-finite tokens are kept
/// as parsed and left for `sanitize_numeric`.
fn required_float(idx: &HeaderIndex, record: &csv::StringRecord, column: &str, line: u64) -> Result<f64, IngestError> {
    let token = idx.get(record, column).unwrap_or("").trim();
    if token.is_empty() {
        return Ok(f64::NAN);
    }
    token.parse::<f64>().map_err(|_| parse_error(line, column, token))
}

/// Optional float field: empty, malformed, and non-finite tokens all map to
/// absent.
fn optional_float(idx: &HeaderIndex, record: &csv::StringRecord, column: &str) -> Option<f64> {
    let token = idx.get(record, column).unwrap_or("").trim();
    token.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn optional_int<T: std::str::FromStr>(idx: &HeaderIndex, record: &csv::StringRecord, column: &str) -> Option<T> {
    idx.get(record, column).unwrap_or("").trim().parse::<T>().ok()
}

fn optional_bool(idx: &HeaderIndex, record: &csv::StringRecord, column: &str) -> Option<bool> {
    match idx.get(record, column).unwrap_or("").trim().to_ascii_lowercase().as_str() {
        "true" | "1" => Some(true),
        "false" | "0" => Some(false),
        _ => None,
    }
}

/// Parses a dataset from CSV text. Row order is preserved.
pub fn dataset_from_csv_str(text: &str) -> Result<Dataset, IngestError> {
    let mut provenance = Provenance::Measured;
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix('#') {
            if let Some(value) = rest.trim().strip_prefix("provenance:") {
                if let Ok(p) = value.trim().parse() {
                    provenance = p;
                }
            }
        } else {
            break;
        }
    }

    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .flexible(true)
        .from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let idx = HeaderIndex::build(&headers)?;

    let mut records = Vec::new();
    for row in reader.records() {
        let row = row?;
        let line = row.position().map_or(0, csv::Position::line);
        let layout_token = idx.get(&row, "layout").unwrap_or("").trim().to_string();
        let layout: Layout = layout_token
            .parse()
            .map_err(|_| parse_error(line, "layout", &layout_token))?;
        let config = GemmConfig {
            m: required_int(&idx, &row, "m", line)?,
            n: required_int(&idx, &row, "n", line)?,
            k: required_int(&idx, &row, "k", line)?,
            layout,
            block_m: required_int(&idx, &row, "block_m", line)?,
            block_n: required_int(&idx, &row, "block_n", line)?,
            block_k: required_int(&idx, &row, "block_k", line)?,
            stages: required_int(&idx, &row, "stages", line)?,
            alpha: required_float(&idx, &row, "alpha", line)?,
            beta: required_float(&idx, &row, "beta", line)?,
            kernel_name: idx.get(&row, "kernel_name").unwrap_or("").trim().to_string(),
            tile_size: optional_int(&idx, &row, "tile_size"),
        };
        records.push(ProfileRecord {
            config,
            runtime_ms: required_float(&idx, &row, "runtime_ms", line)?,
            power_w: required_float(&idx, &row, "power_w", line)?,
            energy_j: required_float(&idx, &row, "energy_j", line)?,
            tflops: required_float(&idx, &row, "tflops", line)?,
            temperature_c: optional_float(&idx, &row, "temperature_c"),
            gpu_util_pct: optional_float(&idx, &row, "gpu_util_pct"),
            mem_util_pct: optional_float(&idx, &row, "mem_util_pct"),
            sm_clock_mhz: optional_float(&idx, &row, "sm_clock_mhz"),
            shared_memory_used: optional_bool(&idx, &row, "shared_memory_used"),
            mem_total_mb: optional_float(&idx, &row, "mem_total_mb"),
            mem_free_mb: optional_float(&idx, &row, "mem_free_mb"),
            mem_used_mb: optional_float(&idx, &row, "mem_used_mb"),
        });
    }
    Ok(Dataset::new(records, provenance))
}

/// Full round-trip float formatting; NaN (the missing marker) becomes an
/// empty cell.
fn fmt_float(value: f64) -> String {
    if value.is_nan() {
        String::new()
    } else {
        format!("{value}")
    }
}

fn fmt_optional(value: Option<f64>) -> String {
    value.map_or_else(String::new, |v| fmt_float(v))
}

/// Renders a dataset to CSV text. `extra_comments` are emitted as leading
/// `#` lines after the provenance comment.
pub fn dataset_to_csv_string(dataset: &Dataset, extra_comments: &[String]) -> String {
    let mut out = String::new();
    out.push_str(&format!("# provenance: {}\n", dataset.provenance.as_str()));
    for comment in extra_comments {
        out.push_str(&format!("# {comment}\n"));
    }
    let header: Vec<&str> = REQUIRED_COLUMNS.iter().chain(OPTIONAL_COLUMNS.iter()).copied().collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for record in &dataset.records {
        let c = &record.config;
        let fields = [
            c.m.to_string(),
            c.n.to_string(),
            c.k.to_string(),
            c.layout.as_str().to_string(),
            c.block_m.to_string(),
            c.block_n.to_string(),
            c.block_k.to_string(),
            c.stages.to_string(),
            fmt_float(c.alpha),
            fmt_float(c.beta),
            c.kernel_name.clone(),
            fmt_float(record.runtime_ms),
            fmt_float(record.power_w),
            fmt_float(record.energy_j),
            fmt_float(record.tflops),
            c.tile_size.map_or_else(String::new, |t| t.to_string()),
            fmt_optional(record.temperature_c),
            fmt_optional(record.gpu_util_pct),
            fmt_optional(record.mem_util_pct),
            fmt_optional(record.sm_clock_mhz),
            record.shared_memory_used.map_or_else(String::new, |b| b.to_string()),
            fmt_optional(record.mem_total_mb),
            fmt_optional(record.mem_free_mb),
            fmt_optional(record.mem_used_mb),
        ];
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

/// Loads a dataset file: one record per data row, order preserved.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset, IngestError> {
    let text = fs::read_to_string(path)?;
    dataset_from_csv_str(&text)
}

/// Writes a dataset file that [`load_dataset`] reproduces exactly.
pub fn save_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<(), IngestError> {
    fs::write(path, dataset_to_csv_string(dataset, &[]))?;
    Ok(())
}

fn scrub_required(value: &mut f64) {
    if !value.is_finite() {
        *value = f64::NAN;
    }
}

fn scrub_optional(value: &mut Option<f64>) {
    if matches!(value, Some(v) if !v.is_finite()) {
        *value = None;
    }
}

/// Replaces non-finite values (NaN, ±inf) in the named columns with the
/// missing marker. Integer and categorical columns cannot hold non-finite
/// values and pass through unchanged; unknown names are an error.
pub fn sanitize_numeric(dataset: &Dataset, columns: &[&str]) -> Result<Dataset, IngestError> {
    for name in columns {
        if !is_schema_column(name) {
            return Err(IngestError::UnknownColumn(name.to_string()));
        }
    }
    let mut out = dataset.clone();
    for record in &mut out.records {
        for name in columns {
            match *name {
                "alpha" => scrub_required(&mut record.config.alpha),
                "beta" => scrub_required(&mut record.config.beta),
                "runtime_ms" => scrub_required(&mut record.runtime_ms),
                "power_w" => scrub_required(&mut record.power_w),
                "energy_j" => scrub_required(&mut record.energy_j),
                "tflops" => scrub_required(&mut record.tflops),
                "temperature_c" => scrub_optional(&mut record.temperature_c),
                "gpu_util_pct" => scrub_optional(&mut record.gpu_util_pct),
                "mem_util_pct" => scrub_optional(&mut record.mem_util_pct),
                "sm_clock_mhz" => scrub_optional(&mut record.sm_clock_mhz),
                "mem_total_mb" => scrub_optional(&mut record.mem_total_mb),
                "mem_free_mb" => scrub_optional(&mut record.mem_free_mb),
                "mem_used_mb" => scrub_optional(&mut record.mem_used_mb),
                _ => {}
            }
        }
    }
    Ok(out)
}

//! Evaluation metrics, predicted-vs-actual calibration lines, and the
//! dimension/metric correlation matrix.
//!
//! All variances and covariances use the population convention, matching
//! the scaler. Percentage errors exclude rows whose actual value is within
//! 1e-12 of zero and report how many were excluded.

use thiserror::Error;

use crate::features::TARGET_ORDER;
use crate::learn::{LearnError, MultiTargetPredictor, Target};
use crate::preprocess::percentile;
use crate::types::Dataset;

/// |actual| below this is treated as zero for percentage errors.
pub const ZERO_ACTUAL_GUARD: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("vectors have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { got: usize, needed: usize },
    #[error("input is empty")]
    EmptyInput,
    #[error("variance of the reference vector is zero")]
    ZeroVariance,
    #[error("every row was excluded by the zero-actual guard")]
    AllExcluded,
    #[error("cannot parse report: {0}")]
    ReportParse(String),
    #[error(transparent)]
    Learn(#[from] LearnError),
}

fn check_lengths(actual: &[f64], predicted: &[f64]) -> Result<(), EvalError> {
    if actual.len() != predicted.len() {
        return Err(EvalError::LengthMismatch(actual.len(), predicted.len()));
    }
    Ok(())
}

/// Coefficient of determination: 1 - SS_res / SS_tot.
pub fn r2_score(actual: &[f64], predicted: &[f64]) -> Result<f64, EvalError> {
    check_lengths(actual, predicted)?;
    if actual.len() < 2 {
        return Err(EvalError::TooFewSamples { got: actual.len(), needed: 2 });
    }
    let mean = actual.iter().sum::<f64>() / actual.len() as f64;
    let ss_tot: f64 = actual.iter().map(|a| (a - mean) * (a - mean)).sum();
    if ss_tot == 0.0 {
        return Err(EvalError::ZeroVariance);
    }
    let ss_res: f64 = actual.iter().zip(predicted).map(|(a, p)| (a - p) * (a - p)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// Mean squared error.
pub fn mse(actual: &[f64], predicted: &[f64]) -> Result<f64, EvalError> {
    check_lengths(actual, predicted)?;
    if actual.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    Ok(actual.iter().zip(predicted).map(|(a, p)| (a - p) * (a - p)).sum::<f64>() / actual.len() as f64)
}

/// Mean absolute error.
pub fn mae(actual: &[f64], predicted: &[f64]) -> Result<f64, EvalError> {
    check_lengths(actual, predicted)?;
    if actual.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    Ok(actual.iter().zip(predicted).map(|(a, p)| (a - p).abs()).sum::<f64>() / actual.len() as f64)
}

/// Median and mean of the per-row percentage errors 100*|p-a|/|a|, plus the
/// count of rows excluded by the zero-actual guard.
pub fn pct_errors(actual: &[f64], predicted: &[f64]) -> Result<(f64, f64, usize), EvalError> {
    check_lengths(actual, predicted)?;
    if actual.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let mut errors = Vec::with_capacity(actual.len());
    let mut excluded = 0usize;
    for (a, p) in actual.iter().zip(predicted) {
        if a.abs() < ZERO_ACTUAL_GUARD {
            excluded += 1;
        } else {
            errors.push(100.0 * (p - a).abs() / a.abs());
        }
    }
    if errors.is_empty() {
        return Err(EvalError::AllExcluded);
    }
    let median = percentile(&errors, 0.5).expect("errors vector is non-empty");
    let mean = errors.iter().sum::<f64>() / errors.len() as f64;
    Ok((median, mean, excluded))
}

/// Least-squares line of predicted regressed on actual: returns
/// (slope alpha, intercept beta).
pub fn calibration_line(actual: &[f64], predicted: &[f64]) -> Result<(f64, f64), EvalError> {
    check_lengths(actual, predicted)?;
    let n = actual.len();
    if n < 2 {
        return Err(EvalError::TooFewSamples { got: n, needed: 2 });
    }
    let mean_a = actual.iter().sum::<f64>() / n as f64;
    let mean_p = predicted.iter().sum::<f64>() / n as f64;
    let var_a: f64 = actual.iter().map(|a| (a - mean_a) * (a - mean_a)).sum::<f64>() / n as f64;
    if var_a == 0.0 {
        return Err(EvalError::ZeroVariance);
    }
    let cov: f64 = actual
        .iter()
        .zip(predicted)
        .map(|(a, p)| (a - mean_a) * (p - mean_p))
        .sum::<f64>()
        / n as f64;
    let alpha = cov / var_a;
    Ok((alpha, mean_p - alpha * mean_a))
}

/// Pearson correlation coefficient, population form.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, EvalError> {
    check_lengths(x, y)?;
    let n = x.len();
    if n < 2 {
        return Err(EvalError::TooFewSamples { got: n, needed: 2 });
    }
    let mean_x = x.iter().sum::<f64>() / n as f64;
    let mean_y = y.iter().sum::<f64>() / n as f64;
    let var_x: f64 = x.iter().map(|v| (v - mean_x) * (v - mean_x)).sum::<f64>() / n as f64;
    let var_y: f64 = y.iter().map(|v| (v - mean_y) * (v - mean_y)).sum::<f64>() / n as f64;
    if var_x == 0.0 || var_y == 0.0 {
        return Err(EvalError::ZeroVariance);
    }
    let cov: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (a - mean_x) * (b - mean_y))
        .sum::<f64>()
        / n as f64;
    Ok(cov / (var_x.sqrt() * var_y.sqrt()))
}

/// Row labels of the correlation matrix: the dimension products.
pub const DIMENSION_LABELS: [&str; 4] = ["MxN", "MxK", "NxK", "MxNxK"];

/// 4x4 Pearson matrix between the dimension products and the measured
/// targets. Cells whose correlation is undefined (zero variance or too few
/// finite pairs) hold `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    pub values: [[Option<f64>; 4]; 4],
}

impl CorrelationMatrix {
    pub fn get(&self, dimension: usize, target: usize) -> Option<f64> {
        self.values[dimension][target]
    }
}

/// Actual values of one target column, straight from the records (NaN for
/// missing).
pub fn target_actuals(dataset: &Dataset, target_index: usize) -> Vec<f64> {
    dataset
        .records
        .iter()
        .map(|r| match target_index {
            0 => r.runtime_ms,
            1 => r.power_w,
            2 => r.energy_j,
            _ => r.tflops,
        })
        .collect()
}

fn dimension_products(dataset: &Dataset) -> [Vec<f64>; 4] {
    let mut products: [Vec<f64>; 4] = Default::default();
    for record in &dataset.records {
        let m = record.config.m as f64;
        let n = record.config.n as f64;
        let k = record.config.k as f64;
        products[0].push(m * n);
        products[1].push(m * k);
        products[2].push(n * k);
        products[3].push(m * n * k);
    }
    products
}

/// Correlates each dimension product against each measured target. Rows
/// with a missing target value drop out of that cell only.
pub fn correlation_matrix(dataset: &Dataset) -> Result<CorrelationMatrix, EvalError> {
    if dataset.len() < 2 {
        return Err(EvalError::TooFewSamples { got: dataset.len(), needed: 2 });
    }
    let products = dimension_products(dataset);
    let mut values = [[None; 4]; 4];
    for t in 0..TARGET_ORDER.len() {
        let actual = target_actuals(dataset, t);
        for d in 0..4 {
            let mut xs = Vec::with_capacity(actual.len());
            let mut ys = Vec::with_capacity(actual.len());
            for (x, y) in products[d].iter().zip(&actual) {
                if y.is_finite() {
                    xs.push(*x);
                    ys.push(*y);
                }
            }
            values[d][t] = match pearson(&xs, &ys) {
                Ok(r) => Some(r),
                Err(EvalError::ZeroVariance) | Err(EvalError::TooFewSamples { .. }) => None,
                Err(e) => return Err(e),
            };
        }
    }
    Ok(CorrelationMatrix { values })
}

/// Per-target metric bundle.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricBundle {
    pub r2: f64,
    pub mse: f64,
    pub mae: f64,
    pub median_pct_error: f64,
    pub mean_pct_error: f64,
    pub n_samples: usize,
    pub n_excluded_zero_actual: usize,
}

/// Metrics and calibration line for one target.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetReport {
    pub target: String,
    pub metrics: MetricBundle,
    pub calibration_alpha: f64,
    pub calibration_beta: f64,
}

/// Full evaluation output: one report per target plus the correlation
/// matrix of the evaluated dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub per_target: Vec<TargetReport>,
    pub correlation: CorrelationMatrix,
}

/// Evaluates a predictor on a test dataset. Metrics are computed against
/// the raw test targets; rows with a missing actual drop out of that
/// target's metrics only.
pub fn evaluate_model<M: MultiTargetPredictor>(
    model: &M,
    test: &Dataset,
) -> Result<EvaluationReport, EvalError> {
    if test.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let configs: Vec<_> = test.records.iter().map(|r| r.config.clone()).collect();
    let predictions = model.predict_configs(&configs)?;
    let mut per_target = Vec::with_capacity(Target::ALL.len());
    for target in Target::ALL {
        let raw = target_actuals(test, target.index());
        let mut actual = Vec::with_capacity(raw.len());
        let mut predicted = Vec::with_capacity(raw.len());
        for (a, p) in raw.iter().zip(&predictions) {
            if a.is_finite() {
                actual.push(*a);
                predicted.push(p.get(target));
            }
        }
        let (median_pct, mean_pct, excluded) = pct_errors(&actual, &predicted)?;
        let (alpha, beta) = calibration_line(&actual, &predicted)?;
        per_target.push(TargetReport {
            target: target.name().to_string(),
            metrics: MetricBundle {
                r2: r2_score(&actual, &predicted)?,
                mse: mse(&actual, &predicted)?,
                mae: mae(&actual, &predicted)?,
                median_pct_error: median_pct,
                mean_pct_error: mean_pct,
                n_samples: actual.len(),
                n_excluded_zero_actual: excluded,
            },
            calibration_alpha: alpha,
            calibration_beta: beta,
        });
    }
    Ok(EvaluationReport { per_target, correlation: correlation_matrix(test)? })
}

impl EvaluationReport {
    /// Aligned human-readable table. Undefined correlation cells render as
    /// "—".
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<12} {:>10} {:>14} {:>12} {:>10} {:>10} {:>7} {:>6} {:>8} {:>10}\n",
            "target", "r2", "mse", "mae", "med%err", "mean%err", "n", "excl", "alpha", "beta"
        ));
        for report in &self.per_target {
            let m = &report.metrics;
            out.push_str(&format!(
                "{:<12} {:>10.4} {:>14.6} {:>12.6} {:>10.2} {:>10.2} {:>7} {:>6} {:>8.4} {:>10.4}\n",
                report.target,
                m.r2,
                m.mse,
                m.mae,
                m.median_pct_error,
                m.mean_pct_error,
                m.n_samples,
                m.n_excluded_zero_actual,
                report.calibration_alpha,
                report.calibration_beta,
            ));
        }
        out.push('\n');
        out.push_str(&format!("{:<8}", "corr"));
        for name in TARGET_ORDER {
            out.push_str(&format!(" {name:>12}"));
        }
        out.push('\n');
        for (d, label) in DIMENSION_LABELS.iter().enumerate() {
            out.push_str(&format!("{label:<8}"));
            for t in 0..4 {
                match self.correlation.values[d][t] {
                    Some(r) => out.push_str(&format!(" {r:>12.4}")),
                    None => out.push_str(&format!(" {:>12}", "—")),
                }
            }
            out.push('\n');
        }
        out
    }

    /// Machine-readable CSV with full-precision values; parses back with
    /// [`EvaluationReport::from_csv`]. Undefined correlation cells are
    /// empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(
            "section,name,r2,mse,mae,median_pct_err,mean_pct_err,n_samples,n_excluded_zero_actual,calibration_alpha,calibration_beta\n",
        );
        for report in &self.per_target {
            let m = &report.metrics;
            out.push_str(&format!(
                "metric,{},{},{},{},{},{},{},{},{},{}\n",
                report.target,
                m.r2,
                m.mse,
                m.mae,
                m.median_pct_error,
                m.mean_pct_error,
                m.n_samples,
                m.n_excluded_zero_actual,
                report.calibration_alpha,
                report.calibration_beta,
            ));
        }
        out.push_str(&format!("section,dimension,{},,,,,,\n", TARGET_ORDER.join(",")));
        for (d, label) in DIMENSION_LABELS.iter().enumerate() {
            out.push_str(&format!("correlation,{label}"));
            for t in 0..4 {
                match self.correlation.values[d][t] {
                    Some(r) => out.push_str(&format!(",{r}")),
                    None => out.push(','),
                }
            }
            out.push_str(",,,,,\n");
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<EvaluationReport, EvalError> {
        let bad = |msg: &str| EvalError::ReportParse(msg.to_string());
        let mut per_target = Vec::new();
        let mut values = [[None; 4]; 4];
        let mut correlation_row = 0usize;
        for line in text.lines() {
            let fields: Vec<&str> = line.split(',').collect();
            match fields.first() {
                Some(&"metric") => {
                    if fields.len() < 11 {
                        return Err(bad("short metric row"));
                    }
                    let parse = |s: &str| s.parse::<f64>().map_err(|_| bad("bad float"));
                    per_target.push(TargetReport {
                        target: fields[1].to_string(),
                        metrics: MetricBundle {
                            r2: parse(fields[2])?,
                            mse: parse(fields[3])?,
                            mae: parse(fields[4])?,
                            median_pct_error: parse(fields[5])?,
                            mean_pct_error: parse(fields[6])?,
                            n_samples: fields[7].parse().map_err(|_| bad("bad count"))?,
                            n_excluded_zero_actual: fields[8].parse().map_err(|_| bad("bad count"))?,
                        },
                        calibration_alpha: parse(fields[9])?,
                        calibration_beta: parse(fields[10])?,
                    });
                }
                Some(&"correlation") => {
                    if fields.len() < 6 || correlation_row >= 4 {
                        return Err(bad("malformed correlation row"));
                    }
                    for t in 0..4 {
                        let token = fields[2 + t];
                        values[correlation_row][t] = if token.is_empty() {
                            None
                        } else {
                            Some(token.parse::<f64>().map_err(|_| bad("bad correlation"))?)
                        };
                    }
                    correlation_row += 1;
                }
                _ => continue,
            }
        }
        if per_target.len() != 4 || correlation_row != 4 {
            return Err(bad("incomplete report"));
        }
        Ok(EvaluationReport { per_target, correlation: CorrelationMatrix { values } })
    }
}

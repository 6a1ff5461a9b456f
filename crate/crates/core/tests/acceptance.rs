//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line (visible with `cargo test --test acceptance -- --nocapture`).

use gemm_perf_oracle::analytical::{effective_grid_size, max_active_blocks, roofline, shared_memory_usage};
use gemm_perf_oracle::evaluate::{
    calibration_line, evaluate_model, mae, mse, pct_errors, pearson, r2_score,
};
use gemm_perf_oracle::features::compute_gemm_characteristics;
use gemm_perf_oracle::learn::{
    fit_linear, fit_multi_output, fit_tree, load_model_str, predict, save_model_string, BaseKind,
    RegressionTree, TrainConfig, TreeNode,
};
use gemm_perf_oracle::matrix::Matrix;
use gemm_perf_oracle::preprocess::{
    clip_outliers, clip_to_bounds, impute_median, standardize, train_test_split,
};
use gemm_perf_oracle::synth::{generate, SynthSpec};
use gemm_perf_oracle::types::{Dataset, DeviceModel, GemmConfig};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn criterion(number: u32, description: &str, pass: bool) {
    println!(
        "criterion {number:02} {}: {description}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {number:02} failed: {description}");
}

fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

#[test]
fn c01_occupancy_table_for_standard_tiles() {
    let device = DeviceModel::default();
    let observed: Vec<u32> = [1u32, 4, 8, 16, 32]
        .iter()
        .map(|&tile| max_active_blocks(tile, &device).unwrap().max_active_blocks)
        .collect();
    criterion(1, "occupancy table {1,4,8,16,32} -> {24,24,24,6,1}", observed == vec![24, 24, 24, 6, 1]);
}

#[test]
fn c02_shared_memory_and_grid_formulas() {
    let pass = shared_memory_usage(16) == 2048
        && shared_memory_usage(32) == 8192
        && effective_grid_size(1000, 1000, 16) == 3969;
    criterion(2, "shared-memory bytes and effective grid size", pass);
}

#[test]
fn c03_roofline_ridge_and_attainable() {
    let device = DeviceModel::default();
    let ridge_ok = (device.ridge_point() - 57.81).abs() <= 0.01;
    let memory_point = roofline(10.0, &device).unwrap();
    let compute_point = roofline(100.0, &device).unwrap();
    let pass = ridge_ok
        && (memory_point.attainable_tflops - 5.042).abs() <= 1e-6
        && compute_point.attainable_tflops == 29.15;
    criterion(3, "ridge point 57.81 and attainable 5.042/29.15", pass);
}

#[test]
fn c04_gemm_characteristics_for_512_cube() {
    let chars = compute_gemm_characteristics(&GemmConfig::new(512, 512, 512)).unwrap();
    let pass = chars.total_flops == 268_435_456.0
        && chars.bytes_accessed == 3_145_728.0
        && (chars.arithmetic_intensity - 512.0 / 6.0).abs() <= 1e-9;
    criterion(4, "512-cube flops/bytes/intensity", pass);
}

/// Gradient-descent least-squares oracle (step from a power-iteration bound
/// on the Gram spectral radius), independent of the normal-equations path.
fn gd_least_squares(rows: &[Vec<f64>], target: &[f64]) -> Vec<f64> {
    let n = rows.len();
    let dim = rows[0].len() + 1;
    let design: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| {
            let mut row = r.clone();
            row.push(1.0);
            row
        })
        .collect();
    let gram_mul = |v: &[f64]| -> Vec<f64> {
        let mut xv = vec![0.0; n];
        for (r, row) in design.iter().enumerate() {
            xv[r] = row.iter().zip(v).map(|(a, b)| a * b).sum();
        }
        let mut out = vec![0.0; dim];
        for (r, row) in design.iter().enumerate() {
            for (j, a) in row.iter().enumerate() {
                out[j] += a * xv[r];
            }
        }
        out
    };
    let mut v = vec![1.0; dim];
    let mut lambda = 1.0;
    for _ in 0..200 {
        let w = gram_mul(&v);
        lambda = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        v = w.iter().map(|x| x / lambda).collect();
    }
    let step = 1.0 / lambda;
    let mut theta = vec![0.0; dim];
    for _ in 0..400_000 {
        let mut grad = vec![0.0; dim];
        for (r, row) in design.iter().enumerate() {
            let residual = row.iter().zip(&theta).map(|(a, b)| a * b).sum::<f64>() - target[r];
            for (j, a) in row.iter().enumerate() {
                grad[j] += a * residual;
            }
        }
        if grad.iter().map(|g| g * g).sum::<f64>().sqrt() < 1e-13 {
            break;
        }
        for (t, g) in theta.iter_mut().zip(&grad) {
            *t -= step * g;
        }
    }
    theta
}

#[test]
fn c05_metric_oracles_and_linear_baseline() {
    let mut pass = true;

    // hand-computed metric fixtures
    pass &= r2_score(&[1.0, 2.0, 3.0], &[1.0, 2.0, 5.0]).unwrap() == -1.0;
    pass &= (r2_score(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap() - 1.0).abs() <= 1e-9;
    pass &= (mse(&[0.0, 0.0], &[1.0, -1.0]).unwrap() - 1.0).abs() <= 1e-9;
    pass &= (mae(&[2.0], &[5.0]).unwrap() - 3.0).abs() <= 1e-9;
    let (median, mean, excluded) = pct_errors(&[10.0, 0.0], &[11.0, 5.0]).unwrap();
    pass &= (median - 10.0).abs() <= 1e-9 && (mean - 10.0).abs() <= 1e-9 && excluded == 1;
    let x = [1.0, 2.0, 3.0, 4.0];
    let y: Vec<f64> = x.iter().map(|v| 3.0 * v + 1.0).collect();
    pass &= (pearson(&x, &y).unwrap() - 1.0).abs() <= 1e-9;
    let neg: Vec<f64> = x.iter().map(|v| -v).collect();
    pass &= (pearson(&x, &neg).unwrap() + 1.0).abs() <= 1e-9;
    let doubled: Vec<f64> = x.iter().map(|a| 2.0 * a + 3.0).collect();
    let (alpha, beta) = calibration_line(&x, &doubled).unwrap();
    pass &= (alpha - 2.0).abs() <= 1e-9 && (beta - 3.0).abs() <= 1e-9;

    // linear regression against the iterative oracle on random 50x4 systems
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    for _ in 0..3 {
        let rows: Vec<Vec<f64>> = (0..50)
            .map(|_| (0..4).map(|_| 2.0 * uniform(&mut rng) - 1.0).collect())
            .collect();
        let target: Vec<f64> = rows
            .iter()
            .map(|r| 2.5 * r[0] - 1.25 * r[1] + 0.75 * r[2] - r[3] + 3.0 + 0.2 * (uniform(&mut rng) - 0.5))
            .collect();
        let model = fit_linear(&Matrix::from_rows(&rows), &target).unwrap();
        let oracle = gd_least_squares(&rows, &target);
        for (a, b) in model.coefficients.iter().zip(&oracle) {
            pass &= (a - b).abs() <= 1e-6;
        }
        pass &= (model.intercept - oracle[4]).abs() <= 1e-6;
    }
    criterion(5, "metric fixtures at 1e-9 and linear-vs-oracle at 1e-6", pass);
}

/// Exhaustive-search tree oracle: same split rule as the implementation
/// (variance reduction, midpoint thresholds, lowest feature then lowest
/// threshold on ties, rows with value <= threshold going left), computed by
/// brute force over every (feature, threshold) pair.
enum OracleNode {
    Leaf { prediction: f64, sample_count: usize },
    Split { feature: usize, threshold: f64, left: Box<OracleNode>, right: Box<OracleNode> },
}

fn oracle_sse(target: &[f64], idx: &[usize]) -> f64 {
    let mean = idx.iter().map(|&i| target[i]).sum::<f64>() / idx.len() as f64;
    idx.iter().map(|&i| (target[i] - mean) * (target[i] - mean)).sum()
}

fn oracle_grow(rows: &[Vec<f64>], target: &[f64], idx: Vec<usize>, depth: usize, max_depth: usize) -> OracleNode {
    let mean = idx.iter().map(|&i| target[i]).sum::<f64>() / idx.len() as f64;
    let pure = idx.iter().all(|&i| target[i] == target[idx[0]]);
    if depth >= max_depth || idx.len() < 2 || pure {
        return OracleNode::Leaf { prediction: mean, sample_count: idx.len() };
    }
    let parent = oracle_sse(target, &idx);
    let mut best: Option<(f64, usize, f64)> = None;
    for feature in 0..rows[0].len() {
        let mut values: Vec<f64> = idx.iter().map(|&i| rows[i][feature]).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for pair in values.windows(2) {
            let threshold = pair[0] + (pair[1] - pair[0]) / 2.0;
            let left: Vec<usize> = idx.iter().copied().filter(|&i| rows[i][feature] <= threshold).collect();
            let right: Vec<usize> = idx.iter().copied().filter(|&i| rows[i][feature] > threshold).collect();
            if left.is_empty() || right.is_empty() {
                continue;
            }
            let reduction = parent - oracle_sse(target, &left) - oracle_sse(target, &right);
            if reduction > 0.0 && best.map_or(true, |(r, _, _)| reduction > r) {
                best = Some((reduction, feature, threshold));
            }
        }
    }
    let Some((_, feature, threshold)) = best else {
        return OracleNode::Leaf { prediction: mean, sample_count: idx.len() };
    };
    let (left, right): (Vec<usize>, Vec<usize>) = idx.into_iter().partition(|&i| rows[i][feature] <= threshold);
    OracleNode::Split {
        feature,
        threshold,
        left: Box::new(oracle_grow(rows, target, left, depth + 1, max_depth)),
        right: Box::new(oracle_grow(rows, target, right, depth + 1, max_depth)),
    }
}

fn trees_match(tree: &RegressionTree, index: usize, oracle: &OracleNode) -> bool {
    match (&tree.nodes[index], oracle) {
        (
            TreeNode::Leaf { prediction, sample_count },
            OracleNode::Leaf { prediction: op, sample_count: oc },
        ) => sample_count == oc && (prediction - op).abs() <= 1e-12 * op.abs().max(1.0),
        (
            TreeNode::Split { feature, threshold, left, right },
            OracleNode::Split { feature: of, threshold: ot, left: ol, right: or },
        ) => {
            feature == of
                && (threshold - ot).abs() <= 1e-12 * ot.abs().max(1.0)
                && trees_match(tree, *left, ol)
                && trees_match(tree, *right, or)
        }
        _ => false,
    }
}

#[test]
fn c06_tree_matches_exhaustive_split_oracle() {
    let mut pass = true;
    for seed in [600u64, 601, 602] {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|_| (0..3).map(|_| uniform(&mut rng) * 10.0).collect())
            .collect();
        let target: Vec<f64> = rows
            .iter()
            .map(|r| 4.0 * r[0] - 2.0 * r[1] + (r[2] * 1.3).sin() * 5.0)
            .collect();
        let tree = fit_tree(&Matrix::from_rows(&rows), &target, 2, 1).unwrap();
        let oracle = oracle_grow(&rows, &target, (0..rows.len()).collect(), 0, 2);
        pass &= trees_match(&tree, 0, &oracle);
    }
    criterion(6, "depth-2 trees equal the brute-force split oracle", pass);
}

fn split_dataset(dataset: &Dataset, fraction: f64, seed: u64) -> (Dataset, Dataset) {
    let (train_idx, test_idx) = train_test_split(dataset.len(), fraction, seed).unwrap();
    let subset = |idx: &[usize]| Dataset {
        records: idx.iter().map(|&i| dataset.records[i].clone()).collect(),
        provenance: dataset.provenance,
    };
    (subset(&train_idx), subset(&test_idx))
}

#[test]
fn c07_end_to_end_learning_sanity() {
    let spec = SynthSpec { noise_fraction: 0.05, seed: 7, ..SynthSpec::default() };
    let dataset = generate(&spec).unwrap();
    assert_eq!(dataset.len(), 2048);
    let (train, test) = split_dataset(&dataset, 0.2, 42);

    let forest = fit_multi_output(
        &train,
        &TrainConfig { base: BaseKind::Forest, n_estimators: 100, max_depth: 6, seed: 42 },
    )
    .unwrap();
    let forest_report = evaluate_model(&forest, &test).unwrap();
    let linear = fit_multi_output(
        &train,
        &TrainConfig { base: BaseKind::Linear, n_estimators: 100, max_depth: 6, seed: 42 },
    )
    .unwrap();
    let linear_report = evaluate_model(&linear, &test).unwrap();

    let forest_runtime_r2 = forest_report.per_target[0].metrics.r2;
    let linear_runtime_r2 = linear_report.per_target[0].metrics.r2;
    let all_above = forest_report.per_target.iter().all(|t| t.metrics.r2 >= 0.60);
    println!(
        "  forest runtime r2 = {forest_runtime_r2:.4}, linear runtime r2 = {linear_runtime_r2:.4}"
    );
    for report in &forest_report.per_target {
        println!("  forest {:<12} r2 = {:.4}", report.target, report.metrics.r2);
    }
    criterion(
        7,
        "forest: runtime r2 >= 0.90, all targets >= 0.60, beats linear on runtime",
        forest_runtime_r2 >= 0.90 && all_above && forest_runtime_r2 > linear_runtime_r2,
    );
}

#[test]
fn c08_qualitative_correlation_pattern() {
    // size-spanning grid with a narrow K so the output size, not the depth,
    // carries the power signal
    let spec = SynthSpec {
        m_values: vec![64, 512, 1024, 2048, 4096],
        n_values: vec![64, 512, 1024, 2048, 4096],
        k_values: vec![192, 256],
        noise_fraction: 0.0,
        seed: 7,
        ..SynthSpec::default()
    };
    let dataset = generate(&spec).unwrap();
    let mnk: Vec<f64> = dataset
        .records
        .iter()
        .map(|r| (r.config.m * r.config.n * r.config.k) as f64)
        .collect();
    let mn: Vec<f64> = dataset.records.iter().map(|r| (r.config.m * r.config.n) as f64).collect();
    let nk: Vec<f64> = dataset.records.iter().map(|r| (r.config.n * r.config.k) as f64).collect();
    let runtime: Vec<f64> = dataset.records.iter().map(|r| r.runtime_ms).collect();
    let power: Vec<f64> = dataset.records.iter().map(|r| r.power_w).collect();

    let runtime_corr = pearson(&mnk, &runtime).unwrap();
    let mn_power = pearson(&mn, &power).unwrap();
    let nk_power = pearson(&nk, &power).unwrap();
    println!("  corr(MxNxK, runtime) = {runtime_corr:.4}; corr(MxN, power) = {mn_power:.4} vs corr(NxK, power) = {nk_power:.4}");
    criterion(
        8,
        "corr(MxNxK, runtime) >= 0.95 and corr(MxN, power) > corr(NxK, power)",
        runtime_corr >= 0.95 && mn_power > nk_power,
    );
}

#[test]
fn c09_determinism_and_persistence() {
    let spec = SynthSpec {
        m_values: vec![128, 1024],
        n_values: vec![128, 1024],
        k_values: vec![256, 512],
        noise_fraction: 0.05,
        seed: 9,
        ..SynthSpec::default()
    };
    let dataset = generate(&spec).unwrap();
    let (train, _) = split_dataset(&dataset, 0.2, 42);
    let config = TrainConfig { base: BaseKind::Forest, n_estimators: 20, max_depth: 5, seed: 42 };

    let first = fit_multi_output(&train, &config).unwrap();
    let second = fit_multi_output(&train, &config).unwrap();
    let bytes_first = save_model_string(&first);
    let bytes_second = save_model_string(&second);

    let probes: Vec<GemmConfig> =
        vec![GemmConfig::new(333, 777, 512), GemmConfig::new(2048, 64, 384)];
    let before = predict(&first, &probes).unwrap();
    let reloaded = load_model_str(&bytes_first).unwrap();
    let after = predict(&reloaded, &probes).unwrap();

    criterion(
        9,
        "identical seeds give identical model bytes; save/load keeps predictions bit-identical",
        bytes_first == bytes_second && before == after,
    );
}

#[test]
fn c10_preprocessing_invariants_randomized() {
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    let mut pass = true;

    // 1000 random columns: clip idempotence under fitted bounds, then
    // completeness and boundedness after imputation
    for _ in 0..1000 {
        let len = 1 + (rng.next_u64() % 150) as usize;
        let column: Vec<Option<f64>> = (0..len)
            .map(|_| {
                if rng.next_u64() % 4 == 0 {
                    None
                } else {
                    let magnitude = (uniform(&mut rng) * 12.0).exp();
                    Some((uniform(&mut rng) * 2.0 - 1.0) * magnitude)
                }
            })
            .collect();
        if column.iter().all(Option::is_none) {
            continue;
        }
        let (clipped, lower, upper) = clip_outliers(&column, 0.01, 0.99).unwrap();
        pass &= clip_to_bounds(&clipped, lower, upper) == clipped;
        let (complete, median) = impute_median(&clipped).unwrap();
        pass &= complete.len() == column.len();
        pass &= complete.iter().all(|v| v.is_finite() && *v >= lower && *v <= upper);
        pass &= median >= lower && median <= upper;
    }

    // 1000 random columns through the scaler: centered and unit-scaled (or
    // exactly zero for constant columns)
    for case in 0..1000 {
        let len = 2 + (rng.next_u64() % 120) as usize;
        let constant = case % 7 == 0;
        let base = (uniform(&mut rng) * 2.0 - 1.0) * 1e6;
        let rows: Vec<Vec<f64>> = (0..len)
            .map(|_| vec![if constant { base } else { base + uniform(&mut rng) * 1e4 }])
            .collect();
        let matrix = Matrix::from_rows(&rows);
        let (scaled, stats) = standardize(&matrix, None).unwrap();
        let col = scaled.col(0);
        let n = col.len() as f64;
        let mean = col.iter().sum::<f64>() / n;
        let std = (col.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt();
        pass &= mean.abs() <= 1e-9;
        pass &= std == 0.0 || (std - 1.0).abs() <= 1e-9;
        if constant {
            pass &= stats.columns[0].constant && col.iter().all(|v| *v == 0.0);
        }
    }

    criterion(10, "clip/impute/scale invariants over 2000 randomized cases", pass);
}

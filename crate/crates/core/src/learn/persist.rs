//! Versioned text persistence for [`MultiOutputModel`].
//!
//! The file is line-oriented UTF-8: a `gemm-perf-oracle-model v1` header,
//! metadata, the feature order, per-column preprocessing statistics, the
//! per-target model arrays, and a trailing `checksum sha256 <hex>` line
//! computed over everything before it. Floats are written in shortest
//! round-trip form, so a save/load cycle reproduces predictions bit for
//! bit.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::forest::ForestModel;
use super::linear::LinearModel;
use super::tree::{RegressionTree, TreeNode};
use super::{BaseKind, BaseModel, LearnError, MultiOutputModel, Target};
use crate::preprocess::{ClipStats, ColumnStats, PreprocessStats};

pub const MODEL_FORMAT_VERSION: &str = "v1";
const HEADER_PREFIX: &str = "gemm-perf-oracle-model";

fn sha256_hex(payload: &str) -> String {
    let digest = Sha256::digest(payload.as_bytes());
    let mut hex = String::with_capacity(64);
    for byte in digest {
        let _ = write!(hex, "{byte:02x}");
    }
    hex
}

fn push_column(out: &mut String, name: &str, stats: &ColumnStats) {
    match &stats.clip {
        Some(clip) => {
            let _ = write!(out, "column {name} clip {} {} {}", clip.lower, clip.upper, clip.median);
        }
        None => {
            let _ = write!(out, "column {name} noclip");
        }
    }
    let _ = write!(out, " scale {} {}", stats.mean, stats.stddev);
    if stats.constant {
        out.push_str(" constant");
    }
    out.push('\n');
}

fn push_tree(out: &mut String, index: usize, tree: &RegressionTree) {
    let _ = writeln!(out, "tree {index} {} {}", tree.nodes.len(), tree.max_depth);
    for node in &tree.nodes {
        match node {
            TreeNode::Split { feature, threshold, left, right } => {
                let _ = writeln!(out, "node split {feature} {threshold} {left} {right}");
            }
            TreeNode::Leaf { prediction, sample_count } => {
                let _ = writeln!(out, "node leaf {prediction} {sample_count}");
            }
        }
    }
}

/// Renders a model to its canonical text form. Byte-identical for models
/// fitted from identical data and seeds.
pub fn save_model_string(model: &MultiOutputModel) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{HEADER_PREFIX} {MODEL_FORMAT_VERSION}");
    let _ = writeln!(out, "meta seed {}", model.seed);
    let _ = writeln!(out, "meta rng {}", model.rng_name);
    let _ = writeln!(out, "meta base {}", model.base.as_str());
    let _ = writeln!(out, "meta n_estimators {}", model.n_estimators);
    let _ = writeln!(out, "meta max_depth {}", model.max_depth);
    let _ = writeln!(out, "feature_order {}", model.feature_order.join(" "));
    for (name, stats) in model.feature_order.iter().zip(&model.stats.columns) {
        push_column(&mut out, name, stats);
    }
    for (target, base) in &model.models {
        match base {
            BaseModel::Forest(forest) => {
                let _ = writeln!(
                    out,
                    "target {} forest {} {} {}",
                    target.name(),
                    forest.n_estimators,
                    forest.max_depth,
                    forest.seed
                );
                for (i, tree) in forest.trees.iter().enumerate() {
                    push_tree(&mut out, i, tree);
                }
            }
            BaseModel::Linear(linear) => {
                let mut line = format!("target {} linear {}", target.name(), linear.intercept);
                for c in &linear.coefficients {
                    let _ = write!(line, " {c}");
                }
                let _ = writeln!(out, "{line}");
            }
        }
    }
    let checksum = sha256_hex(&out);
    let _ = writeln!(out, "checksum sha256 {checksum}");
    out
}

pub fn save_model(model: &MultiOutputModel, path: impl AsRef<Path>) -> Result<(), LearnError> {
    fs::write(path, save_model_string(model))?;
    Ok(())
}

fn corrupt(line_no: usize, message: impl Into<String>) -> LearnError {
    LearnError::CorruptModel(format!("line {line_no}: {}", message.into()))
}

struct Parser<'a> {
    lines: Vec<&'a str>,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&'a str> {
        self.lines.get(self.pos).copied()
    }

    fn next_line(&mut self) -> Option<&'a str> {
        let line = self.peek()?;
        self.pos += 1;
        Some(line)
    }

    fn line_no(&self) -> usize {
        self.pos + 1
    }
}

fn parse_f64(token: &str, line_no: usize) -> Result<f64, LearnError> {
    token.parse().map_err(|_| corrupt(line_no, format!("bad float {token:?}")))
}

fn parse_usize(token: &str, line_no: usize) -> Result<usize, LearnError> {
    token.parse().map_err(|_| corrupt(line_no, format!("bad integer {token:?}")))
}

fn parse_u64(token: &str, line_no: usize) -> Result<u64, LearnError> {
    token.parse().map_err(|_| corrupt(line_no, format!("bad integer {token:?}")))
}

fn parse_column(line: &str, line_no: usize) -> Result<(String, ColumnStats), LearnError> {
    let tokens: Vec<&str> = line.split_whitespace().collect();
    // column <name> clip <lo> <hi> <med> scale <mean> <std> [constant]
    // column <name> noclip scale <mean> <std> [constant]
    let name = tokens.get(1).ok_or_else(|| corrupt(line_no, "missing column name"))?.to_string();
    let (clip, rest) = match tokens.get(2) {
        Some(&"clip") if tokens.len() >= 9 => (
            Some(ClipStats {
                lower: parse_f64(tokens[3], line_no)?,
                upper: parse_f64(tokens[4], line_no)?,
                median: parse_f64(tokens[5], line_no)?,
            }),
            &tokens[6..],
        ),
        Some(&"noclip") if tokens.len() >= 6 => (None, &tokens[3..]),
        _ => return Err(corrupt(line_no, "malformed column statistics")),
    };
    if rest[0] != "scale" {
        return Err(corrupt(line_no, "expected scale section"));
    }
    let mean = parse_f64(rest[1], line_no)?;
    let stddev = parse_f64(rest[2], line_no)?;
    let constant = rest.get(3) == Some(&"constant");
    Ok((name, ColumnStats { clip, mean, stddev, constant }))
}

fn parse_tree(parser: &mut Parser<'_>, expected_index: usize) -> Result<RegressionTree, LearnError> {
    let line_no = parser.line_no();
    let line = parser.next_line().ok_or_else(|| corrupt(line_no, "missing tree header"))?;
    let tokens: Vec<&str> = line.split_whitespace().collect();
    if tokens.len() != 4 || tokens[0] != "tree" {
        return Err(corrupt(line_no, "expected tree header"));
    }
    if parse_usize(tokens[1], line_no)? != expected_index {
        return Err(corrupt(line_no, "tree index out of order"));
    }
    let n_nodes = parse_usize(tokens[2], line_no)?;
    let max_depth = parse_usize(tokens[3], line_no)?;
    let mut nodes = Vec::with_capacity(n_nodes);
    for _ in 0..n_nodes {
        let line_no = parser.line_no();
        let line = parser.next_line().ok_or_else(|| corrupt(line_no, "missing node line"))?;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.as_slice() {
            ["node", "split", feature, threshold, left, right] => nodes.push(TreeNode::Split {
                feature: parse_usize(feature, line_no)?,
                threshold: parse_f64(threshold, line_no)?,
                left: parse_usize(left, line_no)?,
                right: parse_usize(right, line_no)?,
            }),
            ["node", "leaf", prediction, count] => nodes.push(TreeNode::Leaf {
                prediction: parse_f64(prediction, line_no)?,
                sample_count: parse_usize(count, line_no)?,
            }),
            _ => return Err(corrupt(line_no, "malformed node line")),
        }
    }
    for node in &nodes {
        if let TreeNode::Split { left, right, .. } = node {
            if *left >= nodes.len() || *right >= nodes.len() {
                return Err(corrupt(line_no, "node child index out of range"));
            }
        }
    }
    Ok(RegressionTree { nodes, max_depth })
}

/// Parses a model from its canonical text form, verifying the version tag
/// and the trailing checksum.
pub fn load_model_str(text: &str) -> Result<MultiOutputModel, LearnError> {
    let all_lines: Vec<&str> = text.lines().collect();
    if all_lines.is_empty() {
        return Err(LearnError::CorruptModel("empty file".to_string()));
    }

    // header and version
    let header: Vec<&str> = all_lines[0].split_whitespace().collect();
    if header.first() != Some(&HEADER_PREFIX) {
        return Err(LearnError::CorruptModel("missing model header".to_string()));
    }
    let version = header.get(1).copied().unwrap_or("");
    if version != MODEL_FORMAT_VERSION {
        return Err(LearnError::VersionMismatch {
            found: version.to_string(),
            expected: MODEL_FORMAT_VERSION.to_string(),
        });
    }

    // checksum over everything before the checksum line
    let last = *all_lines.last().unwrap();
    let checksum_tokens: Vec<&str> = last.split_whitespace().collect();
    if checksum_tokens.len() != 3 || checksum_tokens[0] != "checksum" || checksum_tokens[1] != "sha256" {
        return Err(LearnError::CorruptModel("missing checksum line".to_string()));
    }
    let payload_len = text
        .rfind("checksum sha256")
        .expect("checksum line located above");
    let payload = &text[..payload_len];
    if sha256_hex(payload) != checksum_tokens[2] {
        return Err(LearnError::CorruptModel("checksum mismatch".to_string()));
    }

    let mut parser = Parser { lines: all_lines[1..all_lines.len() - 1].to_vec(), pos: 0 };

    let mut seed = 0u64;
    let mut rng_name = String::new();
    let mut base = BaseKind::Forest;
    let mut n_estimators = 0usize;
    let mut max_depth = 0usize;
    while let Some(line) = parser.peek() {
        if !line.starts_with("meta ") {
            break;
        }
        let line_no = parser.line_no();
        let tokens: Vec<&str> = parser.next_line().unwrap().split_whitespace().collect();
        match tokens.as_slice() {
            ["meta", "seed", v] => seed = parse_u64(v, line_no)?,
            ["meta", "rng", v] => rng_name = v.to_string(),
            ["meta", "base", v] => {
                base = v.parse().map_err(|e: String| corrupt(line_no, e))?;
            }
            ["meta", "n_estimators", v] => n_estimators = parse_usize(v, line_no)?,
            ["meta", "max_depth", v] => max_depth = parse_usize(v, line_no)?,
            _ => return Err(corrupt(line_no, "malformed meta line")),
        }
    }

    let line_no = parser.line_no();
    let order_line = parser.next_line().ok_or_else(|| corrupt(line_no, "missing feature_order"))?;
    let feature_order: Vec<String> = order_line
        .strip_prefix("feature_order ")
        .ok_or_else(|| corrupt(line_no, "expected feature_order"))?
        .split_whitespace()
        .map(str::to_string)
        .collect();

    let mut columns = Vec::with_capacity(feature_order.len());
    for expected in &feature_order {
        let line_no = parser.line_no();
        let line = parser.next_line().ok_or_else(|| corrupt(line_no, "missing column line"))?;
        let (name, stats) = parse_column(line, line_no)?;
        if &name != expected {
            return Err(corrupt(line_no, format!("column {name:?} out of order")));
        }
        columns.push(stats);
    }

    let mut models = Vec::with_capacity(Target::ALL.len());
    for target in Target::ALL {
        let line_no = parser.line_no();
        let line = parser.next_line().ok_or_else(|| corrupt(line_no, "missing target section"))?;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.first() != Some(&"target") || tokens.get(1) != Some(&target.name()) {
            return Err(corrupt(line_no, format!("expected target {}", target.name())));
        }
        let model = match tokens.get(2) {
            Some(&"forest") if tokens.len() == 6 => {
                let n_trees = parse_usize(tokens[3], line_no)?;
                let depth = parse_usize(tokens[4], line_no)?;
                let forest_seed = parse_u64(tokens[5], line_no)?;
                let mut trees = Vec::with_capacity(n_trees);
                for i in 0..n_trees {
                    trees.push(parse_tree(&mut parser, i)?);
                }
                BaseModel::Forest(ForestModel {
                    trees,
                    seed: forest_seed,
                    n_estimators: n_trees,
                    max_depth: depth,
                })
            }
            Some(&"linear") if tokens.len() >= 4 => {
                let intercept = parse_f64(tokens[3], line_no)?;
                let coefficients = tokens[4..]
                    .iter()
                    .map(|t| parse_f64(t, line_no))
                    .collect::<Result<Vec<f64>, _>>()?;
                BaseModel::Linear(LinearModel { coefficients, intercept })
            }
            _ => return Err(corrupt(line_no, "malformed target line")),
        };
        models.push((target, model));
    }

    Ok(MultiOutputModel {
        stats: PreprocessStats { columns },
        feature_order,
        models,
        base,
        n_estimators,
        max_depth,
        seed,
        rng_name,
    })
}

pub fn load_model(path: impl AsRef<Path>) -> Result<MultiOutputModel, LearnError> {
    let text = fs::read_to_string(path)?;
    load_model_str(&text)
}

//! CART regression trees grown by greedy variance-reduction splits.
//!
//! At each node the split maximizing
//! `Var(parent)*n_parent - Var(left)*n_left - Var(right)*n_right`
//! is chosen over all features and all midpoints between consecutive
//! distinct sorted feature values. Ties break to the lowest feature index,
//! then the lowest threshold. Rows with `value <= threshold` go left.
//! Growth stops at `max_depth`, on a pure node, or when no split yields a
//! strictly positive reduction; leaves predict the mean target of the rows
//! routed to them.

use super::LearnError;
use crate::matrix::Matrix;

/// Flat tree node; children are indices into the node array.
#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    Leaf { prediction: f64, sample_count: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionTree {
    pub nodes: Vec<TreeNode>,
    pub max_depth: usize,
}

impl RegressionTree {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut index = 0;
        loop {
            match &self.nodes[index] {
                TreeNode::Leaf { prediction, .. } => return *prediction,
                TreeNode::Split { feature, threshold, left, right } => {
                    index = if row[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, TreeNode::Leaf { .. })).count()
    }
}

fn sum_and_sq(target: &[f64], indices: &[usize]) -> (f64, f64) {
    let mut sum = 0.0;
    let mut sq = 0.0;
    for &i in indices {
        sum += target[i];
        sq += target[i] * target[i];
    }
    (sum, sq)
}

/// Sum of squared deviations from the mean, clamped at zero against
/// cancellation noise.
fn sse(sum: f64, sq: f64, n: f64) -> f64 {
    (sq - sum * sum / n).max(0.0)
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    reduction: f64,
}

fn find_best_split(
    features: &Matrix,
    target: &[f64],
    indices: &[usize],
    min_samples_leaf: usize,
) -> Option<BestSplit> {
    let n = indices.len();
    let (sum, sq) = sum_and_sq(target, indices);
    let parent_sse = sse(sum, sq, n as f64);
    let mut best: Option<BestSplit> = None;

    let mut order: Vec<usize> = Vec::with_capacity(n);
    for feature in 0..features.n_cols() {
        order.clear();
        order.extend_from_slice(indices);
        order.sort_by(|&a, &b| features.get(a, feature).total_cmp(&features.get(b, feature)));

        let mut left_sum = 0.0;
        let mut left_sq = 0.0;
        for pos in 0..n - 1 {
            let idx = order[pos];
            left_sum += target[idx];
            left_sq += target[idx] * target[idx];
            let here = features.get(idx, feature);
            let next = features.get(order[pos + 1], feature);
            if here == next {
                continue;
            }
            let left_n = pos + 1;
            let right_n = n - left_n;
            if left_n < min_samples_leaf || right_n < min_samples_leaf {
                continue;
            }
            let reduction = parent_sse
                - sse(left_sum, left_sq, left_n as f64)
                - sse(sum - left_sum, sq - left_sq, right_n as f64);
            // strictly-greater keeps the first (lowest feature, lowest
            // threshold) candidate on exact ties
            if reduction > 0.0 && best.as_ref().map_or(true, |b| reduction > b.reduction) {
                best = Some(BestSplit { feature, threshold: here + (next - here) / 2.0, reduction });
            }
        }
    }
    best
}

fn grow(
    features: &Matrix,
    target: &[f64],
    indices: Vec<usize>,
    depth: usize,
    max_depth: usize,
    min_samples_leaf: usize,
    nodes: &mut Vec<TreeNode>,
) -> usize {
    let n = indices.len();
    let (sum, _) = sum_and_sq(target, &indices);
    let mean = sum / n as f64;

    let pure = indices.iter().all(|&i| target[i] == target[indices[0]]);
    if depth >= max_depth || n < 2 * min_samples_leaf || pure {
        nodes.push(TreeNode::Leaf { prediction: mean, sample_count: n });
        return nodes.len() - 1;
    }
    let Some(split) = find_best_split(features, target, &indices, min_samples_leaf) else {
        nodes.push(TreeNode::Leaf { prediction: mean, sample_count: n });
        return nodes.len() - 1;
    };

    let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = indices
        .into_iter()
        .partition(|&i| features.get(i, split.feature) <= split.threshold);

    let here = nodes.len();
    nodes.push(TreeNode::Split { feature: split.feature, threshold: split.threshold, left: 0, right: 0 });
    let left = grow(features, target, left_idx, depth + 1, max_depth, min_samples_leaf, nodes);
    let right = grow(features, target, right_idx, depth + 1, max_depth, min_samples_leaf, nodes);
    nodes[here] = TreeNode::Split { feature: split.feature, threshold: split.threshold, left, right };
    here
}

/// Fits a tree on the rows named by `sample_indices` (every row when
/// `None`; the forest passes bootstrap draws here).
pub fn fit_tree_on_indices(
    features: &Matrix,
    target: &[f64],
    max_depth: usize,
    min_samples_leaf: usize,
    sample_indices: Option<&[usize]>,
) -> Result<RegressionTree, LearnError> {
    if features.n_rows() == 0 {
        return Err(LearnError::EmptyInput);
    }
    if target.len() != features.n_rows() {
        return Err(LearnError::LengthMismatch { features: features.n_rows(), targets: target.len() });
    }
    let indices: Vec<usize> = match sample_indices {
        Some(idx) => {
            if idx.is_empty() {
                return Err(LearnError::EmptyInput);
            }
            idx.to_vec()
        }
        None => (0..features.n_rows()).collect(),
    };
    let mut nodes = Vec::new();
    grow(features, target, indices, 0, max_depth, min_samples_leaf.max(1), &mut nodes);
    Ok(RegressionTree { nodes, max_depth })
}

/// Fits a greedy CART regression tree on the full sample.
pub fn fit_tree(
    features: &Matrix,
    target: &[f64],
    max_depth: usize,
    min_samples_leaf: usize,
) -> Result<RegressionTree, LearnError> {
    fit_tree_on_indices(features, target, max_depth, min_samples_leaf, None)
}

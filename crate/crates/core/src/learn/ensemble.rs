//! Weighted ensembles over multi-target predictors.

use super::{LearnError, MultiOutputModel, Prediction, Target};
use crate::evaluate::target_actuals;
use crate::types::{Dataset, GemmConfig};

/// Anything that predicts all four targets for a batch of configs. Lets the
/// ensemble mix base-model families without caring what is inside each
/// member.
pub trait MultiTargetPredictor {
    fn predict_configs(&self, configs: &[GemmConfig]) -> Result<Vec<Prediction>, LearnError>;
}

impl MultiTargetPredictor for MultiOutputModel {
    fn predict_configs(&self, configs: &[GemmConfig]) -> Result<Vec<Prediction>, LearnError> {
        super::predict(self, configs)
    }
}

/// Weighted combination of member predictors. Weights are nonnegative and
/// sum to 1 (within 1e-9); every target uses the same weight vector.
#[derive(Debug, Clone)]
pub struct EnsembleModel<M> {
    pub members: Vec<M>,
    pub weights: Vec<f64>,
}

impl<M: MultiTargetPredictor> EnsembleModel<M> {
    /// Uniformly weighted ensemble.
    pub fn uniform(members: Vec<M>) -> Self {
        let w = 1.0 / members.len().max(1) as f64;
        let weights = vec![w; members.len()];
        EnsembleModel { members, weights }
    }

    pub fn validate_weights(&self) -> Result<(), LearnError> {
        if self.weights.len() != self.members.len() {
            return Err(LearnError::WeightSumInvalid(format!(
                "{} weights for {} members",
                self.weights.len(),
                self.members.len()
            )));
        }
        if self.weights.iter().any(|w| *w < 0.0 || !w.is_finite()) {
            return Err(LearnError::WeightSumInvalid("negative or non-finite weight".to_string()));
        }
        let sum: f64 = self.weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(LearnError::WeightSumInvalid(format!("weights sum to {sum}")));
        }
        Ok(())
    }
}

/// Per-config weighted sum of the member predictions, independently per
/// target.
pub fn ensemble_predict<M: MultiTargetPredictor>(
    ensemble: &EnsembleModel<M>,
    configs: &[GemmConfig],
) -> Result<Vec<Prediction>, LearnError> {
    ensemble.validate_weights()?;
    let mut combined = vec![[0.0f64; 4]; configs.len()];
    for (member, weight) in ensemble.members.iter().zip(&ensemble.weights) {
        let predictions = member.predict_configs(configs)?;
        for (acc, prediction) in combined.iter_mut().zip(&predictions) {
            for target in Target::ALL {
                acc[target.index()] += weight * prediction.get(target);
            }
        }
    }
    Ok(combined.into_iter().map(Prediction::from_array).collect())
}

/// Fits ensemble weights on a validation fold by constrained least squares
/// (weights >= 0, sum 1), minimizing the squared error summed over all four
/// targets with each target normalized by its variance so no unit dominates.
///
/// Solved by projected coordinate descent over weight pairs: each move
/// transfers mass between two coordinates, minimizing the quadratic
/// objective exactly along that direction and clamping the step so the
/// iterate stays on the simplex. Every move decreases the objective, so the
/// sweep converges on this convex problem.
pub fn calibrate_weights<M: MultiTargetPredictor>(
    members: &[M],
    validation: &Dataset,
) -> Result<Vec<f64>, LearnError> {
    if members.is_empty() || validation.is_empty() {
        return Err(LearnError::EmptyInput);
    }
    let configs: Vec<GemmConfig> = validation.records.iter().map(|r| r.config.clone()).collect();
    let member_preds: Vec<Vec<Prediction>> = members
        .iter()
        .map(|m| m.predict_configs(&configs))
        .collect::<Result<_, _>>()?;

    let k = members.len();
    // quadratic form: f(w) = w' A w - 2 c' w + const
    let mut a = vec![vec![0.0f64; k]; k];
    let mut c = vec![0.0f64; k];
    for target in Target::ALL {
        let actual = target_actuals(validation, target.index());
        let finite: Vec<usize> = (0..actual.len()).filter(|&i| actual[i].is_finite()).collect();
        if finite.is_empty() {
            continue;
        }
        let mean = finite.iter().map(|&i| actual[i]).sum::<f64>() / finite.len() as f64;
        let var = finite.iter().map(|&i| (actual[i] - mean) * (actual[i] - mean)).sum::<f64>()
            / finite.len() as f64;
        let scale = if var > 0.0 { 1.0 / var } else { 1.0 };
        for &row in &finite {
            let preds: Vec<f64> = member_preds.iter().map(|p| p[row].get(target)).collect();
            for i in 0..k {
                for j in 0..k {
                    a[i][j] += scale * preds[i] * preds[j];
                }
                c[i] += scale * preds[i] * actual[row];
            }
        }
    }

    let mut w = vec![1.0 / k as f64; k];
    for _ in 0..1000 {
        let mut largest_move = 0.0f64;
        for i in 0..k {
            for j in i + 1..k {
                let aw_i: f64 = (0..k).map(|l| a[i][l] * w[l]).sum();
                let aw_j: f64 = (0..k).map(|l| a[j][l] * w[l]).sum();
                let curvature = a[i][i] - 2.0 * a[i][j] + a[j][j];
                if curvature <= 0.0 {
                    continue;
                }
                // minimize f(w + t (e_i - e_j)) subject to w_i + t >= 0,
                // w_j - t >= 0
                let step = (((c[i] - c[j]) - (aw_i - aw_j)) / curvature).clamp(-w[i], w[j]);
                w[i] += step;
                w[j] -= step;
                largest_move = largest_move.max(step.abs());
            }
        }
        if largest_move < 1e-14 {
            break;
        }
    }
    Ok(w)
}

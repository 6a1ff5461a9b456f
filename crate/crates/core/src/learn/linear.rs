//! Closed-form multivariate linear regression via the normal equations.

use super::LearnError;
use crate::matrix::Matrix;

/// Ridge term added to the normal equations when the plain system is
/// singular.
pub const RIDGE_FALLBACK: f64 = 1e-8;

/// Least-squares linear model with intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
}

impl LinearModel {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        debug_assert_eq!(row.len(), self.coefficients.len());
        self.intercept
            + row
                .iter()
                .zip(&self.coefficients)
                .map(|(x, c)| x * c)
                .sum::<f64>()
    }
}

/// Cholesky solve of a symmetric positive-definite system. Returns `None`
/// when a pivot collapses (the matrix is singular to working precision).
fn cholesky_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let max_diag = (0..n).fold(0.0f64, |acc, i| acc.max(a[i][i].abs()));
    let tol = 1e-12 * max_diag.max(1e-300);
    // in-place LL^T factorization
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i][j];
            for k in 0..j {
                sum -= a[i][k] * a[j][k];
            }
            if i == j {
                if !(sum > tol) {
                    return None;
                }
                a[i][j] = sum.sqrt();
            } else {
                a[i][j] = sum / a[j][j];
            }
        }
    }
    // forward substitution: L z = b
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum -= a[i][k] * b[k];
        }
        b[i] = sum / a[i][i];
    }
    // back substitution: L^T x = z
    for i in (0..n).rev() {
        let mut sum = b[i];
        for k in i + 1..n {
            sum -= a[k][i] * b[k];
        }
        b[i] = sum / a[i][i];
    }
    Some(b)
}

/// Fits ordinary least squares with intercept by solving the normal
/// equations. Singular systems are retried once with a ridge term of
/// [`RIDGE_FALLBACK`] on the diagonal; if that also fails the system is
/// degenerate.
pub fn fit_linear(features: &Matrix, target: &[f64]) -> Result<LinearModel, LearnError> {
    let rows = features.n_rows();
    let cols = features.n_cols();
    if rows == 0 {
        return Err(LearnError::EmptyInput);
    }
    if target.len() != rows {
        return Err(LearnError::LengthMismatch { features: rows, targets: target.len() });
    }
    if rows < cols + 1 {
        return Err(LearnError::TooFewRows { rows, needed: cols + 1 });
    }
    if !features.is_finite() || target.iter().any(|y| !y.is_finite()) {
        return Err(LearnError::NonFiniteInput);
    }

    // Gram matrix of the design [X | 1] and its right-hand side.
    let dim = cols + 1;
    let mut gram = vec![vec![0.0f64; dim]; dim];
    let mut rhs = vec![0.0f64; dim];
    for r in 0..rows {
        let row = features.row(r);
        for i in 0..cols {
            for j in 0..=i {
                gram[i][j] += row[i] * row[j];
            }
            gram[cols][i] += row[i];
            rhs[i] += row[i] * target[r];
        }
        gram[cols][cols] += 1.0;
        rhs[cols] += target[r];
    }
    for i in 0..dim {
        for j in i + 1..dim {
            gram[i][j] = gram[j][i];
        }
    }

    let solution = cholesky_solve(gram.clone(), rhs.clone()).or_else(|| {
        let mut ridged = gram;
        for (i, row) in ridged.iter_mut().enumerate() {
            row[i] += RIDGE_FALLBACK;
        }
        cholesky_solve(ridged, rhs)
    });
    let solution = solution.ok_or(LearnError::DegenerateSystem)?;
    if solution.iter().any(|v| !v.is_finite()) {
        return Err(LearnError::DegenerateSystem);
    }

    Ok(LinearModel { coefficients: solution[..cols].to_vec(), intercept: solution[cols] })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand_chacha::rand_core::{RngCore, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn uniform(rng: &mut ChaCha8Rng) -> f64 {
        (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    #[test]
    fn two_point_line() {
        let features = Matrix::from_rows(&[vec![0.0], vec![1.0]]);
        let model = fit_linear(&features, &[1.0, 3.0]).unwrap();
        assert_relative_eq!(model.coefficients[0], 2.0, max_relative = 1e-12);
        assert_relative_eq!(model.intercept, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn constant_target_goes_to_intercept() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rows: Vec<Vec<f64>> = (0..20).map(|_| vec![uniform(&mut rng), uniform(&mut rng)]).collect();
        let features = Matrix::from_rows(&rows);
        let model = fit_linear(&features, &vec![5.5; 20]).unwrap();
        assert_relative_eq!(model.intercept, 5.5, epsilon = 1e-9);
        for c in &model.coefficients {
            assert!(c.abs() < 1e-9);
        }
    }

    /// Gradient-descent least-squares oracle, run to convergence. Step size
    /// comes from a power-iteration estimate of the Gram spectral radius.
    fn gd_least_squares(features: &Matrix, target: &[f64]) -> (Vec<f64>, f64) {
        let n = features.n_rows();
        let p = features.n_cols();
        let dim = p + 1;
        let design: Vec<Vec<f64>> = (0..n)
            .map(|r| {
                let mut row = features.row(r).to_vec();
                row.push(1.0);
                row
            })
            .collect();
        let matvec = |v: &[f64]| -> Vec<f64> {
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
        // power iteration for the Lipschitz constant
        let mut v = vec![1.0; dim];
        let mut lambda = 1.0;
        for _ in 0..200 {
            let w = matvec(&v);
            lambda = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            v = w.iter().map(|x| x / lambda).collect();
        }
        let step = 1.0 / lambda;
        let mut theta = vec![0.0; dim];
        for _ in 0..400_000 {
            let mut residual = vec![0.0; n];
            for (r, row) in design.iter().enumerate() {
                residual[r] = row.iter().zip(&theta).map(|(a, b)| a * b).sum::<f64>() - target[r];
            }
            let mut grad = vec![0.0; dim];
            for (r, row) in design.iter().enumerate() {
                for (j, a) in row.iter().enumerate() {
                    grad[j] += a * residual[r];
                }
            }
            let norm: f64 = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            if norm < 1e-13 {
                break;
            }
            for (t, g) in theta.iter_mut().zip(&grad) {
                *t -= step * g;
            }
        }
        let intercept = theta.pop().unwrap();
        (theta, intercept)
    }

    #[test]
    fn matches_gradient_descent_oracle_on_random_systems() {
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        for _ in 0..3 {
            let rows: Vec<Vec<f64>> = (0..50)
                .map(|_| (0..4).map(|_| 2.0 * uniform(&mut rng) - 1.0).collect())
                .collect();
            let features = Matrix::from_rows(&rows);
            let target: Vec<f64> = rows
                .iter()
                .map(|r| 3.0 * r[0] - 2.0 * r[1] + 0.5 * r[2] + 4.0 + 0.3 * (uniform(&mut rng) - 0.5))
                .collect();
            let model = fit_linear(&features, &target).unwrap();
            let (oracle_coeffs, oracle_intercept) = gd_least_squares(&features, &target);
            for (a, b) in model.coefficients.iter().zip(&oracle_coeffs) {
                assert!((a - b).abs() < 1e-6, "coefficient {a} vs oracle {b}");
            }
            assert!((model.intercept - oracle_intercept).abs() < 1e-6);
        }
    }

    #[test]
    fn duplicate_columns_fall_back_to_ridge() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|_| {
                let x = uniform(&mut rng);
                vec![x, x]
            })
            .collect();
        let features = Matrix::from_rows(&rows);
        let target: Vec<f64> = rows.iter().map(|r| 2.0 * r[0] + 1.0).collect();
        let model = fit_linear(&features, &target).unwrap();
        // The ridge solution splits the weight across the twin columns.
        assert_relative_eq!(model.coefficients[0] + model.coefficients[1], 2.0, epsilon = 1e-5);
    }

    #[test]
    fn underdetermined_systems_are_rejected() {
        let features = Matrix::from_rows(&[vec![1.0, 2.0, 3.0, 4.0]]);
        assert!(matches!(
            fit_linear(&features, &[1.0]),
            Err(LearnError::TooFewRows { .. })
        ));
    }

    #[test]
    fn four_feature_fit_has_four_coefficients() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|_| vec![uniform(&mut rng) * 4096.0, uniform(&mut rng) * 4096.0, uniform(&mut rng) * 4096.0, (uniform(&mut rng) * 32.0).ceil()])
            .collect();
        let features = Matrix::from_rows(&rows);
        let target: Vec<f64> = rows.iter().map(|r| r[0] + r[1] + 8.0 * r[2] - 2500.0 * r[3]).collect();
        let model = fit_linear(&features, &target).unwrap();
        assert_eq!(model.coefficients.len(), 4);
    }
}

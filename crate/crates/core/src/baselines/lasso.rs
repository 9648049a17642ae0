//! Lasso regression by cyclic coordinate descent with soft thresholding.
//!
//! Minimizes `(1/2n) ||y - X b - b0||^2 + lambda ||b||_1` on internally
//! standardized columns (zero mean, unit population variance) and a
//! centered target, so the plain least-squares fit is reachable at
//! `lambda = 0` and the intercept stays unpenalized.

use crate::error::{Error, Result};

pub const CONVERGENCE_TOL: f64 = 1e-8;
pub const MAX_SWEEPS: usize = 10_000;

/// Validation grid: {0} plus the decades 1e-4 .. 1e1.
pub fn lambda_grid() -> Vec<f64> {
    vec![0.0, 1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0]
}

#[derive(Debug, Clone, PartialEq)]
pub struct LassoModel {
    /// Per-column mean of the training design matrix.
    pub means: Vec<f64>,
    /// Per-column standard deviation; 0 marks a constant column that is
    /// excluded from the fit.
    pub stds: Vec<f64>,
    /// Coefficients in standardized space.
    pub coefs: Vec<f64>,
    /// Mean of the training targets.
    pub intercept: f64,
    pub lambda: f64,
    pub sweeps: usize,
}

#[inline]
fn soft_threshold(z: f64, lambda: f64) -> f64 {
    if z > lambda {
        z - lambda
    } else if z < -lambda {
        z + lambda
    } else {
        0.0
    }
}

fn column_stats(x: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = x.len() as f64;
    let p = x[0].len();
    let mut means = vec![0.0; p];
    for row in x {
        for (m, v) in means.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut means {
        *m /= n;
    }
    let mut vars = vec![0.0; p];
    for row in x {
        for j in 0..p {
            let d = row[j] - means[j];
            vars[j] += d * d;
        }
    }
    let stds = vars.iter().map(|v| (v / n).sqrt()).collect();
    (means, stds)
}

/// Fit at one penalty level.
pub fn lasso_fit(x: &[Vec<f64>], y: &[f64], lambda: f64) -> Result<LassoModel> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::EmptyInput { context: "lasso fit" });
    }
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
            context: "lasso design",
        });
    }
    if lambda < 0.0 {
        return Err(Error::config("lasso lambda must be non-negative"));
    }
    let n = x.len();
    let p = x[0].len();
    if x.iter().any(|row| row.iter().any(|v| !v.is_finite()))
        || y.iter().any(|v| !v.is_finite())
    {
        return Err(Error::NonFinite {
            context: "lasso design matrix",
        });
    }

    let (means, stds) = column_stats(x);
    let intercept = y.iter().sum::<f64>() / n as f64;

    // Standardized columns, constant columns zeroed out.
    let mut xs = vec![vec![0.0; n]; p];
    for j in 0..p {
        if stds[j] > 0.0 {
            for (i, row) in x.iter().enumerate() {
                xs[j][i] = (row[j] - means[j]) / stds[j];
            }
        }
    }
    let yc: Vec<f64> = y.iter().map(|v| v - intercept).collect();

    let mut coefs = vec![0.0; p];
    let mut residual = yc.clone();
    let nf = n as f64;
    let mut sweeps = 0;
    for sweep in 1..=MAX_SWEEPS {
        sweeps = sweep;
        let mut max_delta = 0.0f64;
        for j in 0..p {
            if stds[j] == 0.0 {
                continue;
            }
            let old = coefs[j];
            // rho = (1/n) x_j . (residual + x_j * old); columns have unit
            // variance so the curvature term is 1.
            let mut rho = 0.0;
            for i in 0..n {
                rho += xs[j][i] * (residual[i] + xs[j][i] * old);
            }
            rho /= nf;
            let new = soft_threshold(rho, lambda);
            if new != old {
                let delta = new - old;
                for i in 0..n {
                    residual[i] -= delta * xs[j][i];
                }
                coefs[j] = new;
            }
            max_delta = max_delta.max((coefs[j] - old).abs());
        }
        if max_delta < CONVERGENCE_TOL {
            break;
        }
    }

    Ok(LassoModel {
        means,
        stds,
        coefs,
        intercept,
        lambda,
        sweeps,
    })
}

impl LassoModel {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut out = self.intercept;
        for j in 0..self.coefs.len() {
            if self.stds[j] > 0.0 {
                out += self.coefs[j] * (row[j] - self.means[j]) / self.stds[j];
            }
        }
        out
    }

    /// Objective value `(1/2n)||y - yhat||^2 + lambda ||b||_1` on a data set.
    pub fn objective(&self, x: &[Vec<f64>], y: &[f64]) -> f64 {
        let n = x.len() as f64;
        let sse: f64 = x
            .iter()
            .zip(y)
            .map(|(row, &t)| {
                let e = t - self.predict(row);
                e * e
            })
            .sum();
        sse / (2.0 * n) + self.lambda * self.coefs.iter().map(|c| c.abs()).sum::<f64>()
    }
}

/// Pick the penalty from [`lambda_grid`] minimizing validation MSE.
/// Ties resolve to the smaller lambda.
pub fn lasso_fit_select(
    x_train: &[Vec<f64>],
    y_train: &[f64],
    x_val: &[Vec<f64>],
    y_val: &[f64],
) -> Result<LassoModel> {
    let mut best: Option<(f64, LassoModel)> = None;
    for lambda in lambda_grid() {
        let model = lasso_fit(x_train, y_train, lambda)?;
        let mse = if x_val.is_empty() {
            0.0
        } else {
            x_val
                .iter()
                .zip(y_val)
                .map(|(row, &t)| {
                    let e = t - model.predict(row);
                    e * e
                })
                .sum::<f64>()
                / x_val.len() as f64
        };
        if best.as_ref().map(|(b, _)| mse < *b).unwrap_or(true) {
            best = Some((mse, model));
        }
    }
    Ok(best.expect("grid is non-empty").1)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Least-squares oracle by normal equations on the standardized system
    /// (p = 2, solved with an explicit 2x2 inverse).
    fn normal_equation_fit_2d(x: &[Vec<f64>], y: &[f64]) -> (f64, [f64; 2]) {
        let (means, stds) = column_stats(x);
        let n = x.len();
        let ybar = y.iter().sum::<f64>() / n as f64;
        let xs: Vec<[f64; 2]> = x
            .iter()
            .map(|row| {
                [
                    (row[0] - means[0]) / stds[0],
                    (row[1] - means[1]) / stds[1],
                ]
            })
            .collect();
        let yc: Vec<f64> = y.iter().map(|v| v - ybar).collect();
        let (mut a11, mut a12, mut a22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (row, &t) in xs.iter().zip(&yc) {
            a11 += row[0] * row[0];
            a12 += row[0] * row[1];
            a22 += row[1] * row[1];
            b1 += row[0] * t;
            b2 += row[1] * t;
        }
        let det = a11 * a22 - a12 * a12;
        let c0 = (a22 * b1 - a12 * b2) / det;
        let c1 = (a11 * b2 - a12 * b1) / det;
        (ybar, [c0, c1])
    }

    fn toy_system() -> (Vec<Vec<f64>>, Vec<f64>) {
        // Full-rank 10 x 2 system with noise-free linear structure plus kinks.
        let x: Vec<Vec<f64>> = (0..10)
            .map(|i| vec![i as f64, ((i * i) % 7) as f64])
            .collect();
        let y: Vec<f64> = x.iter().map(|r| 3.0 + 2.0 * r[0] - 1.5 * r[1]).collect();
        (x, y)
    }

    #[test]
    fn unpenalized_fit_matches_normal_equations() {
        let (x, y) = toy_system();
        let model = lasso_fit(&x, &y, 0.0).unwrap();
        let (ybar, coefs) = normal_equation_fit_2d(&x, &y);
        assert!((model.intercept - ybar).abs() < 1e-9);
        assert!((model.coefs[0] - coefs[0]).abs() < 1e-6);
        assert!((model.coefs[1] - coefs[1]).abs() < 1e-6);
        // Predictions reproduce the noise-free targets.
        for (row, &t) in x.iter().zip(&y) {
            assert!((model.predict(row) - t).abs() < 1e-6);
        }
    }

    #[test]
    fn large_lambda_kills_all_coefficients() {
        let (x, y) = toy_system();
        // With unit-variance columns the kill condition is
        // lambda >= max_j |x_j . y_c| / n.
        let model = lasso_fit(&x, &y, 1e6).unwrap();
        assert!(model.coefs.iter().all(|&c| c == 0.0));
        // Intercept survives: prediction is the target mean.
        let ybar = y.iter().sum::<f64>() / y.len() as f64;
        assert!((model.predict(&x[0]) - ybar).abs() < 1e-12);
    }

    #[test]
    fn exact_kill_threshold() {
        let (x, y) = toy_system();
        let (means, stds) = column_stats(&x);
        let n = x.len() as f64;
        let ybar = y.iter().sum::<f64>() / n;
        let mut max_corr = 0.0f64;
        for j in 0..2 {
            let mut dot = 0.0;
            for (row, &t) in x.iter().zip(&y) {
                dot += (row[j] - means[j]) / stds[j] * (t - ybar);
            }
            max_corr = max_corr.max((dot / n).abs());
        }
        let model = lasso_fit(&x, &y, max_corr * 1.0000001).unwrap();
        assert!(model.coefs.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn univariate_slope_is_cov_over_var() {
        let x: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64]).collect();
        let y: Vec<f64> = (0..8).map(|i| 1.0 + 0.5 * i as f64 + ((i % 3) as f64)).collect();
        let n = x.len() as f64;
        let mx = x.iter().map(|r| r[0]).sum::<f64>() / n;
        let my = y.iter().sum::<f64>() / n;
        let cov = x
            .iter()
            .zip(&y)
            .map(|(r, &t)| (r[0] - mx) * (t - my))
            .sum::<f64>()
            / n;
        let var = x.iter().map(|r| (r[0] - mx) * (r[0] - mx)).sum::<f64>() / n;
        let model = lasso_fit(&x, &y, 0.0).unwrap();
        // Coefficient is reported in standardized space; slope = coef / std.
        let slope = model.coefs[0] / model.stds[0];
        assert!((slope - cov / var).abs() < 1e-9);
    }

    #[test]
    fn objective_is_non_increasing_in_observed_sweeps() {
        // Coordinate descent minimizes a convex objective; the fitted model
        // can never score worse than the zero model it starts from.
        let (x, y) = toy_system();
        for lambda in lambda_grid() {
            let fitted = lasso_fit(&x, &y, lambda).unwrap();
            let zero = LassoModel {
                means: fitted.means.clone(),
                stds: fitted.stds.clone(),
                coefs: vec![0.0; 2],
                intercept: fitted.intercept,
                lambda,
                sweeps: 0,
            };
            assert!(fitted.objective(&x, &y) <= zero.objective(&x, &y) + 1e-12);
        }
    }

    #[test]
    fn constant_columns_are_ignored() {
        let x: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, 4.0]).collect();
        let y: Vec<f64> = (0..6).map(|i| 2.0 * i as f64).collect();
        let model = lasso_fit(&x, &y, 0.0).unwrap();
        assert_eq!(model.coefs[1], 0.0);
        assert!((model.predict(&x[3]) - y[3]).abs() < 1e-9);
    }

    #[test]
    fn non_finite_input_is_rejected() {
        let x = vec![vec![1.0], vec![f64::NAN]];
        let y = vec![0.0, 1.0];
        assert!(matches!(
            lasso_fit(&x, &y, 0.0),
            Err(Error::NonFinite { .. })
        ));
    }
}

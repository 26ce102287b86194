//! Weighted linear regression (closed form), weighted logistic regression
//! (IRLS), and the Gaussian conditional-density view of a fitted
//! regressor.
//!
//! Both fits solve the weighted normal system through Cholesky. Scaling
//! all weights by a positive constant leaves either fit unchanged, which
//! is what lets downstream weight normalization be semantically free.

use crate::error::{Error, Result};
use crate::linalg::{cholesky_solve, Matrix};

pub use crate::linalg::Matrix as DesignMatrix;

const WLS_RIDGE: f64 = 1e-8;
const IRLS_RIDGE: f64 = 1e-6;
const IRLS_TOL: f64 = 1e-8;
const IRLS_MAX_ITER: usize = 100;
const PROBA_CLIP: f64 = 1e-9;
const SIGMA_FLOOR: f64 = 1e-9;

/// Fitted weighted least-squares model. `residual_sigma` is the
/// unweighted root mean squared training residual, the `σ` the Gaussian
/// conditional density uses.
#[derive(Debug, Clone)]
pub struct LinearModel {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub residual_sigma: f64,
    /// True when the design was rank deficient and a ridge term was added.
    pub ridge_fallback: bool,
}

impl LinearModel {
    pub fn dim(&self) -> usize {
        self.coefficients.len()
    }

    /// Residual sigma floored for density evaluation; the flag marks a
    /// numerically perfect fit, which signals a degenerate metric input.
    pub fn effective_sigma(&self) -> (f64, bool) {
        if self.residual_sigma < SIGMA_FLOOR {
            (SIGMA_FLOOR, true)
        } else {
            (self.residual_sigma, false)
        }
    }
}

/// Fitted logistic model (weighted maximum likelihood via IRLS).
#[derive(Debug, Clone)]
pub struct LogisticModel {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub converged: bool,
    pub iterations: usize,
}

fn validate_weights(w: &[f64], n: usize) -> Result<()> {
    if w.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: w.len(),
        });
    }
    if w.iter().any(|v| !v.is_finite() || *v <= 0.0) {
        return Err(Error::InvalidArgument(
            "weights must be strictly positive and finite".into(),
        ));
    }
    Ok(())
}

/// Accumulate the weighted normal system over the intercept-augmented
/// design: `A = Σ w x̃ x̃ᵀ`, `b = Σ w t x̃` with `x̃ = (x, 1)`.
fn normal_system(x: &Matrix, t: &[f64], w: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let d = x.cols() + 1;
    let mut a = vec![0.0; d * d];
    let mut b = vec![0.0; d];
    for i in 0..x.rows() {
        let wi = w[i];
        let row = x.row(i);
        for j in 0..d {
            let xj = if j < x.cols() { row[j] } else { 1.0 };
            b[j] += wi * t[i] * xj;
            for k in 0..=j {
                let xk = if k < x.cols() { row[k] } else { 1.0 };
                a[j * d + k] += wi * xj * xk;
            }
        }
    }
    // mirror the lower triangle
    for j in 0..d {
        for k in (j + 1)..d {
            a[j * d + k] = a[k * d + j];
        }
    }
    (a, b)
}

fn solve_with_ridge(a: &mut [f64], b: &[f64], d: usize, base_ridge: f64) -> (Vec<f64>, bool) {
    let max_diag = (0..d).map(|j| a[j * d + j]).fold(0.0f64, f64::max);
    let tol = max_diag * 1e-13;
    if let Some(beta) = cholesky_solve(a, b, d, tol) {
        if beta.iter().all(|v| v.is_finite()) {
            return (beta, false);
        }
    }
    // rank-deficient: escalate the ridge until the system solves
    let mut ridge = base_ridge;
    loop {
        let mut damped = a.to_vec();
        for j in 0..d {
            damped[j * d + j] += ridge;
        }
        if let Some(beta) = cholesky_solve(&damped, b, d, 0.0) {
            if beta.iter().all(|v| v.is_finite()) {
                return (beta, true);
            }
        }
        ridge *= 100.0;
        assert!(ridge < 1.0, "normal system unsolvable even with ridge");
    }
}

/// Minimize `Σ w_i (y_i - x_iᵀβ - b)²`. Requires `n > d`. A rank-deficient
/// design falls back to a small ridge and flags the model.
pub fn fit_wls(x: &Matrix, y: &[f64], w: &[f64]) -> Result<LinearModel> {
    let (n, d) = (x.rows(), x.cols());
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: y.len(),
        });
    }
    validate_weights(w, n)?;
    if n <= d {
        return Err(Error::InvalidArgument(format!(
            "need more samples than features (n={n}, d={d})"
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("targets".into()));
    }

    let (mut a, b) = normal_system(x, y, w);
    let dim = d + 1;
    let (beta, ridge_fallback) = solve_with_ridge(&mut a, &b, dim, WLS_RIDGE);

    let coefficients = beta[..d].to_vec();
    let intercept = beta[d];
    // unweighted 1/n residual RMS
    let mut ss = 0.0;
    for i in 0..n {
        let pred: f64 = x.row(i).iter().zip(&coefficients).map(|(x, c)| x * c).sum::<f64>() + intercept;
        ss += (y[i] - pred).powi(2);
    }
    Ok(LinearModel {
        coefficients,
        intercept,
        residual_sigma: (ss / n as f64).sqrt(),
        ridge_fallback,
    })
}

pub fn predict_linear(m: &LinearModel, x: &Matrix) -> Result<Vec<f64>> {
    if x.cols() != m.dim() {
        return Err(Error::DimensionMismatch {
            expected: m.dim(),
            got: x.cols(),
        });
    }
    Ok((0..x.rows())
        .map(|i| {
            x.row(i)
                .iter()
                .zip(&m.coefficients)
                .map(|(x, c)| x * c)
                .sum::<f64>()
                + m.intercept
        })
        .collect())
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Weighted logistic regression via iteratively reweighted least squares.
///
/// Stops when `max |Δβ| < 1e-8` or after 100 iterations. The ridge term
/// damps the Newton system only, so the fixed point stays the unpenalized
/// maximum-likelihood solution and the score `Σ w_i (a_i - p_i) x̃_i`
/// vanishes at convergence.
pub fn fit_logistic(x: &Matrix, a: &[f64], w: &[f64]) -> Result<LogisticModel> {
    let (n, d) = (x.rows(), x.cols());
    if a.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: a.len(),
        });
    }
    validate_weights(w, n)?;
    if n <= d {
        return Err(Error::InvalidArgument(format!(
            "need more samples than features (n={n}, d={d})"
        )));
    }
    if a.iter().any(|v| *v != 0.0 && *v != 1.0) {
        return Err(Error::InvalidArgument(
            "logistic labels must lie in {0, 1}".into(),
        ));
    }
    let ones = a.iter().filter(|v| **v == 1.0).count();
    if ones == 0 || ones == n {
        return Err(Error::SingleClass(
            "labels contain one class; use the class frequency as the probability".into(),
        ));
    }

    let dim = d + 1;
    let mut beta = vec![0.0; dim];
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..IRLS_MAX_ITER {
        iterations += 1;
        // score g = Σ w (a - p) x̃ and Hessian H = Σ w p(1-p) x̃ x̃ᵀ
        let mut h = vec![0.0; dim * dim];
        let mut g = vec![0.0; dim];
        for i in 0..n {
            let row = x.row(i);
            let eta: f64 = row.iter().zip(&beta[..d]).map(|(x, c)| x * c).sum::<f64>() + beta[d];
            let p = sigmoid(eta);
            let wi = w[i];
            let resid = wi * (a[i] - p);
            let curve = (wi * p * (1.0 - p)).max(1e-12);
            for j in 0..dim {
                let xj = if j < d { row[j] } else { 1.0 };
                g[j] += resid * xj;
                for k in 0..=j {
                    let xk = if k < d { row[k] } else { 1.0 };
                    h[j * dim + k] += curve * xj * xk;
                }
            }
        }
        for j in 0..dim {
            for k in (j + 1)..dim {
                h[j * dim + k] = h[k * dim + j];
            }
            h[j * dim + j] += IRLS_RIDGE;
        }
        let step = match cholesky_solve(&h, &g, dim, 0.0) {
            Some(s) => s,
            None => break,
        };
        let mut max_step = 0.0f64;
        for j in 0..dim {
            beta[j] += step[j];
            max_step = max_step.max(step[j].abs());
        }
        if max_step < IRLS_TOL {
            converged = true;
            break;
        }
    }

    Ok(LogisticModel {
        coefficients: beta[..d].to_vec(),
        intercept: beta[d],
        converged,
        iterations,
    })
}

/// `sigmoid(xᵀβ + b)` clipped to `[1e-9, 1 - 1e-9]`.
pub fn predict_proba(m: &LogisticModel, x: &Matrix) -> Result<Vec<f64>> {
    if x.cols() != m.coefficients.len() {
        return Err(Error::DimensionMismatch {
            expected: m.coefficients.len(),
            got: x.cols(),
        });
    }
    Ok((0..x.rows())
        .map(|i| {
            let eta: f64 = x
                .row(i)
                .iter()
                .zip(&m.coefficients)
                .map(|(x, c)| x * c)
                .sum::<f64>()
                + m.intercept;
            sigmoid(eta).clamp(PROBA_CLIP, 1.0 - PROBA_CLIP)
        })
        .collect())
}

/// Gaussian pdf of `a` centered at the model's prediction for `inputs`,
/// with stddev `residual_sigma` (floored when the fit was perfect).
pub fn gaussian_conditional_density(m: &LinearModel, inputs: &[f64], a: f64) -> Result<f64> {
    Ok(log_gaussian_conditional_density(m, inputs, a)?.exp())
}

/// Log of [`gaussian_conditional_density`]; the metric code averages log
/// ratios, so it works in log space directly.
pub fn log_gaussian_conditional_density(m: &LinearModel, inputs: &[f64], a: f64) -> Result<f64> {
    if inputs.len() != m.dim() {
        return Err(Error::DimensionMismatch {
            expected: m.dim(),
            got: inputs.len(),
        });
    }
    let pred: f64 = inputs
        .iter()
        .zip(&m.coefficients)
        .map(|(x, c)| x * c)
        .sum::<f64>()
        + m.intercept;
    let (sigma, _) = m.effective_sigma();
    let z = (a - pred) / sigma;
    Ok(-0.5 * z * z - sigma.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln())
}

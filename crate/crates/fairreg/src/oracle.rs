//! Independent naive reference implementations. These are deliberately
//! slow and direct: enumeration over explicit joints, O(n·d) scans, and
//! Gauss-Jordan elimination, so they share no code path with the
//! estimators they cross-check. They live in the shipped library (not
//! only tests) so the harness can emit oracle-vs-estimator diagnostics.

use crate::error::{Error, Result};

/// Explicit finite joint distribution over `(y, ŷ, a)` as a probability
/// tensor indexed `[y][ŷ][a]`.
#[derive(Debug, Clone)]
pub struct DiscreteJoint {
    pub y_card: usize,
    pub yhat_card: usize,
    pub a_card: usize,
    /// Row-major `y_card × yhat_card × a_card` probabilities.
    pub probs: Vec<f64>,
}

impl DiscreteJoint {
    pub fn new(y_card: usize, yhat_card: usize, a_card: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != y_card * yhat_card * a_card {
            return Err(Error::DimensionMismatch {
                expected: y_card * yhat_card * a_card,
                got: probs.len(),
            });
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidArgument(
                "joint probabilities must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "joint must sum to 1 (got {total})"
            )));
        }
        Ok(DiscreteJoint {
            y_card,
            yhat_card,
            a_card,
            probs,
        })
    }

    #[inline]
    pub fn p(&self, iy: usize, ih: usize, ia: usize) -> f64 {
        self.probs[(iy * self.yhat_card + ih) * self.a_card + ia]
    }
}

/// Exact conditional mutual information `I[Ŷ; A | Y]` by enumeration:
/// `Σ P(y,ŷ,a) log [P(ŷ,a|y) / (P(ŷ|y) P(a|y))]`, zero-probability terms
/// contributing zero. Always nonnegative.
pub fn exact_conditional_mi(joint: &DiscreteJoint) -> f64 {
    let mut cmi = 0.0;
    for iy in 0..joint.y_card {
        let mut py = 0.0;
        for ih in 0..joint.yhat_card {
            for ia in 0..joint.a_card {
                py += joint.p(iy, ih, ia);
            }
        }
        if py <= 0.0 {
            continue;
        }
        let mut p_h = vec![0.0; joint.yhat_card];
        let mut p_a = vec![0.0; joint.a_card];
        for ih in 0..joint.yhat_card {
            for ia in 0..joint.a_card {
                let v = joint.p(iy, ih, ia) / py;
                p_h[ih] += v;
                p_a[ia] += v;
            }
        }
        for ih in 0..joint.yhat_card {
            for ia in 0..joint.a_card {
                let p_ha = joint.p(iy, ih, ia) / py;
                if p_ha > 0.0 {
                    cmi += py * p_ha * (p_ha / (p_h[ih] * p_a[ia])).ln();
                }
            }
        }
    }
    cmi.max(0.0)
}

/// Closed-form conditional MI for a jointly Gaussian `(y, ŷ, a)` triple:
/// `½ log(σ²_{a|y} / σ²_{a|y,ŷ})` from Schur complements of the 3×3
/// covariance (variable order y, ŷ, a).
pub fn gaussian_conditional_mi(cov: &[[f64; 3]; 3]) -> Result<f64> {
    // positive definiteness via leading principal minors
    let d1 = cov[0][0];
    let d2 = cov[0][0] * cov[1][1] - cov[0][1] * cov[1][0];
    let d3 = cov[0][0] * (cov[1][1] * cov[2][2] - cov[1][2] * cov[2][1])
        - cov[0][1] * (cov[1][0] * cov[2][2] - cov[1][2] * cov[2][0])
        + cov[0][2] * (cov[1][0] * cov[2][1] - cov[1][1] * cov[2][0]);
    if d1 <= 0.0 || d2 <= 0.0 || d3 <= 0.0 {
        return Err(Error::InvalidArgument(
            "covariance must be positive definite".into(),
        ));
    }
    // var(a | y)
    let var_a_y = cov[2][2] - cov[2][0] * cov[2][0] / cov[0][0];
    // var(a | y, yhat): Schur complement against the leading 2x2 block
    // solve [ [c00 c01]; [c10 c11] ] x = [c02; c12]
    let det = d2;
    let x0 = (cov[1][1] * cov[0][2] - cov[0][1] * cov[1][2]) / det;
    let x1 = (cov[0][0] * cov[1][2] - cov[1][0] * cov[0][2]) / det;
    let var_a_yh = cov[2][2] - (cov[2][0] * x0 + cov[2][1] * x1);
    Ok((0.5 * (var_a_y / var_a_yh).ln()).max(0.0))
}

/// Literal O(n·d) radius-neighbor count with strict inequality; must
/// agree exactly with the density module.
pub fn naive_neighbor_count(points: &[Vec<f64>], query: &[f64], radius: f64) -> Result<usize> {
    let mut count = 0;
    for p in points {
        if p.len() != query.len() {
            return Err(Error::DimensionMismatch {
                expected: query.len(),
                got: p.len(),
            });
        }
        let dist2: f64 = p.iter().zip(query).map(|(a, b)| (a - b).powi(2)).sum();
        if dist2.sqrt() < radius {
            count += 1;
        }
    }
    Ok(count)
}

/// Textbook OLS with intercept via Gauss-Jordan elimination on the normal
/// equations — an independent route from the Cholesky solver in `models`.
/// Returns `(coefficients, intercept)`.
pub fn naive_ols(columns: &[Vec<f64>], y: &[f64]) -> Result<(Vec<f64>, f64)> {
    let d = columns.len();
    let n = y.len();
    for c in columns {
        if c.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: c.len(),
            });
        }
    }
    let dim = d + 1;
    // augmented [A | b]
    let mut m = vec![vec![0.0; dim + 1]; dim];
    let feat = |j: usize, i: usize| if j < d { columns[j][i] } else { 1.0 };
    for i in 0..n {
        for j in 0..dim {
            for k in 0..dim {
                m[j][k] += feat(j, i) * feat(k, i);
            }
            m[j][dim] += feat(j, i) * y[i];
        }
    }
    // Gauss-Jordan with partial pivoting
    for col in 0..dim {
        let pivot = (col..dim)
            .max_by(|&a, &b| m[a][col].abs().partial_cmp(&m[b][col].abs()).unwrap())
            .unwrap();
        if m[pivot][col].abs() < 1e-12 {
            return Err(Error::InvalidArgument("singular normal equations".into()));
        }
        m.swap(col, pivot);
        let p = m[col][col];
        for k in col..=dim {
            m[col][k] /= p;
        }
        for r in 0..dim {
            if r != col {
                let f = m[r][col];
                for k in col..=dim {
                    m[r][k] -= f * m[col][k];
                }
            }
        }
    }
    let beta: Vec<f64> = (0..dim).map(|j| m[j][dim]).collect();
    Ok((beta[..d].to_vec(), beta[d]))
}

/// Expand rows by their integer weights so a weighted fit can be checked
/// against an unweighted fit on the duplicated data.
pub fn duplicate_by_integer_weights(
    columns: &[Vec<f64>],
    target: &[f64],
    weights: &[f64],
) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut out_cols = vec![Vec::new(); columns.len()];
    let mut out_target = Vec::new();
    for (i, w) in weights.iter().enumerate() {
        let reps = w.round() as usize;
        assert!(
            (w - reps as f64).abs() < 1e-12 && reps > 0,
            "duplication oracle needs positive integer weights"
        );
        for _ in 0..reps {
            for (j, col) in columns.iter().enumerate() {
                out_cols[j].push(col[i]);
            }
            out_target.push(target[i]);
        }
    }
    (out_cols, out_target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn product_joint_has_zero_cmi() {
        // P(y) uniform over 2, P(yhat|y) and P(a|y) arbitrary but
        // conditionally independent
        let p_h = [[0.3, 0.7], [0.6, 0.4]];
        let p_a = [[0.2, 0.8], [0.5, 0.5]];
        let mut probs = Vec::new();
        for iy in 0..2 {
            for ih in 0..2 {
                for ia in 0..2 {
                    probs.push(0.5 * p_h[iy][ih] * p_a[iy][ia]);
                }
            }
        }
        let j = DiscreteJoint::new(2, 2, 2, probs).unwrap();
        assert!(exact_conditional_mi(&j) < 1e-14);
    }

    #[test]
    fn perfectly_coupled_binary_gives_log_two() {
        // within each y stratum, yhat == a, uniform
        let mut probs = vec![0.0; 8];
        for iy in 0..2 {
            for v in 0..2 {
                probs[(iy * 2 + v) * 2 + v] = 0.25;
            }
        }
        let j = DiscreteJoint::new(2, 2, 2, probs).unwrap();
        assert!((exact_conditional_mi(&j) - 2.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn cmi_is_nonnegative_on_random_joints() {
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        for _ in 0..1000 {
            let mut probs: Vec<f64> = (0..12).map(|_| rng.gen_range(0.0..1.0)).collect();
            let total: f64 = probs.iter().sum();
            probs.iter_mut().for_each(|p| *p /= total);
            let j = DiscreteJoint::new(2, 3, 2, probs).unwrap();
            assert!(exact_conditional_mi(&j) >= 0.0);
        }
    }

    #[test]
    fn block_structure_gives_zero_gaussian_cmi() {
        // a depends on y only; yhat depends on y only
        let cov = [[1.0, 0.5, 0.3], [0.5, 1.0, 0.15], [0.3, 0.15, 1.0]];
        // cov(yhat,a) = cov(y,yhat)*cov(y,a) makes the partial correlation 0
        let v = gaussian_conditional_mi(&cov).unwrap();
        assert!(v.abs() < 1e-12, "{v}");
    }

    #[test]
    fn identity_covariance_gives_zero() {
        let eye = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        assert_eq!(gaussian_conditional_mi(&eye).unwrap(), 0.0);
    }

    #[test]
    fn partial_correlation_half_example() {
        // y independent of (yhat, a); corr(yhat, a) = 0.5
        // => CMI = -1/2 log(1 - 0.25) ≈ 0.14384
        let cov = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.5], [0.0, 0.5, 1.0]];
        let v = gaussian_conditional_mi(&cov).unwrap();
        assert!((v - 0.1438).abs() < 1e-4, "{v}");
    }

    #[test]
    fn gaussian_cmi_invariant_under_rescaling() {
        let base = [[2.0, 0.6, 0.4], [0.6, 1.5, 0.7], [0.4, 0.7, 1.2]];
        let v0 = gaussian_conditional_mi(&base).unwrap();
        // rescale a by 3 and yhat by 0.5
        let s = [1.0, 0.5, 3.0];
        let mut scaled = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                scaled[i][j] = base[i][j] * s[i] * s[j];
            }
        }
        let v1 = gaussian_conditional_mi(&scaled).unwrap();
        assert!((v0 - v1).abs() < 1e-12);
    }

    #[test]
    fn non_pd_covariance_is_rejected() {
        let cov = [[1.0, 2.0, 0.0], [2.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        assert!(gaussian_conditional_mi(&cov).is_err());
    }

    #[test]
    fn neighbor_count_matches_hand_examples() {
        let pts: Vec<Vec<f64>> = [0.0, 0.3, 2.0].iter().map(|v| vec![*v]).collect();
        assert_eq!(naive_neighbor_count(&pts, &[0.0], 0.5).unwrap(), 2);
        assert_eq!(naive_neighbor_count(&pts, &[2.0], 0.5).unwrap(), 1);
        assert_eq!(naive_neighbor_count(&pts, &[10.0], 0.5).unwrap(), 0);
    }

    #[test]
    fn naive_ols_recovers_exact_line() {
        let x = vec![vec![0.0, 1.0, 2.0, 3.0]];
        let y = [1.0, 3.0, 5.0, 7.0];
        let (coef, intercept) = naive_ols(&x, &y).unwrap();
        assert!((coef[0] - 2.0).abs() < 1e-10);
        assert!((intercept - 1.0).abs() < 1e-10);
    }
}

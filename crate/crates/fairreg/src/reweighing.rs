//! Sample-weight computation that equalizes the observed joint density of
//! (sensitive attributes, target) against the product of the marginals:
//! `W(a, y) = ρ(a) ρ(y) / ρ(a, y)`, with the densities supplied by any
//! estimator from [`crate::density`]. With the frequency estimator on
//! discrete data this reduces exactly to the classic reweighing scheme.
//!
//! Multiple sensitive columns are handled through one joint density over
//! all of them, so the same formula constrains them simultaneously.
//!
//! [`discrete_separation_check`] is the brute-force companion: on an
//! explicit finite `P(x, a, y)` satisfying `X ⊥ A | Y` it measures how far
//! the weighted Bayes predictor is from separation, which is how the
//! guarantee is verified on enumerable instances.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{fit_standardizer, ColumnKind, Dataset};
use crate::density::{eval_density, fit_density, DensityEstimatorSpec, DENSITY_FLOOR};
use crate::error::{Error, Result};

/// Weights are capped here when a denominator density was floored, which
/// can only happen for frequency estimation over disjoint supports.
pub const WEIGHT_CAP: f64 = 1e6;

fn default_true() -> bool {
    true
}

/// Configuration for [`fair_reweigh`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeighingConfig {
    /// Sensitive columns; a single joint density covers all of them.
    pub sensitive: Vec<String>,
    pub target: String,
    pub estimator: DensityEstimatorSpec,
    /// Standardize the target and continuous sensitive columns before
    /// fitting densities (ignored for the frequency estimator).
    #[serde(default = "default_true")]
    pub standardize_before_density: bool,
    /// Scale the weights so their mean is exactly 1.
    #[serde(default = "default_true")]
    pub normalize_weights: bool,
}

impl WeighingConfig {
    pub fn new(sensitive: Vec<String>, target: String, estimator: DensityEstimatorSpec) -> Self {
        WeighingConfig {
            sensitive,
            target,
            estimator,
            standardize_before_density: true,
            normalize_weights: true,
        }
    }
}

/// Weights plus bookkeeping from [`fair_reweigh`].
#[derive(Debug, Clone)]
pub struct ReweighOutput {
    pub weights: Vec<f64>,
    /// Rows whose denominator density was floored and weight capped.
    pub capped_rows: usize,
}

/// Per-row weights `w_i = ρ_A(a_i) ρ_Y(y_i) / ρ_{A,Y}(a_i, y_i)` with
/// `ρ_A` fit jointly on the sensitive columns, `ρ_Y` on the target, and
/// `ρ_{A,Y}` on their concatenation. All weights are finite and positive;
/// with `normalize_weights` their mean is exactly 1.
pub fn fair_reweigh(ds: &Dataset, cfg: &WeighingConfig) -> Result<ReweighOutput> {
    if cfg.sensitive.is_empty() {
        return Err(Error::InvalidArgument(
            "at least one sensitive column is required".into(),
        ));
    }
    if cfg.sensitive.iter().any(|s| *s == cfg.target) {
        return Err(Error::InvalidArgument(
            "sensitive columns must be distinct from the target".into(),
        ));
    }

    // standardized copies of the target and continuous sensitive columns
    let standardize =
        cfg.standardize_before_density && cfg.estimator != DensityEstimatorSpec::Frequency;
    let working = if standardize {
        let mut cols: Vec<String> = vec![cfg.target.clone()];
        for name in &cfg.sensitive {
            if ds.schema().kind_of(name) == Some(ColumnKind::SensitiveContinuous) {
                cols.push(name.clone());
            }
        }
        let params = fit_standardizer(ds, &cols)?;
        crate::data::apply_standardizer(ds, &params)?
    } else {
        ds.clone()
    };

    let n = working.n_rows();
    let sens_cols: Vec<&[f64]> = cfg
        .sensitive
        .iter()
        .map(|name| working.column(name))
        .collect::<Result<_>>()?;
    let target_col = working.column(&cfg.target)?;

    let a_points: Vec<Vec<f64>> = (0..n)
        .map(|i| sens_cols.iter().map(|c| c[i]).collect())
        .collect();
    let y_points: Vec<Vec<f64>> = (0..n).map(|i| vec![target_col[i]]).collect();
    let ay_points: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut p: Vec<f64> = sens_cols.iter().map(|c| c[i]).collect();
            p.push(target_col[i]);
            p
        })
        .collect();

    let rho_a = fit_density(&a_points, cfg.estimator)?;
    let rho_y = fit_density(&y_points, cfg.estimator)?;
    let rho_ay = fit_density(&ay_points, cfg.estimator)?;

    let raw: Vec<(f64, bool)> = (0..n)
        .into_par_iter()
        .map(|i| -> Result<(f64, bool)> {
            let pa = eval_density(&rho_a, &a_points[i])?;
            let py = eval_density(&rho_y, &y_points[i])?;
            let pay = eval_density(&rho_ay, &ay_points[i])?;
            if pay <= DENSITY_FLOOR {
                return Ok((WEIGHT_CAP, true));
            }
            Ok(((pa * py / pay).min(WEIGHT_CAP), false))
        })
        .collect::<Result<_>>()?;

    let capped_rows = raw.iter().filter(|(_, c)| *c).count();
    let mut weights: Vec<f64> = raw.into_iter().map(|(w, _)| w).collect();
    if weights.iter().any(|w| !w.is_finite() || *w <= 0.0) {
        return Err(Error::NonFinite("computed weights".into()));
    }
    if cfg.normalize_weights {
        let mean = weights.iter().sum::<f64>() / n as f64;
        weights.iter_mut().for_each(|w| *w /= mean);
    }
    Ok(ReweighOutput {
        weights,
        capped_rows,
    })
}

/// Classic frequency-count reweighing: `W(a, y) = P(a) P(y) / P(a, y)`.
/// Both columns must be discrete. Equals [`fair_reweigh`] with the
/// frequency estimator and `normalize_weights = false`, exactly.
pub fn classic_reweigh(ds: &Dataset, sensitive: &str, target: &str) -> Result<Vec<f64>> {
    let cfg = WeighingConfig {
        sensitive: vec![sensitive.to_string()],
        target: target.to_string(),
        estimator: DensityEstimatorSpec::Frequency,
        standardize_before_density: false,
        normalize_weights: false,
    };
    Ok(fair_reweigh(ds, &cfg)?.weights)
}

/// Explicit finite joint distribution over `(x, a, y)`, indexed
/// `[x][a][y]`.
#[derive(Debug, Clone)]
pub struct XayJoint {
    pub x_card: usize,
    pub a_card: usize,
    pub y_card: usize,
    probs: Vec<f64>,
}

impl XayJoint {
    pub fn new(x_card: usize, a_card: usize, y_card: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != x_card * a_card * y_card {
            return Err(Error::DimensionMismatch {
                expected: x_card * a_card * y_card,
                got: probs.len(),
            });
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidArgument(
                "probabilities must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "joint must sum to 1, got {total}"
            )));
        }
        Ok(XayJoint {
            x_card,
            a_card,
            y_card,
            probs,
        })
    }

    #[inline]
    pub fn p(&self, x: usize, a: usize, y: usize) -> f64 {
        self.probs[(x * self.a_card + a) * self.y_card + y]
    }

    pub fn p_y(&self, y: usize) -> f64 {
        let mut t = 0.0;
        for x in 0..self.x_card {
            for a in 0..self.a_card {
                t += self.p(x, a, y);
            }
        }
        t
    }

    pub fn p_a(&self, a: usize) -> f64 {
        let mut t = 0.0;
        for x in 0..self.x_card {
            for y in 0..self.y_card {
                t += self.p(x, a, y);
            }
        }
        t
    }

    pub fn p_ay(&self, a: usize, y: usize) -> f64 {
        (0..self.x_card).map(|x| self.p(x, a, y)).sum()
    }

    pub fn p_xy(&self, x: usize, y: usize) -> f64 {
        (0..self.a_card).map(|a| self.p(x, a, y)).sum()
    }

    /// Max deviation from `P(x,a|y) = P(x|y) P(a|y)` over all cells.
    pub fn conditional_independence_gap(&self) -> f64 {
        let mut gap = 0.0f64;
        for y in 0..self.y_card {
            let py = self.p_y(y);
            if py <= 0.0 {
                continue;
            }
            for x in 0..self.x_card {
                for a in 0..self.a_card {
                    let joint = self.p(x, a, y) / py;
                    let product = (self.p_xy(x, y) / py) * (self.p_ay(a, y) / py);
                    gap = gap.max((joint - product).abs());
                }
            }
        }
        gap
    }

    /// The reweighing weights `W(a, y) = P(a) P(y) / P(a, y)` computed
    /// from this joint. Zero-mass cells get weight 1 (they are never
    /// evaluated).
    pub fn reweighing_weights(&self) -> Vec<Vec<f64>> {
        (0..self.a_card)
            .map(|a| {
                (0..self.y_card)
                    .map(|y| {
                        let pay = self.p_ay(a, y);
                        if pay > 0.0 {
                            self.p_a(a) * self.p_y(y) / pay
                        } else {
                            1.0
                        }
                    })
                    .collect()
            })
            .collect()
    }
}

/// Brute-force separation check. Builds the weighted Bayes predictor
/// `P(Ŷ=ŷ|x,a) ∝ P(Y=ŷ,x,a) W(a,ŷ)`, derives `P(Ŷ|a,y)` and `P(Ŷ|y)`,
/// and returns the max over `(ŷ, a, y)` of `|P(ŷ|a,y) − P(ŷ|y)|`.
///
/// Preconditions: the joint sums to 1 and satisfies `X ⊥ A | Y` (within
/// 1e-9); `weights` is indexed `[a][y]`.
pub fn discrete_separation_check(joint: &XayJoint, weights: &[Vec<f64>]) -> Result<f64> {
    if weights.len() != joint.a_card || weights.iter().any(|row| row.len() != joint.y_card) {
        return Err(Error::DimensionMismatch {
            expected: joint.a_card * joint.y_card,
            got: weights.iter().map(|r| r.len()).sum(),
        });
    }
    let ci_gap = joint.conditional_independence_gap();
    if ci_gap > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "joint violates X ⊥ A | Y (gap {ci_gap:.3e})"
        )));
    }

    // weighted Bayes predictor P(yhat | x, a)
    let mut predictor = vec![vec![vec![0.0; joint.y_card]; joint.a_card]; joint.x_card];
    for (x, px) in predictor.iter_mut().enumerate() {
        for (a, pxa) in px.iter_mut().enumerate() {
            let mut total = 0.0;
            for (yh, slot) in pxa.iter_mut().enumerate() {
                *slot = joint.p(x, a, yh) * weights[a][yh];
                total += *slot;
            }
            if total > 0.0 {
                pxa.iter_mut().for_each(|v| *v /= total);
            } else {
                // zero-mass (x, a): conditionals below never weight it
                pxa.iter_mut()
                    .for_each(|v| *v = 1.0 / joint.y_card as f64);
            }
        }
    }

    let mut gap = 0.0f64;
    for y in 0..joint.y_card {
        let py = joint.p_y(y);
        if py <= 0.0 {
            continue;
        }
        for yh in 0..joint.y_card {
            // P(yhat | y) = Σ_{x,a} P(yhat | x, a) P(x, a | y)
            let mut p_given_y = 0.0;
            for x in 0..joint.x_card {
                for a in 0..joint.a_card {
                    p_given_y += predictor[x][a][yh] * joint.p(x, a, y) / py;
                }
            }
            for a in 0..joint.a_card {
                let pay = joint.p_ay(a, y);
                if pay <= 0.0 {
                    continue;
                }
                // P(yhat | a, y) = Σ_x P(yhat | x, a) P(x | a, y)
                let mut p_given_ay = 0.0;
                for x in 0..joint.x_card {
                    p_given_ay += predictor[x][a][yh] * joint.p(x, a, y) / pay;
                }
                gap = gap.max((p_given_ay - p_given_y).abs());
            }
        }
    }
    Ok(gap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Schema;
    use crate::synth::{exact_cond_indep_joint, CondIndepSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn discrete_ds(a: Vec<f64>, y: Vec<f64>) -> Dataset {
        let schema = Schema::new(vec![
            ("a".into(), ColumnKind::SensitiveBinary),
            ("y".into(), ColumnKind::Target),
        ])
        .unwrap();
        Dataset::new(schema, vec![a, y]).unwrap()
    }

    fn cell_data(counts: [[usize; 2]; 2]) -> Dataset {
        let mut a = Vec::new();
        let mut y = Vec::new();
        for (ai, row) in counts.iter().enumerate() {
            for (yi, c) in row.iter().enumerate() {
                for _ in 0..*c {
                    a.push(ai as f64);
                    y.push(yi as f64);
                }
            }
        }
        discrete_ds(a, y)
    }

    #[test]
    fn independent_cells_give_unit_weights() {
        let ds = cell_data([[25, 25], [25, 25]]);
        let cfg = WeighingConfig::new(
            vec!["a".into()],
            "y".into(),
            DensityEstimatorSpec::Frequency,
        );
        let out = fair_reweigh(&ds, &cfg).unwrap();
        assert!(out.weights.iter().all(|w| (w - 1.0).abs() < 1e-12));
        assert_eq!(out.capped_rows, 0);
    }

    #[test]
    fn hand_computed_two_by_two_weights() {
        // counts {(0,0):10, (0,1):30, (1,0):30, (1,1):30}
        let ds = cell_data([[10, 30], [30, 30]]);
        let cfg = WeighingConfig {
            sensitive: vec!["a".into()],
            target: "y".into(),
            estimator: DensityEstimatorSpec::Frequency,
            standardize_before_density: true,
            normalize_weights: false,
        };
        let out = fair_reweigh(&ds, &cfg).unwrap();
        let a = ds.column("a").unwrap();
        let y = ds.column("y").unwrap();
        for i in 0..ds.n_rows() {
            let expect = match (a[i] as usize, y[i] as usize) {
                (0, 0) => 1.6,
                (0, 1) => 0.8,
                (1, 0) => 0.8,
                (1, 1) => 1.2,
                _ => unreachable!(),
            };
            assert!(
                (out.weights[i] - expect).abs() < 1e-12,
                "cell ({},{}) weight {}",
                a[i],
                y[i],
                out.weights[i]
            );
        }
    }

    #[test]
    fn classic_reweigh_matches_fair_reweigh_frequency() {
        let ds = cell_data([[10, 30], [30, 30]]);
        let classic = classic_reweigh(&ds, "a", "y").unwrap();
        let cfg = WeighingConfig {
            sensitive: vec!["a".into()],
            target: "y".into(),
            estimator: DensityEstimatorSpec::Frequency,
            standardize_before_density: false,
            normalize_weights: false,
        };
        let fair = fair_reweigh(&ds, &cfg).unwrap().weights;
        assert_eq!(classic, fair);
    }

    #[test]
    fn classic_reweigh_balanced_data_is_all_ones() {
        let ds = cell_data([[20, 20], [20, 20]]);
        let w = classic_reweigh(&ds, "a", "y").unwrap();
        assert!(w.iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn radius_neighbor_on_separated_codes_matches_classic_up_to_scale() {
        // integer codes with radius below the minimum nonzero gap count
        // only exact matches, so the weights equal classic reweighing up
        // to one global factor, removed by normalization
        let ds = cell_data([[10, 30], [30, 30]]);
        let cfg = WeighingConfig {
            sensitive: vec!["a".into()],
            target: "y".into(),
            estimator: DensityEstimatorSpec::RadiusNeighbor { radius: 0.5 },
            standardize_before_density: false,
            normalize_weights: true,
        };
        let fair = fair_reweigh(&ds, &cfg).unwrap().weights;
        let mut classic = classic_reweigh(&ds, "a", "y").unwrap();
        let mean = classic.iter().sum::<f64>() / classic.len() as f64;
        classic.iter_mut().for_each(|w| *w /= mean);
        for (f, c) in fair.iter().zip(&classic) {
            assert!((f - c).abs() < 1e-12, "{f} vs {c}");
        }
    }

    #[test]
    fn continuous_weights_match_naive_pairwise_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let n = 120;
        let schema = Schema::new(vec![
            ("a".into(), ColumnKind::SensitiveContinuous),
            ("y".into(), ColumnKind::Target),
        ])
        .unwrap();
        let a: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y: Vec<f64> = a.iter().map(|v| v + rng.gen_range(-0.5..0.5)).collect();
        let ds = Dataset::new(schema, vec![a.clone(), y.clone()]).unwrap();

        let radius = 0.4;
        let cfg = WeighingConfig {
            sensitive: vec!["a".into()],
            target: "y".into(),
            estimator: DensityEstimatorSpec::RadiusNeighbor { radius },
            standardize_before_density: false,
            normalize_weights: false,
        };
        let got = fair_reweigh(&ds, &cfg).unwrap().weights;

        for i in 0..n {
            let ca = a.iter().filter(|v| (**v - a[i]).abs() < radius).count() as f64;
            let cy = y.iter().filter(|v| (**v - y[i]).abs() < radius).count() as f64;
            let cay = (0..n)
                .filter(|&j| {
                    ((a[j] - a[i]).powi(2) + (y[j] - y[i]).powi(2)).sqrt() < radius
                })
                .count() as f64;
            let expect = ca * cy / cay;
            assert!(
                (got[i] - expect).abs() < 1e-12,
                "row {i}: {} vs {expect}",
                got[i]
            );
        }
    }

    #[test]
    fn weights_are_permutation_equivariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let n = 60;
        let schema = Schema::new(vec![
            ("a".into(), ColumnKind::SensitiveContinuous),
            ("y".into(), ColumnKind::Target),
        ])
        .unwrap();
        let a: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..2.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..2.0)).collect();
        let ds = Dataset::new(schema.clone(), vec![a.clone(), y.clone()]).unwrap();
        let cfg = WeighingConfig::new(
            vec!["a".into()],
            "y".into(),
            DensityEstimatorSpec::Kernel { bandwidth: 0.3 },
        );
        let w = fair_reweigh(&ds, &cfg).unwrap().weights;

        let perm: Vec<usize> = (0..n).rev().collect();
        let pa: Vec<f64> = perm.iter().map(|&i| a[i]).collect();
        let py: Vec<f64> = perm.iter().map(|&i| y[i]).collect();
        let pds = Dataset::new(schema, vec![pa, py]).unwrap();
        let pw = fair_reweigh(&pds, &cfg).unwrap().weights;
        for (k, &i) in perm.iter().enumerate() {
            assert!((pw[k] - w[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn normalized_weights_have_unit_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let n = 200;
        let schema = Schema::new(vec![
            ("g".into(), ColumnKind::SensitiveBinary),
            ("y".into(), ColumnKind::Target),
        ])
        .unwrap();
        let g: Vec<f64> = (0..n).map(|_| if rng.gen_bool(0.7) { 1.0 } else { 0.0 }).collect();
        let y: Vec<f64> = g.iter().map(|v| v + rng.gen_range(-1.0..1.0)).collect();
        let ds = Dataset::new(schema, vec![g, y]).unwrap();
        for estimator in [
            DensityEstimatorSpec::Kernel { bandwidth: 0.2 },
            DensityEstimatorSpec::RadiusNeighbor { radius: 0.5 },
        ] {
            let cfg = WeighingConfig::new(vec!["g".into()], "y".into(), estimator);
            let out = fair_reweigh(&ds, &cfg).unwrap();
            assert!(out.weights.iter().all(|w| *w > 0.0));
            let mean = out.weights.iter().sum::<f64>() / n as f64;
            assert!((mean - 1.0).abs() < 1e-12);
        }
    }

    fn random_cond_indep_spec(rng: &mut ChaCha8Rng, x_card: usize) -> CondIndepSpec {
        let normalize = |v: &mut Vec<f64>| {
            let t: f64 = v.iter().sum();
            v.iter_mut().for_each(|p| *p /= t);
        };
        let mut p_y: Vec<f64> = (0..2).map(|_| rng.gen_range(0.2..1.0)).collect();
        normalize(&mut p_y);
        let p_x_given_y = (0..2)
            .map(|_| {
                let mut row: Vec<f64> = (0..x_card).map(|_| rng.gen_range(0.05..1.0)).collect();
                normalize(&mut row);
                row
            })
            .collect();
        let p_a_given_y = (0..2)
            .map(|_| {
                let mut row: Vec<f64> = (0..2).map(|_| rng.gen_range(0.1..1.0)).collect();
                normalize(&mut row);
                row
            })
            .collect();
        CondIndepSpec {
            p_y,
            p_x_given_y,
            p_a_given_y,
        }
    }

    #[test]
    fn eq13_weights_achieve_separation_on_conditionally_independent_joints() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut uniform_fails = 0;
        for trial in 0..100 {
            let spec = random_cond_indep_spec(&mut rng, 3);
            let joint = exact_cond_indep_joint(&spec).unwrap();
            let weights = joint.reweighing_weights();
            let gap = discrete_separation_check(&joint, &weights).unwrap();
            assert!(gap < 1e-9, "trial {trial}: gap {gap}");

            let uniform = vec![vec![1.0; joint.y_card]; joint.a_card];
            if discrete_separation_check(&joint, &uniform).unwrap() > 1e-3 {
                uniform_fails += 1;
            }
        }
        assert!(
            uniform_fails >= 90,
            "uniform weights produced a gap > 1e-3 on only {uniform_fails}/100 joints"
        );
    }

    #[test]
    fn degenerate_single_value_attribute_has_zero_gap() {
        // A has one value: separation holds trivially for any weights
        let spec = CondIndepSpec {
            p_y: vec![0.4, 0.6],
            p_x_given_y: vec![vec![0.3, 0.7], vec![0.8, 0.2]],
            p_a_given_y: vec![vec![1.0], vec![1.0]],
        };
        let joint = exact_cond_indep_joint(&spec).unwrap();
        let uniform = vec![vec![1.0; joint.y_card]; joint.a_card];
        let gap = discrete_separation_check(&joint, &uniform).unwrap();
        assert!(gap < 1e-12);
    }

    #[test]
    fn dependent_joint_is_rejected() {
        // X = A exactly within each y stratum: not conditionally independent
        let mut probs = vec![0.0; 2 * 2 * 2];
        for y in 0..2 {
            for v in 0..2 {
                probs[(v * 2 + v) * 2 + y] = 0.25;
            }
        }
        let joint = XayJoint::new(2, 2, 2, probs).unwrap();
        let uniform = vec![vec![1.0; 2]; 2];
        assert!(discrete_separation_check(&joint, &uniform).is_err());
    }
}

//! Deterministic data generators: the vertical-jump benchmark and
//! conditionally independent discrete populations for the brute-force
//! separation check.
//!
//! The jump generator draws, per row: gender ~ Bernoulli(0.7),
//! age ~ Normal(40, 15) resampled while ≤ 1 (the division below would
//! otherwise blow up), height ~ Normal(1.75, 0.15) for gender 1 else
//! Normal(1.65, 0.10), power ~ Normal(0.60, 0.15) for gender 1 else
//! Normal(0.50, 0.10), and the target
//! `jump = (height + power) · 40 / age`. Power is a hidden driver: it is
//! used in the target but not emitted as a column. Rows are generated
//! sequentially from one ChaCha8 stream, so the same `(n, seed)` is
//! bitwise reproducible.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{ColumnKind, Dataset, Schema};
use crate::error::{Error, Result};
use crate::reweighing::XayJoint;

/// Size and seed of a synthetic draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n: usize,
    pub seed: u64,
}

pub const JUMP_GENDER_RATE: f64 = 0.7;

/// Schema of the emitted jump dataset: gender (binary sensitive), age
/// (continuous sensitive), height (feature), jump (target).
pub fn jump_schema() -> Schema {
    Schema::new(vec![
        ("height".into(), ColumnKind::Feature),
        ("gender".into(), ColumnKind::SensitiveBinary),
        ("age".into(), ColumnKind::SensitiveContinuous),
        ("jump".into(), ColumnKind::Target),
    ])
    .expect("jump schema is valid")
}

struct JumpRow {
    gender: f64,
    age: f64,
    height: f64,
    jump: f64,
}

struct JumpSampler {
    rng: ChaCha8Rng,
    age: Normal<f64>,
    height: [Normal<f64>; 2],
    power: [Normal<f64>; 2],
}

impl JumpSampler {
    fn new(seed: u64) -> Self {
        JumpSampler {
            rng: ChaCha8Rng::seed_from_u64(seed),
            age: Normal::new(40.0, 15.0).unwrap(),
            height: [
                Normal::new(1.65, 0.10).unwrap(),
                Normal::new(1.75, 0.15).unwrap(),
            ],
            power: [
                Normal::new(0.50, 0.10).unwrap(),
                Normal::new(0.60, 0.15).unwrap(),
            ],
        }
    }

    fn draw(&mut self) -> JumpRow {
        let gender = if self.rng.gen_bool(JUMP_GENDER_RATE) {
            1.0
        } else {
            0.0
        };
        let mut age = self.age.sample(&mut self.rng);
        while age <= 1.0 {
            age = self.age.sample(&mut self.rng);
        }
        let g = gender as usize;
        let height = self.height[g].sample(&mut self.rng);
        let power = self.power[g].sample(&mut self.rng);
        let jump = (height + power) * 40.0 / age;
        JumpRow {
            gender,
            age,
            height,
            jump,
        }
    }
}

/// Generate the vertical-jump dataset.
pub fn generate_jump(spec: SynthSpec) -> Result<Dataset> {
    if spec.n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    let mut sampler = JumpSampler::new(spec.seed);
    let mut gender = Vec::with_capacity(spec.n);
    let mut age = Vec::with_capacity(spec.n);
    let mut height = Vec::with_capacity(spec.n);
    let mut jump = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let row = sampler.draw();
        gender.push(row.gender);
        age.push(row.age);
        height.push(row.height);
        jump.push(row.jump);
    }
    Dataset::new(jump_schema(), vec![height, gender, age, jump])
}

/// Discrete conditionally independent population spec: `P(y)`, `P(x|y)`,
/// and `P(a|y)` as normalized tables (rows indexed by y).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CondIndepSpec {
    pub p_y: Vec<f64>,
    /// `p_x_given_y[y][x]`
    pub p_x_given_y: Vec<Vec<f64>>,
    /// `p_a_given_y[y][a]`
    pub p_a_given_y: Vec<Vec<f64>>,
}

impl CondIndepSpec {
    fn validate(&self) -> Result<(usize, usize, usize)> {
        let y_card = self.p_y.len();
        if y_card == 0 || self.p_x_given_y.len() != y_card || self.p_a_given_y.len() != y_card {
            return Err(Error::InvalidArgument(
                "conditional tables must have one row per y value".into(),
            ));
        }
        let check = |v: &[f64], what: &str| -> Result<()> {
            if v.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(Error::InvalidArgument(format!("{what} has invalid entries")));
            }
            let total: f64 = v.iter().sum();
            if (total - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidArgument(format!(
                    "{what} must sum to 1, got {total}"
                )));
            }
            Ok(())
        };
        check(&self.p_y, "P(y)")?;
        let x_card = self.p_x_given_y[0].len();
        let a_card = self.p_a_given_y[0].len();
        for (i, row) in self.p_x_given_y.iter().enumerate() {
            if row.len() != x_card {
                return Err(Error::DimensionMismatch {
                    expected: x_card,
                    got: row.len(),
                });
            }
            check(row, &format!("P(x|y={i})"))?;
        }
        for (i, row) in self.p_a_given_y.iter().enumerate() {
            if row.len() != a_card {
                return Err(Error::DimensionMismatch {
                    expected: a_card,
                    got: row.len(),
                });
            }
            check(row, &format!("P(a|y={i})"))?;
        }
        Ok((x_card, a_card, y_card))
    }
}

/// Exact mode: the explicit joint `P(x,a,y) = P(y) P(x|y) P(a|y)`, which
/// satisfies `X ⊥ A | Y` by construction.
pub fn exact_cond_indep_joint(spec: &CondIndepSpec) -> Result<XayJoint> {
    let (x_card, a_card, y_card) = spec.validate()?;
    let mut probs = vec![0.0; x_card * a_card * y_card];
    for x in 0..x_card {
        for a in 0..a_card {
            for y in 0..y_card {
                probs[(x * a_card + a) * y_card + y] =
                    spec.p_y[y] * spec.p_x_given_y[y][x] * spec.p_a_given_y[y][a];
            }
        }
    }
    XayJoint::new(x_card, a_card, y_card, probs)
}

/// Sampled mode: draw `n` rows from the joint. The emitted schema is
/// `x` (feature), `a` (binary when it has two values, otherwise
/// categorical), `y` (target).
pub fn sample_cond_indep(spec: &CondIndepSpec, n: usize, seed: u64) -> Result<Dataset> {
    let (_, a_card, _) = spec.validate()?;
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pick = |table: &[f64], rng: &mut ChaCha8Rng| -> usize {
        let mut u: f64 = rng.gen_range(0.0..1.0);
        for (idx, p) in table.iter().enumerate() {
            if u < *p {
                return idx;
            }
            u -= p;
        }
        table.len() - 1
    };
    let mut xs = Vec::with_capacity(n);
    let mut aa = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for _ in 0..n {
        let y = pick(&spec.p_y, &mut rng);
        let x = pick(&spec.p_x_given_y[y], &mut rng);
        let a = pick(&spec.p_a_given_y[y], &mut rng);
        xs.push(x as f64);
        aa.push(a as f64);
        ys.push(y as f64);
    }
    let a_kind = if a_card == 2 {
        ColumnKind::SensitiveBinary
    } else {
        ColumnKind::SensitiveCategorical
    };
    let schema = Schema::new(vec![
        ("x".into(), ColumnKind::Feature),
        ("a".into(), a_kind),
        ("y".into(), ColumnKind::Target),
    ])?;
    Dataset::new(schema, vec![xs, aa, ys])
}

/// Monte-Carlo ground truth for the jump target's density: the marginal
/// of the generating mixture has no closed form (ratio distribution), so
/// the reference is a high-resolution histogram (10⁷ draws, 512 bins)
/// built from a fixed internal seed. The gender marginal is the exact
/// Bernoulli mass.
#[derive(Debug, Clone)]
pub struct JumpGroundTruth {
    lo: f64,
    bin_width: f64,
    density_y: Vec<f64>,
    /// conditional density of jump within each gender group
    density_y_given_g: [Vec<f64>; 2],
}

pub const GROUND_TRUTH_SAMPLES: usize = 10_000_000;
pub const GROUND_TRUTH_BINS: usize = 512;
const GROUND_TRUTH_SEED: u64 = 0x6a75_6d70;

impl JumpGroundTruth {
    pub fn build() -> Self {
        Self::build_with(GROUND_TRUTH_SAMPLES, GROUND_TRUTH_BINS)
    }

    pub fn build_with(samples: usize, bins: usize) -> Self {
        // pass 1: range of the jump values
        let mut sampler = JumpSampler::new(GROUND_TRUTH_SEED);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for _ in 0..samples {
            let row = sampler.draw();
            lo = lo.min(row.jump);
            hi = hi.max(row.jump);
        }
        let bin_width = (hi - lo) / bins as f64;

        // pass 2: histogram counts, overall and per gender
        let mut sampler = JumpSampler::new(GROUND_TRUTH_SEED);
        let mut counts = vec![0u64; bins];
        let mut group_counts = [vec![0u64; bins], vec![0u64; bins]];
        let mut group_totals = [0u64; 2];
        for _ in 0..samples {
            let row = sampler.draw();
            let mut bin = ((row.jump - lo) / bin_width) as usize;
            bin = bin.min(bins - 1);
            counts[bin] += 1;
            let g = row.gender as usize;
            group_counts[g][bin] += 1;
            group_totals[g] += 1;
        }
        let density_y = counts
            .iter()
            .map(|c| *c as f64 / (samples as f64 * bin_width))
            .collect();
        let density_y_given_g = [0, 1].map(|g| {
            group_counts[g]
                .iter()
                .map(|c| *c as f64 / (group_totals[g] as f64 * bin_width))
                .collect()
        });
        JumpGroundTruth {
            lo,
            bin_width,
            density_y,
            density_y_given_g,
        }
    }

    fn bin(&self, y: f64) -> Option<usize> {
        let idx = (y - self.lo) / self.bin_width;
        if idx < 0.0 {
            return None;
        }
        let idx = idx as usize;
        (idx < self.density_y.len()).then_some(idx.min(self.density_y.len() - 1))
    }

    /// Marginal density of the jump target at `y`.
    pub fn eval_y(&self, y: f64) -> f64 {
        self.bin(y).map_or(0.0, |b| self.density_y[b])
    }

    /// Joint density value at `(gender, y)`: exact gender mass times the
    /// estimated conditional density of the jump.
    pub fn eval_gender_joint(&self, gender: f64, y: f64) -> f64 {
        let mass = if gender == 1.0 {
            JUMP_GENDER_RATE
        } else {
            1.0 - JUMP_GENDER_RATE
        };
        self.bin(y)
            .map_or(0.0, |b| mass * self.density_y_given_g[gender as usize][b])
    }

    /// Numerical integral of the marginal density (sanity: ≈ 1).
    pub fn integral_y(&self) -> f64 {
        self.density_y.iter().sum::<f64>() * self.bin_width
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::pearson;

    fn mean(v: &[f64]) -> f64 {
        v.iter().sum::<f64>() / v.len() as f64
    }

    fn stddev(v: &[f64]) -> f64 {
        let m = mean(v);
        (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
    }

    #[test]
    fn jump_moments_match_generator_parameters() {
        let ds = generate_jump(SynthSpec { n: 5000, seed: 1 }).unwrap();
        let gender = ds.column("gender").unwrap();
        let age = ds.column("age").unwrap();
        let height = ds.column("height").unwrap();

        assert!((mean(gender) - 0.7).abs() < 0.02, "{}", mean(gender));
        assert!((mean(age) - 40.0).abs() < 0.7, "{}", mean(age));
        assert!((stddev(age) - 15.0).abs() < 0.5, "{}", stddev(age));

        let h1: Vec<f64> = height
            .iter()
            .zip(gender)
            .filter(|(_, g)| **g == 1.0)
            .map(|(h, _)| *h)
            .collect();
        let h0: Vec<f64> = height
            .iter()
            .zip(gender)
            .filter(|(_, g)| **g == 0.0)
            .map(|(h, _)| *h)
            .collect();
        assert!((mean(&h1) - 1.75).abs() < 0.01);
        assert!((mean(&h0) - 1.65).abs() < 0.01);
        // conditional spreads within 3 standard errors
        let se1 = 0.15 / (h1.len() as f64).sqrt();
        assert!((mean(&h1) - 1.75).abs() < 3.0 * se1);
    }

    #[test]
    fn same_spec_is_bitwise_identical() {
        let a = generate_jump(SynthSpec { n: 500, seed: 9 }).unwrap();
        let b = generate_jump(SynthSpec { n: 500, seed: 9 }).unwrap();
        for name in ["gender", "age", "height", "jump"] {
            assert_eq!(a.column(name).unwrap(), b.column(name).unwrap());
        }
        let c = generate_jump(SynthSpec { n: 500, seed: 10 }).unwrap();
        assert_ne!(a.column("jump").unwrap(), c.column("jump").unwrap());
    }

    #[test]
    fn jump_is_positive_for_all_rows() {
        let ds = generate_jump(SynthSpec { n: 20_000, seed: 3 }).unwrap();
        assert!(ds.column("jump").unwrap().iter().all(|v| *v > 0.0));
        assert!(ds.column("age").unwrap().iter().all(|v| *v > 1.0));
    }

    #[test]
    fn cond_indep_joint_sums_to_one_and_is_independent() {
        let spec = CondIndepSpec {
            p_y: vec![0.5, 0.5],
            p_x_given_y: vec![vec![0.9, 0.1], vec![0.1, 0.9]],
            p_a_given_y: vec![vec![0.8, 0.2], vec![0.3, 0.7]],
        };
        let joint = exact_cond_indep_joint(&spec).unwrap();
        let total: f64 = (0..2)
            .flat_map(|x| (0..2).flat_map(move |a| (0..2).map(move |y| (x, a, y))))
            .map(|(x, a, y)| joint.p(x, a, y))
            .sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(joint.conditional_independence_gap() < 1e-15);
    }

    #[test]
    fn unnormalized_tables_are_rejected() {
        let spec = CondIndepSpec {
            p_y: vec![0.5, 0.6],
            p_x_given_y: vec![vec![1.0], vec![1.0]],
            p_a_given_y: vec![vec![1.0], vec![1.0]],
        };
        assert!(exact_cond_indep_joint(&spec).is_err());
    }

    #[test]
    fn sampled_strata_show_no_mutual_information() {
        let spec = CondIndepSpec {
            p_y: vec![0.4, 0.6],
            p_x_given_y: vec![vec![0.7, 0.3], vec![0.2, 0.8]],
            p_a_given_y: vec![vec![0.6, 0.4], vec![0.25, 0.75]],
        };
        let ds = sample_cond_indep(&spec, 10_000, 5).unwrap();
        let x = ds.column("x").unwrap();
        let a = ds.column("a").unwrap();
        let y = ds.column("y").unwrap();
        // plug-in MI of (x, a) within each y stratum
        for target in [0.0, 1.0] {
            let rows: Vec<usize> = (0..ds.n_rows()).filter(|&i| y[i] == target).collect();
            let n = rows.len() as f64;
            let mut joint = [[0.0f64; 2]; 2];
            for &i in &rows {
                joint[x[i] as usize][a[i] as usize] += 1.0 / n;
            }
            let mut mi = 0.0;
            for xi in 0..2 {
                for ai in 0..2 {
                    let pxa = joint[xi][ai];
                    if pxa > 0.0 {
                        let px: f64 = joint[xi][0] + joint[xi][1];
                        let pa: f64 = joint[0][ai] + joint[1][ai];
                        mi += pxa * (pxa / (px * pa)).ln();
                    }
                }
            }
            assert!(mi.abs() < 0.01, "stratum {target}: MI {mi}");
        }
    }

    #[test]
    fn ground_truth_density_integrates_to_one() {
        // smaller draw keeps the unit test quick; the acceptance suite
        // exercises the full 1e7-sample build
        let gt = JumpGroundTruth::build_with(500_000, 512);
        assert!((gt.integral_y() - 1.0).abs() < 1e-3);
        let ds = generate_jump(SynthSpec { n: 2000, seed: 8 }).unwrap();
        for &y in ds.column("jump").unwrap().iter().take(50) {
            assert!(gt.eval_y(y) >= 0.0);
        }
    }

    #[test]
    fn gender_marginal_is_exact() {
        let gt = JumpGroundTruth::build_with(200_000, 256);
        let ds = generate_jump(SynthSpec { n: 100, seed: 2 }).unwrap();
        let y = ds.column("jump").unwrap()[0];
        let j1 = gt.eval_gender_joint(1.0, y);
        let j0 = gt.eval_gender_joint(0.0, y);
        let c1 = gt.density_y_given_g[1][gt.bin(y).unwrap()];
        let c0 = gt.density_y_given_g[0][gt.bin(y).unwrap()];
        assert!((j1 - 0.7 * c1).abs() < 1e-15);
        assert!((j0 - 0.3 * c0).abs() < 1e-15);
    }

    #[test]
    fn kde_estimate_tracks_ground_truth() {
        use crate::density::{eval_density_many, fit_density, DensityEstimatorSpec};
        let gt = JumpGroundTruth::build_with(2_000_000, 512);
        let ds = generate_jump(SynthSpec { n: 5000, seed: 4 }).unwrap();
        let y = ds.column("jump").unwrap();
        let pts: Vec<Vec<f64>> = y.iter().map(|v| vec![*v]).collect();
        let kde = fit_density(&pts, DensityEstimatorSpec::Kernel { bandwidth: 0.2 }).unwrap();
        let est = eval_density_many(&kde, &pts).unwrap();
        let truth: Vec<f64> = y.iter().map(|v| gt.eval_y(*v)).collect();
        let r = pearson(&est, &truth).unwrap();
        assert!(r >= 0.95, "pearson {r}");
    }
}

//! Accuracy and separation metrics.
//!
//! The separation estimators follow the density-ratio route: `r_sep`
//! averages the per-sample odds-ratio product from two logistic fits,
//! `i_sep` averages the log probability ratio from (multinomial-capable)
//! probabilistic classifiers, and `c_sep` averages the log ratio of two
//! Gaussian residual densities from linear fits. The conditioning side is
//! the ground truth `y`: the numerator model sees `(y, ŷ)` and the
//! denominator model sees `y` alone. Natural logarithms throughout.
//!
//! Metric models are always fit on the same sample being scored
//! (in-sample), which is how the averaged estimators are defined.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::models;

/// Named metric values with per-sensitive-attribute sub-maps for the
/// fairness metrics. Serializes with stable key names: `mse`, `r2`,
/// `accuracy`, `f1` at top level and `bgl`, `r_sep`, `i_sep`, `c_sep`,
/// `aod`, `eod` keyed per attribute.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    #[serde(flatten)]
    pub overall: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub per_attribute: BTreeMap<String, BTreeMap<String, f64>>,
}

impl MetricReport {
    pub fn set(&mut self, name: &str, value: f64) {
        self.overall.insert(name.to_string(), value);
    }

    pub fn set_for(&mut self, attribute: &str, name: &str, value: f64) {
        self.per_attribute
            .entry(attribute.to_string())
            .or_default()
            .insert(name.to_string(), value);
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.overall.get(name).copied()
    }

    pub fn get_for(&self, attribute: &str, name: &str) -> Option<f64> {
        self.per_attribute
            .get(attribute)
            .and_then(|m| m.get(name))
            .copied()
    }
}

fn check_equal_len(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch {
            expected: a,
            got: b,
        });
    }
    Ok(())
}

/// Mean squared error.
pub fn mse(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_equal_len(y.len(), yhat.len())?;
    if y.is_empty() {
        return Err(Error::EmptyData("mse over zero samples".into()));
    }
    Ok(y.iter()
        .zip(yhat)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        / y.len() as f64)
}

/// Coefficient of determination `1 - SS_res / SS_tot`.
pub fn r2(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_equal_len(y.len(), yhat.len())?;
    if y.len() < 2 {
        return Err(Error::InvalidArgument("r2 needs at least 2 samples".into()));
    }
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(Error::InvalidArgument("r2 undefined for constant y".into()));
    }
    let ss_res: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b).powi(2)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// Bounded group loss: the maximum per-group MSE over the groups defined
/// by a discrete sensitive column.
pub fn bgl(y: &[f64], yhat: &[f64], a: &[f64]) -> Result<f64> {
    check_equal_len(y.len(), yhat.len())?;
    check_equal_len(y.len(), a.len())?;
    if y.is_empty() {
        return Err(Error::EmptyData("bgl over zero samples".into()));
    }
    let mut groups: BTreeMap<u64, (f64, usize)> = BTreeMap::new();
    for i in 0..y.len() {
        let entry = groups.entry(a[i].to_bits()).or_insert((0.0, 0));
        entry.0 += (y[i] - yhat[i]).powi(2);
        entry.1 += 1;
    }
    Ok(groups
        .values()
        .map(|(ss, n)| ss / *n as f64)
        .fold(0.0, f64::max))
}

fn validate_binary_attribute(a: &[f64], n_min: usize) -> Result<()> {
    if a.len() < n_min {
        return Err(Error::InvalidArgument(format!(
            "need at least {n_min} samples, got {}",
            a.len()
        )));
    }
    if a.iter().any(|v| *v != 0.0 && *v != 1.0) {
        return Err(Error::InvalidArgument(
            "sensitive attribute must lie in {0, 1}".into(),
        ));
    }
    let ones = a.iter().filter(|v| **v == 1.0).count();
    if ones == 0 || ones == a.len() {
        return Err(Error::SingleClass("sensitive attribute".into()));
    }
    Ok(())
}

/// Separation ratio: fits `ρ(1|y,ŷ)` and `ρ(1|y)` by logistic regression
/// and returns `(1/n) Σ [ρ(1|y_i,ŷ_i)/(1-ρ(1|y_i,ŷ_i))] ·
/// [(1-ρ(1|y_i))/ρ(1|y_i)]`. Equals 1 under separation.
pub fn r_sep(y: &[f64], yhat: &[f64], a: &[f64]) -> Result<f64> {
    check_equal_len(y.len(), yhat.len())?;
    check_equal_len(y.len(), a.len())?;
    validate_binary_attribute(a, 10)?;
    let w = vec![1.0; y.len()];
    let joint = Matrix::from_columns(&[y, yhat])?;
    let marginal = Matrix::from_columns(&[y])?;
    let m1 = models::fit_logistic(&joint, a, &w)?;
    let m2 = models::fit_logistic(&marginal, a, &w)?;
    let p1 = models::predict_proba(&m1, &joint)?;
    let p2 = models::predict_proba(&m2, &marginal)?;
    let total: f64 = p1
        .iter()
        .zip(&p2)
        .map(|(p1, p2)| (p1 / (1.0 - p1)) * ((1.0 - p2) / p2))
        .sum();
    Ok(total / y.len() as f64)
}

/// Per-class probabilities from multinomial-capable classifiers: plain
/// logistic for binary attributes, one-vs-rest logistic with probability
/// normalization for three or more classes.
fn class_probabilities(inputs: &Matrix, a: &[f64], classes: &[f64]) -> Result<Vec<Vec<f64>>> {
    let w = vec![1.0; a.len()];
    if classes.len() == 2 {
        let labels: Vec<f64> = a
            .iter()
            .map(|v| if *v == classes[1] { 1.0 } else { 0.0 })
            .collect();
        let m = models::fit_logistic(inputs, &labels, &w)?;
        let p1 = models::predict_proba(&m, inputs)?;
        Ok(p1.iter().map(|p| vec![1.0 - p, *p]).collect())
    } else {
        let mut per_class = Vec::with_capacity(classes.len());
        for c in classes {
            let labels: Vec<f64> = a.iter().map(|v| if v == c { 1.0 } else { 0.0 }).collect();
            let m = models::fit_logistic(inputs, &labels, &w)?;
            per_class.push(models::predict_proba(&m, inputs)?);
        }
        Ok((0..a.len())
            .map(|i| {
                let raw: Vec<f64> = per_class.iter().map(|p| p[i]).collect();
                let total: f64 = raw.iter().sum();
                raw.iter().map(|p| p / total).collect()
            })
            .collect())
    }
}

/// Conditional-MI separation estimate for a discrete sensitive attribute:
/// `(1/n) Σ log [ρ(a_i|y_i,ŷ_i) / ρ(a_i|y_i)]`. Zero under separation,
/// up to estimation noise (the plug-in may go slightly negative).
pub fn i_sep(y: &[f64], yhat: &[f64], a: &[f64]) -> Result<f64> {
    check_equal_len(y.len(), yhat.len())?;
    check_equal_len(y.len(), a.len())?;
    let mut classes: Vec<f64> = a.to_vec();
    classes.sort_by(|x, y| x.partial_cmp(y).unwrap());
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::SingleClass("sensitive attribute".into()));
    }
    let joint = Matrix::from_columns(&[y, yhat])?;
    let marginal = Matrix::from_columns(&[y])?;
    let p_joint = class_probabilities(&joint, a, &classes)?;
    let p_marg = class_probabilities(&marginal, a, &classes)?;
    let mut total = 0.0;
    for i in 0..a.len() {
        let c = classes.iter().position(|v| *v == a[i]).unwrap();
        total += (p_joint[i][c] / p_marg[i][c]).ln();
    }
    Ok(total / a.len() as f64)
}

/// Continuous-MI separation estimate: fits `f₁(y,ŷ) → a` and `f₂(y) → a`
/// by unweighted least squares, models `ρ(a|·)` as Gaussians with the
/// residual RMS as stddev, and averages the log density ratio. May be
/// negative; the sign conveys the orientation of the imbalance. Binary
/// attributes are admitted (the Gaussian treats them as real values).
pub fn c_sep(y: &[f64], yhat: &[f64], a: &[f64]) -> Result<f64> {
    check_equal_len(y.len(), yhat.len())?;
    check_equal_len(y.len(), a.len())?;
    if y.len() < 10 {
        return Err(Error::InvalidArgument(
            "c_sep needs at least 10 samples".into(),
        ));
    }
    let w = vec![1.0; y.len()];
    let joint = Matrix::from_columns(&[y, yhat])?;
    let marginal = Matrix::from_columns(&[y])?;
    let f1 = models::fit_wls(&joint, a, &w)?;
    let f2 = models::fit_wls(&marginal, a, &w)?;
    let mut total = 0.0;
    for i in 0..y.len() {
        let lp1 = models::log_gaussian_conditional_density(&f1, &[y[i], yhat[i]], a[i])?;
        let lp2 = models::log_gaussian_conditional_density(&f2, &[y[i]], a[i])?;
        total += lp1 - lp2;
    }
    Ok(total / y.len() as f64)
}

/// Classification metrics for binary labels/predictions. AOD and EOD are
/// absent when either sensitive group misses a label class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub accuracy: f64,
    pub f1: f64,
    /// `½ (|ΔFPR| + |ΔTPR|)` across the two groups.
    pub aod: Option<f64>,
    /// `|TPR₀ - TPR₁|` across the two groups.
    pub eod: Option<f64>,
}

#[derive(Default, Clone, Copy)]
struct Confusion {
    tp: usize,
    fp: usize,
    tn: usize,
    fn_: usize,
}

impl Confusion {
    fn add(&mut self, y: f64, yhat: f64) {
        match (y == 1.0, yhat == 1.0) {
            (true, true) => self.tp += 1,
            (true, false) => self.fn_ += 1,
            (false, true) => self.fp += 1,
            (false, false) => self.tn += 1,
        }
    }

    fn tpr(&self) -> Option<f64> {
        let pos = self.tp + self.fn_;
        (pos > 0).then(|| self.tp as f64 / pos as f64)
    }

    fn fpr(&self) -> Option<f64> {
        let neg = self.fp + self.tn;
        (neg > 0).then(|| self.fp as f64 / neg as f64)
    }
}

pub fn classification_metrics(
    y: &[f64],
    yhat: &[f64],
    a: &[f64],
) -> Result<ClassificationMetrics> {
    check_equal_len(y.len(), yhat.len())?;
    check_equal_len(y.len(), a.len())?;
    if y.is_empty() {
        return Err(Error::EmptyData("classification metrics".into()));
    }
    for v in y.iter().chain(yhat) {
        if *v != 0.0 && *v != 1.0 {
            return Err(Error::InvalidArgument(
                "labels and predictions must lie in {0, 1}".into(),
            ));
        }
    }
    validate_binary_attribute(a, 1)?;

    let mut all = Confusion::default();
    let mut groups = [Confusion::default(), Confusion::default()];
    for i in 0..y.len() {
        all.add(y[i], yhat[i]);
        groups[a[i] as usize].add(y[i], yhat[i]);
    }

    let accuracy = (all.tp + all.tn) as f64 / y.len() as f64;
    let f1_den = 2 * all.tp + all.fp + all.fn_;
    let f1 = if f1_den == 0 {
        0.0
    } else {
        2.0 * all.tp as f64 / f1_den as f64
    };

    // both groups must contain both label classes for AOD/EOD
    let rates: Vec<Option<(f64, f64)>> = groups
        .iter()
        .map(|g| match (g.tpr(), g.fpr()) {
            (Some(t), Some(f)) => Some((t, f)),
            _ => None,
        })
        .collect();
    let (aod, eod) = match (rates[0], rates[1]) {
        (Some((t0, f0)), Some((t1, f1))) => (
            Some(0.5 * ((f0 - f1).abs() + (t0 - t1).abs())),
            Some((t0 - t1).abs()),
        ),
        _ => (None, None),
    };

    Ok(ClassificationMetrics {
        accuracy,
        f1,
        aod,
        eod,
    })
}

/// Pearson correlation coefficient.
pub fn pearson(u: &[f64], v: &[f64]) -> Result<f64> {
    check_equal_len(u.len(), v.len())?;
    if u.len() < 2 {
        return Err(Error::InvalidArgument(
            "correlation needs at least 2 samples".into(),
        ));
    }
    let n = u.len() as f64;
    let mu = u.iter().sum::<f64>() / n;
    let mv = v.iter().sum::<f64>() / n;
    let mut suv = 0.0;
    let mut suu = 0.0;
    let mut svv = 0.0;
    for (a, b) in u.iter().zip(v) {
        let da = a - mu;
        let db = b - mv;
        suv += da * db;
        suu += da * da;
        svv += db * db;
    }
    if suu == 0.0 || svv == 0.0 {
        return Err(Error::InvalidArgument(
            "correlation undefined for constant vectors".into(),
        ));
    }
    Ok(suv / (suu * svv).sqrt())
}

/// Spearman rank correlation: Pearson of average-ranked data.
pub fn spearman(u: &[f64], v: &[f64]) -> Result<f64> {
    pearson(&average_ranks(u), &average_ranks(v))
}

fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        i = j + 1;
    }
    ranks
}

//! Nonparametric density estimation in any dimension: exact frequency
//! counting for discrete data, radius-neighbor counting, and Gaussian
//! kernel density estimation.
//!
//! All three estimators are lazy: `fit` stores the reference points and
//! evaluation scans them. Datasets here are small (≤ ~25k rows), so the
//! O(n) scan per query is deliberate.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Published defaults: radius 0.5 with Euclidean distance, Gaussian
/// kernel with bandwidth 0.2. Both are overridable via configuration.
pub const DEFAULT_RADIUS: f64 = 0.5;
pub const DEFAULT_BANDWIDTH: f64 = 0.2;

/// Which estimator to use, with its parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DensityEstimatorSpec {
    /// Empirical probability mass of exact value tuples.
    Frequency,
    /// Count of reference points strictly within `radius` (Euclidean).
    /// Returns the raw count, not a normalized density; the missing
    /// normalization is one global scale factor, removed downstream by
    /// weight normalization.
    RadiusNeighbor { radius: f64 },
    /// Product-Gaussian KDE with a single shared bandwidth.
    Kernel { bandwidth: f64 },
}

impl DensityEstimatorSpec {
    fn validate(&self) -> Result<()> {
        match self {
            DensityEstimatorSpec::Frequency => Ok(()),
            DensityEstimatorSpec::RadiusNeighbor { radius } => {
                if *radius > 0.0 && radius.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidArgument(format!(
                        "radius must be positive, got {radius}"
                    )))
                }
            }
            DensityEstimatorSpec::Kernel { bandwidth } => {
                if *bandwidth > 0.0 && bandwidth.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidArgument(format!(
                        "bandwidth must be positive, got {bandwidth}"
                    )))
                }
            }
        }
    }
}

/// Evaluations of zero-count frequency cells (and fully underflowed
/// kernels) are floored here to keep downstream density ratios finite.
pub const DENSITY_FLOOR: f64 = 1e-12;

/// Fitted density model over `n` reference points of dimension `d`.
#[derive(Debug, Clone)]
pub struct DensityModel {
    spec: DensityEstimatorSpec,
    n: usize,
    d: usize,
    /// Row-major reference points; empty for `Frequency`.
    points: Vec<f64>,
    /// Exact-match counts keyed by the bit patterns of the value tuple
    /// (`Frequency` only).
    counts: HashMap<Vec<u64>, usize>,
}

fn key_of(point: &[f64]) -> Vec<u64> {
    // normalize -0.0 to 0.0 so both hash to the same cell
    point.iter().map(|v| (v + 0.0).to_bits()).collect()
}

/// Fit a density model on `points` (one row per sample). No iteration
/// happens here; the estimators evaluate lazily.
pub fn fit_density(points: &[Vec<f64>], spec: DensityEstimatorSpec) -> Result<DensityModel> {
    spec.validate()?;
    if points.is_empty() {
        return Err(Error::EmptyData("density fit with zero points".into()));
    }
    let d = points[0].len();
    if d == 0 {
        return Err(Error::InvalidArgument(
            "density fit with zero-dimensional points".into(),
        ));
    }
    for p in points {
        if p.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: p.len(),
            });
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("density reference points".into()));
        }
    }
    let mut counts = HashMap::new();
    let mut flat = Vec::new();
    match spec {
        DensityEstimatorSpec::Frequency => {
            for p in points {
                *counts.entry(key_of(p)).or_insert(0) += 1;
            }
        }
        _ => {
            flat.reserve(points.len() * d);
            for p in points {
                flat.extend_from_slice(p);
            }
        }
    }
    Ok(DensityModel {
        spec,
        n: points.len(),
        d,
        points: flat,
        counts,
    })
}

impl DensityModel {
    pub fn spec(&self) -> DensityEstimatorSpec {
        self.spec
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.d
    }
}

/// Evaluate the fitted model at one query point.
///
/// - `Frequency`: exact-match count divided by n, floored at
///   [`DENSITY_FLOOR`] when the tuple was never seen.
/// - `RadiusNeighbor`: raw count of points with `dist < r` (strict), the
///   query itself included when it is a reference point.
/// - `Kernel`: `1/(n h^d) Σ_i Π_j K((x_j - x_ij)/h)` with `K` the
///   standard normal pdf, floored at [`DENSITY_FLOOR`].
pub fn eval_density(model: &DensityModel, query: &[f64]) -> Result<f64> {
    if query.len() != model.d {
        return Err(Error::DimensionMismatch {
            expected: model.d,
            got: query.len(),
        });
    }
    let value = match model.spec {
        DensityEstimatorSpec::Frequency => {
            let count = model.counts.get(&key_of(query)).copied().unwrap_or(0);
            if count == 0 {
                DENSITY_FLOOR
            } else {
                count as f64 / model.n as f64
            }
        }
        DensityEstimatorSpec::RadiusNeighbor { radius } => {
            let r2 = radius * radius;
            let mut count = 0usize;
            for row in model.points.chunks_exact(model.d) {
                let mut dist2 = 0.0;
                for (q, x) in query.iter().zip(row) {
                    let diff = q - x;
                    dist2 += diff * diff;
                }
                if dist2 < r2 {
                    count += 1;
                }
            }
            count as f64
        }
        DensityEstimatorSpec::Kernel { bandwidth } => {
            let mut sum = 0.0;
            for row in model.points.chunks_exact(model.d) {
                let mut z2 = 0.0;
                for (q, x) in query.iter().zip(row) {
                    let z = (q - x) / bandwidth;
                    z2 += z * z;
                }
                sum += (-0.5 * z2).exp();
            }
            let norm = (model.n as f64)
                * bandwidth.powi(model.d as i32)
                * (2.0 * std::f64::consts::PI).powf(model.d as f64 / 2.0);
            (sum / norm).max(DENSITY_FLOOR)
        }
    };
    Ok(value)
}

/// Evaluate at many query points in parallel. Each evaluation is
/// independent, so results are identical to a sequential loop.
pub fn eval_density_many(model: &DensityModel, queries: &[Vec<f64>]) -> Result<Vec<f64>> {
    queries
        .par_iter()
        .map(|q| eval_density(model, q))
        .collect()
}

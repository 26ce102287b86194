//! Fair-regression toolkit: density-estimation-based sample reweighing
//! (FairReweighing) plus separation metrics for regression and
//! classification with binary, categorical, or continuous sensitive
//! attributes.
//!
//! The crate is organized around the pipeline the experiment runner
//! drives:
//!
//! - [`data`] — tabular datasets, CSV ingestion, standardization, seeded
//!   train/test splits
//! - [`density`] — frequency, radius-neighbor, and Gaussian-kernel
//!   density estimators in any dimension
//! - [`models`] — weighted least squares, IRLS logistic regression, and
//!   the Gaussian residual view of a fitted regressor
//! - [`metrics`] — MSE/R²/BGL/accuracy/F1/AOD/EOD and the separation
//!   estimators `r_sep`, `i_sep`, `c_sep`
//! - [`reweighing`] — the reweighing weight computation, its classic
//!   frequency-count reduction, and a brute-force separation check on
//!   explicit discrete distributions
//! - [`synth`] — the vertical-jump synthetic generator and conditionally
//!   independent discrete populations
//! - [`oracle`] — deliberately naive reference implementations used by
//!   tests and diagnostics
//! - [`experiment`] — the experiment runner and report types behind the
//!   CLI
//!
//! All randomized operations (splits, generators) are keyed by a `u64`
//! seed driving a ChaCha8 stream, so identical inputs always reproduce
//! identical outputs.

pub mod data;
pub mod density;
pub mod error;
pub mod experiment;
mod linalg;
pub mod metrics;
pub mod models;
pub mod oracle;
pub mod reweighing;
pub mod synth;

pub use error::{Error, Result};

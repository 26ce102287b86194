//! Experiment runner: repeated seeded splits, optional reweighing on the
//! training half, feature standardization on training statistics, a
//! weighted linear or logistic model, and metric reports on the held-out
//! predictions.
//!
//! Per iteration `k` the split seed is `base_seed + k`, so a config fully
//! determines every result. Metric models are fit on the test-split
//! triples `(y, ŷ, a)` — that is where predictions exist. Metrics that
//! are undefined on a given split (a single-class group, a constant
//! target) are recorded as absent for that iteration, not as zero.
//! All model-input columns, sensitive ones included, are standardized on
//! training statistics; predictions are affine-invariant so this only
//! fixes the conditioning of the solves.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::{self, ColumnKind, Dataset, Schema};
use crate::density::{DensityEstimatorSpec, DEFAULT_BANDWIDTH};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::metrics::{self, MetricReport};
use crate::models;
use crate::reweighing::{fair_reweigh, WeighingConfig};
use crate::synth::{generate_jump, SynthSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Regression,
    Classification,
}

/// Where the experiment data comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    /// CSV file plus its JSON schema config.
    Csv { path: String, schema: String },
    /// Built-in vertical-jump generator.
    Synth { n: usize, seed: u64 },
}

/// Bias-mitigation treatment applied to each training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Treatment {
    None,
    FairReweighing {
        /// Sensitive columns to constrain jointly; all schema sensitive
        /// columns when omitted.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sensitive: Option<Vec<String>>,
        /// Density estimator; Gaussian kernel with the published default
        /// bandwidth when omitted.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        estimator: Option<DensityEstimatorSpec>,
        #[serde(default = "default_true")]
        standardize_before_density: bool,
        #[serde(default = "default_true")]
        normalize_weights: bool,
    },
    ClassicReweighing {
        /// Sensitive column; the first schema sensitive column when
        /// omitted. Requires discrete sensitive and target columns.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sensitive: Option<String>,
    },
}

fn default_true() -> bool {
    true
}

fn default_fraction() -> f64 {
    0.5
}

fn default_iterations() -> usize {
    20
}

fn default_seed() -> u64 {
    42
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub data: DataSource,
    pub task: Task,
    #[serde(default = "Treatment::none")]
    pub treatment: Treatment,
    #[serde(default = "default_fraction")]
    pub split_fraction: f64,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "default_seed")]
    pub base_seed: u64,
    #[serde(default = "default_true")]
    pub include_sensitive_as_feature: bool,
}

impl Treatment {
    fn none() -> Treatment {
        Treatment::None
    }
}

impl ExperimentConfig {
    pub fn from_json(json: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(json)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidArgument("iterations must be ≥ 1".into()));
        }
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return Err(Error::InvalidArgument(
                "split_fraction must lie in (0, 1)".into(),
            ));
        }
        Ok(())
    }
}

/// Wall-clock totals per phase, milliseconds summed over iterations.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimings {
    pub weigh_ms: f64,
    pub fit_ms: f64,
    pub metrics_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub iterations: Vec<MetricReport>,
    pub mean: MetricReport,
    pub std: MetricReport,
    pub timing: PhaseTimings,
}

/// Load the configured dataset.
pub fn load_source(source: &DataSource) -> Result<Dataset> {
    match source {
        DataSource::Csv { path, schema } => {
            let schema = Schema::from_config_path(schema)?;
            data::load_csv(path, &schema)
        }
        DataSource::Synth { n, seed } => generate_jump(SynthSpec { n: *n, seed: *seed }),
    }
}

/// Training weights for one split under the configured treatment.
pub fn treatment_weights(train: &Dataset, treatment: &Treatment) -> Result<Vec<f64>> {
    match treatment {
        Treatment::None => Ok(vec![1.0; train.n_rows()]),
        Treatment::FairReweighing {
            sensitive,
            estimator,
            standardize_before_density,
            normalize_weights,
        } => {
            let sensitive = match sensitive {
                Some(cols) => cols.clone(),
                None => train.schema().sensitive_names(),
            };
            let cfg = WeighingConfig {
                sensitive,
                target: train.schema().target().to_string(),
                estimator: estimator.unwrap_or(DensityEstimatorSpec::Kernel {
                    bandwidth: DEFAULT_BANDWIDTH,
                }),
                standardize_before_density: *standardize_before_density,
                normalize_weights: *normalize_weights,
            };
            Ok(fair_reweigh(train, &cfg)?.weights)
        }
        Treatment::ClassicReweighing { sensitive } => {
            let column = match sensitive {
                Some(c) => c.clone(),
                None => train
                    .schema()
                    .sensitive_names()
                    .first()
                    .cloned()
                    .ok_or_else(|| {
                        Error::Schema("classic reweighing needs a sensitive column".into())
                    })?,
            };
            crate::reweighing::classic_reweigh(train, &column, train.schema().target())
        }
    }
}

fn model_input_columns(schema: &Schema, include_sensitive: bool) -> Vec<String> {
    let mut cols = schema.feature_names();
    if include_sensitive {
        cols.extend(schema.sensitive_names());
    }
    cols
}

fn matrix_from(ds: &Dataset, columns: &[String]) -> Result<Matrix> {
    let cols: Vec<&[f64]> = columns
        .iter()
        .map(|c| ds.column(c))
        .collect::<Result<_>>()?;
    Matrix::from_columns(&cols)
}

/// Fit on the training split and predict the test split. Returns raw
/// regression predictions, or probabilities thresholded at 0.5 for
/// classification.
fn fit_and_predict(
    task: Task,
    train: &Dataset,
    test: &Dataset,
    weights: &[f64],
    include_sensitive: bool,
) -> Result<Vec<f64>> {
    let columns = model_input_columns(train.schema(), include_sensitive);
    if columns.is_empty() {
        return Err(Error::Schema("no model input columns".into()));
    }
    let params = data::fit_standardizer(train, &columns)?;
    let train_std = data::apply_standardizer(train, &params)?;
    let test_std = data::apply_standardizer(test, &params)?;
    let x_train = matrix_from(&train_std, &columns)?;
    let x_test = matrix_from(&test_std, &columns)?;
    let y_train = train.column(train.schema().target())?;

    match task {
        Task::Regression => {
            let model = models::fit_wls(&x_train, y_train, weights)?;
            models::predict_linear(&model, &x_test)
        }
        Task::Classification => {
            let model = models::fit_logistic(&x_train, y_train, weights)?;
            let proba = models::predict_proba(&model, &x_test)?;
            Ok(proba
                .iter()
                .map(|p| if *p >= 0.5 { 1.0 } else { 0.0 })
                .collect())
        }
    }
}

/// All applicable metrics of one scored split.
pub fn score_predictions(task: Task, test: &Dataset, predictions: &[f64]) -> Result<MetricReport> {
    let y = test.column(test.schema().target())?;
    if predictions.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: y.len(),
            got: predictions.len(),
        });
    }
    let mut report = MetricReport::default();
    let mut set = |report: &mut MetricReport, name: &str, value: Result<f64>| {
        if let Ok(v) = value {
            if v.is_finite() {
                report.set(name, v);
            }
        }
    };

    match task {
        Task::Regression => {
            set(&mut report, "mse", metrics::mse(y, predictions));
            set(&mut report, "r2", metrics::r2(y, predictions));
        }
        Task::Classification => {
            // accuracy and F1 need no sensitive grouping; reuse the first
            // binary attribute's confusion-based path below when present,
            // otherwise compute directly here
            let correct = y
                .iter()
                .zip(predictions)
                .filter(|(a, b)| a == b)
                .count() as f64;
            report.set("accuracy", correct / y.len() as f64);
            let (mut tp, mut fp, mut fn_) = (0.0, 0.0, 0.0);
            for (yi, pi) in y.iter().zip(predictions) {
                match (*yi == 1.0, *pi == 1.0) {
                    (true, true) => tp += 1.0,
                    (false, true) => fp += 1.0,
                    (true, false) => fn_ += 1.0,
                    _ => {}
                }
            }
            let den = 2.0 * tp + fp + fn_;
            report.set("f1", if den == 0.0 { 0.0 } else { 2.0 * tp / den });
        }
    }

    for (name, kind) in test.schema().columns() {
        if !kind.is_sensitive() {
            continue;
        }
        let a = test.column(name)?;
        let mut set_attr = |report: &mut MetricReport, key: &str, value: Result<f64>| {
            if let Ok(v) = value {
                if v.is_finite() {
                    report.set_for(name, key, v);
                }
            }
        };
        match kind {
            ColumnKind::SensitiveBinary => {
                if task == Task::Regression {
                    set_attr(&mut report, "bgl", metrics::bgl(y, predictions, a));
                }
                set_attr(&mut report, "r_sep", metrics::r_sep(y, predictions, a));
                set_attr(&mut report, "i_sep", metrics::i_sep(y, predictions, a));
                set_attr(&mut report, "c_sep", metrics::c_sep(y, predictions, a));
                if task == Task::Classification {
                    if let Ok(cm) = metrics::classification_metrics(y, predictions, a) {
                        if let Some(aod) = cm.aod {
                            report.set_for(name, "aod", aod);
                        }
                        if let Some(eod) = cm.eod {
                            report.set_for(name, "eod", eod);
                        }
                    }
                }
            }
            ColumnKind::SensitiveCategorical => {
                if task == Task::Regression {
                    set_attr(&mut report, "bgl", metrics::bgl(y, predictions, a));
                }
                set_attr(&mut report, "i_sep", metrics::i_sep(y, predictions, a));
            }
            ColumnKind::SensitiveContinuous => {
                set_attr(&mut report, "c_sep", metrics::c_sep(y, predictions, a));
            }
            _ => {}
        }
    }
    Ok(report)
}

fn aggregate(reports: &[MetricReport]) -> (MetricReport, MetricReport) {
    let mut mean = MetricReport::default();
    let mut std = MetricReport::default();

    let mut overall_keys: Vec<String> = Vec::new();
    let mut attr_keys: Vec<(String, String)> = Vec::new();
    for r in reports {
        for k in r.overall.keys() {
            if !overall_keys.contains(k) {
                overall_keys.push(k.clone());
            }
        }
        for (attr, sub) in &r.per_attribute {
            for k in sub.keys() {
                if !attr_keys.contains(&(attr.clone(), k.clone())) {
                    attr_keys.push((attr.clone(), k.clone()));
                }
            }
        }
    }

    let stats = |values: &[f64]| -> (f64, f64) {
        let n = values.len() as f64;
        let m = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
        (m, var.sqrt())
    };

    for key in overall_keys {
        let values: Vec<f64> = reports.iter().filter_map(|r| r.get(&key)).collect();
        if !values.is_empty() {
            let (m, s) = stats(&values);
            mean.set(&key, m);
            std.set(&key, s);
        }
    }
    for (attr, key) in attr_keys {
        let values: Vec<f64> = reports
            .iter()
            .filter_map(|r| r.get_for(&attr, &key))
            .collect();
        if !values.is_empty() {
            let (m, s) = stats(&values);
            mean.set_for(&attr, &key, m);
            std.set_for(&attr, &key, s);
        }
    }
    (mean, std)
}

/// Run the full protocol: for iteration `k`, split with seed
/// `base_seed + k`, compute treatment weights on the training half, fit,
/// predict the held-out half, and score. Aggregates mean and standard
/// deviation per metric.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let started = Instant::now();
    let ds = load_source(&cfg.data)?;
    let mut timing = PhaseTimings::default();
    let mut reports = Vec::with_capacity(cfg.iterations);

    for k in 0..cfg.iterations {
        let seed = cfg.base_seed.wrapping_add(k as u64);
        let (train, test) = data::split(&ds, cfg.split_fraction, seed)?;

        let t0 = Instant::now();
        let weights = treatment_weights(&train, &cfg.treatment)?;
        timing.weigh_ms += t0.elapsed().as_secs_f64() * 1e3;

        let t1 = Instant::now();
        let predictions = fit_and_predict(
            cfg.task,
            &train,
            &test,
            &weights,
            cfg.include_sensitive_as_feature,
        )?;
        timing.fit_ms += t1.elapsed().as_secs_f64() * 1e3;

        let t2 = Instant::now();
        reports.push(score_predictions(cfg.task, &test, &predictions)?);
        timing.metrics_ms += t2.elapsed().as_secs_f64() * 1e3;
    }

    let (mean, std) = aggregate(&reports);
    timing.total_ms = started.elapsed().as_secs_f64() * 1e3;
    Ok(ExperimentResult {
        config: cfg.clone(),
        iterations: reports,
        mean,
        std,
        timing,
    })
}

/// Outcome of comparing a treated run against an untreated baseline:
/// every separation metric must strictly improve and the MSE degradation
/// must stay under the given bound.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ImprovementPattern {
    /// `(attribute, metric, baseline, treated)` for improved metrics.
    pub improved: Vec<(String, String, f64, f64)>,
    /// Metrics that did not strictly improve.
    pub violations: Vec<(String, String, f64, f64)>,
    /// `(mse_treated - mse_baseline) / mse_baseline`, when both exist.
    pub mse_degradation: Option<f64>,
    pub ok: bool,
}

/// Distance from the fair point: 1 for `r_sep`, 0 for everything else.
fn violation_size(metric: &str, value: f64) -> f64 {
    if metric == "r_sep" {
        (value - 1.0).abs()
    } else {
        value.abs()
    }
}

pub fn improvement_pattern(
    baseline: &MetricReport,
    treated: &MetricReport,
    max_mse_degradation: f64,
) -> ImprovementPattern {
    let separation_keys = ["r_sep", "i_sep", "c_sep", "aod", "eod"];
    let mut improved = Vec::new();
    let mut violations = Vec::new();
    let attrs: BTreeMap<&String, &BTreeMap<String, f64>> = baseline.per_attribute.iter().collect();
    for (attr, sub) in attrs {
        for key in separation_keys {
            if let (Some(b), Some(t)) = (sub.get(key), treated.get_for(attr, key)) {
                if violation_size(key, t) < violation_size(key, *b) {
                    improved.push((attr.clone(), key.to_string(), *b, t));
                } else {
                    violations.push((attr.clone(), key.to_string(), *b, t));
                }
            }
        }
    }
    let mse_degradation = match (baseline.get("mse"), treated.get("mse")) {
        (Some(b), Some(t)) if b > 0.0 => Some((t - b) / b),
        _ => None,
    };
    let ok = violations.is_empty()
        && !improved.is_empty()
        && mse_degradation.map_or(true, |d| d <= max_mse_degradation);
    ImprovementPattern {
        improved,
        violations,
        mse_degradation,
        ok,
    }
}

/// `metric,scope,mean,std` rows.
pub fn result_to_csv(result: &ExperimentResult) -> String {
    let mut out = String::from("metric,scope,mean,std\n");
    for (key, value) in &result.mean.overall {
        let std = result.std.get(key).unwrap_or(0.0);
        out.push_str(&format!("{key},overall,{value},{std}\n"));
    }
    for (attr, sub) in &result.mean.per_attribute {
        for (key, value) in sub {
            let std = result.std.get_for(attr, key).unwrap_or(0.0);
            out.push_str(&format!("{key},{attr},{value},{std}\n"));
        }
    }
    out
}

fn metric_columns(results: &[(&str, &ExperimentResult)]) -> Vec<(String, Option<String>)> {
    let mut cols: Vec<(String, Option<String>)> = Vec::new();
    for (_, r) in results {
        for key in r.mean.overall.keys() {
            let col = (key.clone(), None);
            if !cols.contains(&col) {
                cols.push(col);
            }
        }
        for (attr, sub) in &r.mean.per_attribute {
            for key in sub.keys() {
                let col = (key.clone(), Some(attr.clone()));
                if !cols.contains(&col) {
                    cols.push(col);
                }
            }
        }
    }
    cols
}

/// Markdown table with one row per labeled result, mirroring the layout
/// of the benchmark tables (columns = metrics, per-attribute metrics
/// suffixed with the attribute name).
pub fn markdown_comparison(results: &[(&str, &ExperimentResult)]) -> String {
    let cols = metric_columns(results);
    let mut header = String::from("| treatment |");
    let mut rule = String::from("|---|");
    for (key, attr) in &cols {
        match attr {
            Some(a) => header.push_str(&format!(" {key}({a}) |")),
            None => header.push_str(&format!(" {key} |")),
        }
        rule.push_str("---|");
    }
    let mut out = format!("{header}\n{rule}\n");
    for (label, r) in results {
        let mut row = format!("| {label} |");
        for (key, attr) in &cols {
            let value = match attr {
                Some(a) => r.mean.get_for(a, key),
                None => r.mean.get(key),
            };
            match value {
                Some(v) => row.push_str(&format!(" {v:.3} |")),
                None => row.push_str(" — |"),
            }
        }
        out.push_str(&row);
        out.push('\n');
    }
    out
}

/// Single-result markdown report.
pub fn result_to_markdown(label: &str, result: &ExperimentResult) -> String {
    let mut out = markdown_comparison(&[(label, result)]);
    out.push_str(&format!(
        "\n{} iterations, split {:.2}, base seed {}; weigh {:.0} ms, fit {:.0} ms, metrics {:.0} ms, total {:.0} ms\n",
        result.config.iterations,
        result.config.split_fraction,
        result.config.base_seed,
        result.timing.weigh_ms,
        result.timing.fit_ms,
        result.timing.metrics_ms,
        result.timing.total_ms,
    ));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synth_config(treatment: Treatment, iterations: usize) -> ExperimentConfig {
        ExperimentConfig {
            data: DataSource::Synth { n: 400, seed: 7 },
            task: Task::Regression,
            treatment,
            split_fraction: 0.5,
            iterations,
            base_seed: 1,
            include_sensitive_as_feature: true,
        }
    }

    #[test]
    fn config_json_round_trip_and_defaults() {
        let json = r#"{
            "data": {"synth": {"n": 100, "seed": 3}},
            "task": "regression",
            "treatment": {"kind": "fair_reweighing",
                          "estimator": {"kind": "kernel", "bandwidth": 0.2}}
        }"#;
        let cfg = ExperimentConfig::from_json(json).unwrap();
        assert_eq!(cfg.iterations, 20);
        assert_eq!(cfg.split_fraction, 0.5);
        assert!(cfg.include_sensitive_as_feature);
        let back: ExperimentConfig =
            serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = synth_config(Treatment::None, 1);
        cfg.iterations = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = synth_config(Treatment::None, 1);
        cfg.split_fraction = 1.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn identical_configs_give_identical_results() {
        let cfg = synth_config(Treatment::None, 2);
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(
            serde_json::to_string(&a.iterations).unwrap(),
            serde_json::to_string(&b.iterations).unwrap()
        );
    }

    #[test]
    fn none_treatment_equals_manual_unit_weights() {
        let ds = load_source(&DataSource::Synth { n: 300, seed: 5 }).unwrap();
        let (train, test) = data::split(&ds, 0.5, 3).unwrap();
        let auto = fit_and_predict(
            Task::Regression,
            &train,
            &test,
            &treatment_weights(&train, &Treatment::None).unwrap(),
            true,
        )
        .unwrap();
        let manual =
            fit_and_predict(Task::Regression, &train, &test, &vec![1.0; 150], true).unwrap();
        assert_eq!(auto, manual);
    }

    #[test]
    fn mean_equals_recomputed_average() {
        let cfg = synth_config(Treatment::None, 4);
        let result = run_experiment(&cfg).unwrap();
        for key in ["mse", "r2"] {
            let values: Vec<f64> = result
                .iterations
                .iter()
                .filter_map(|r| r.get(key))
                .collect();
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            assert!((result.mean.get(key).unwrap() - mean).abs() < 1e-12);
        }
        let values: Vec<f64> = result
            .iterations
            .iter()
            .filter_map(|r| r.get_for("gender", "c_sep"))
            .collect();
        if !values.is_empty() {
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            assert!((result.mean.get_for("gender", "c_sep").unwrap() - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn fair_reweighing_treatment_runs_end_to_end() {
        let cfg = synth_config(
            Treatment::FairReweighing {
                sensitive: None,
                estimator: None,
                standardize_before_density: true,
                normalize_weights: true,
            },
            2,
        );
        let result = run_experiment(&cfg).unwrap();
        assert!(result.mean.get("mse").unwrap() > 0.0);
        assert!(result.mean.get_for("gender", "r_sep").is_some());
        assert!(result.mean.get_for("age", "c_sep").is_some());
    }

    #[test]
    fn report_emitters_cover_all_metrics() {
        let cfg = synth_config(Treatment::None, 2);
        let result = run_experiment(&cfg).unwrap();
        let csv = result_to_csv(&result);
        assert!(csv.contains("mse,overall"));
        assert!(csv.contains("r_sep,gender"));
        let md = result_to_markdown("None", &result);
        assert!(md.contains("| None |"));
        assert!(md.contains("mse"));
        let cmp = markdown_comparison(&[("A", &result), ("B", &result)]);
        assert_eq!(cmp.lines().count(), 4);
    }

    #[test]
    fn improvement_pattern_flags_regressions() {
        let mut base = MetricReport::default();
        base.set("mse", 0.02);
        base.set_for("g", "r_sep", 1.5);
        base.set_for("g", "i_sep", 0.15);
        let mut good = MetricReport::default();
        good.set("mse", 0.022);
        good.set_for("g", "r_sep", 1.1);
        good.set_for("g", "i_sep", 0.02);
        let p = improvement_pattern(&base, &good, 0.35);
        assert!(p.ok, "{p:?}");
        assert_eq!(p.improved.len(), 2);

        let mut bad = MetricReport::default();
        bad.set("mse", 0.022);
        bad.set_for("g", "r_sep", 1.6);
        bad.set_for("g", "i_sep", 0.02);
        let p = improvement_pattern(&base, &bad, 0.35);
        assert!(!p.ok);
        assert_eq!(p.violations.len(), 1);

        let mut slow = MetricReport::default();
        slow.set("mse", 0.04);
        slow.set_for("g", "r_sep", 1.1);
        slow.set_for("g", "i_sep", 0.02);
        let p = improvement_pattern(&base, &slow, 0.35);
        assert!(!p.ok);
    }
}

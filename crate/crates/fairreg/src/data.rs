//! Tabular data model: schema-typed columns of `f64`, CSV ingestion,
//! standardization, and seeded train/test splitting.
//!
//! Datasets are immutable after construction and safe to share across
//! threads; every operation here is a pure function of its inputs. Splits
//! shuffle with a ChaCha8 stream keyed by the caller's seed, so the same
//! `(dataset, fraction, seed)` always produces the same partition.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Role a column plays in the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Feature,
    SensitiveBinary,
    SensitiveCategorical,
    SensitiveContinuous,
    Target,
}

impl ColumnKind {
    pub fn is_sensitive(self) -> bool {
        matches!(
            self,
            ColumnKind::SensitiveBinary
                | ColumnKind::SensitiveCategorical
                | ColumnKind::SensitiveContinuous
        )
    }
}

/// Ordered list of `(column name, kind)` pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    columns: Vec<(String, ColumnKind)>,
}

impl Schema {
    /// Column names must be unique and exactly one column must be the
    /// target.
    pub fn new(columns: Vec<(String, ColumnKind)>) -> Result<Self> {
        let mut seen = HashMap::new();
        let mut targets = 0usize;
        for (name, kind) in &columns {
            if seen.insert(name.clone(), ()).is_some() {
                return Err(Error::Schema(format!("duplicate column name '{name}'")));
            }
            if *kind == ColumnKind::Target {
                targets += 1;
            }
        }
        if targets != 1 {
            return Err(Error::Schema(format!(
                "schema must declare exactly one target column, found {targets}"
            )));
        }
        Ok(Schema { columns })
    }

    pub fn columns(&self) -> &[(String, ColumnKind)] {
        &self.columns
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|(n, _)| n.as_str())
    }

    pub fn kind_of(&self, name: &str) -> Option<ColumnKind> {
        self.columns
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, k)| *k)
    }

    pub fn target(&self) -> &str {
        self.columns
            .iter()
            .find(|(_, k)| *k == ColumnKind::Target)
            .map(|(n, _)| n.as_str())
            .expect("schema invariant: one target")
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.columns
            .iter()
            .filter(|(_, k)| *k == ColumnKind::Feature)
            .map(|(n, _)| n.clone())
            .collect()
    }

    pub fn sensitive_names(&self) -> Vec<String> {
        self.columns
            .iter()
            .filter(|(_, k)| k.is_sensitive())
            .map(|(n, _)| n.clone())
            .collect()
    }

    /// Read the JSON schema config:
    /// `{"target": name, "features": [names],
    ///   "sensitive": [{"name": n, "kind": "binary"|"categorical"|"continuous"}]}`.
    ///
    /// Column order in the resulting schema is features, then sensitive,
    /// then target.
    pub fn from_config_json(json: &str) -> Result<Self> {
        let cfg: SchemaConfig = serde_json::from_str(json)?;
        let mut columns = Vec::new();
        for f in cfg.features {
            columns.push((f, ColumnKind::Feature));
        }
        for s in cfg.sensitive {
            let kind = match s.kind.as_str() {
                "binary" => ColumnKind::SensitiveBinary,
                "categorical" => ColumnKind::SensitiveCategorical,
                "continuous" => ColumnKind::SensitiveContinuous,
                other => {
                    return Err(Error::Schema(format!(
                        "unknown sensitive kind '{other}' (expected binary|categorical|continuous)"
                    )))
                }
            };
            columns.push((s.name, kind));
        }
        columns.push((cfg.target, ColumnKind::Target));
        Schema::new(columns)
    }

    pub fn from_config_path(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Schema::from_config_json(&text)
    }

    pub fn to_config_json(&self) -> String {
        let cfg = SchemaConfig {
            target: self.target().to_string(),
            features: self.feature_names(),
            sensitive: self
                .columns
                .iter()
                .filter_map(|(n, k)| {
                    let kind = match k {
                        ColumnKind::SensitiveBinary => "binary",
                        ColumnKind::SensitiveCategorical => "categorical",
                        ColumnKind::SensitiveContinuous => "continuous",
                        _ => return None,
                    };
                    Some(SensitiveConfig {
                        name: n.clone(),
                        kind: kind.to_string(),
                    })
                })
                .collect(),
        };
        serde_json::to_string_pretty(&cfg).expect("schema config serializes")
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct SchemaConfig {
    target: String,
    #[serde(default)]
    features: Vec<String>,
    #[serde(default)]
    sensitive: Vec<SensitiveConfig>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SensitiveConfig {
    name: String,
    kind: String,
}

/// Columnar table of `f64` values with per-row sample weights.
///
/// Categorical text values are integer-coded in first-seen order; the
/// codebook is kept so reports can print the original labels.
#[derive(Debug, Clone)]
pub struct Dataset {
    schema: Schema,
    n_rows: usize,
    columns: Vec<Vec<f64>>,
    weights: Vec<f64>,
    codebook: HashMap<String, Vec<String>>,
}

impl Dataset {
    pub fn new(schema: Schema, columns: Vec<Vec<f64>>) -> Result<Self> {
        Self::with_codebook(schema, columns, HashMap::new())
    }

    pub fn with_codebook(
        schema: Schema,
        columns: Vec<Vec<f64>>,
        codebook: HashMap<String, Vec<String>>,
    ) -> Result<Self> {
        if columns.len() != schema.columns().len() {
            return Err(Error::Schema(format!(
                "schema declares {} columns but {} were provided",
                schema.columns().len(),
                columns.len()
            )));
        }
        let n_rows = columns.first().map_or(0, |c| c.len());
        if n_rows == 0 {
            return Err(Error::EmptyData("dataset with zero rows".into()));
        }
        for (idx, col) in columns.iter().enumerate() {
            if col.len() != n_rows {
                return Err(Error::DimensionMismatch {
                    expected: n_rows,
                    got: col.len(),
                });
            }
            let (name, kind) = &schema.columns()[idx];
            for v in col {
                if !v.is_finite() {
                    return Err(Error::NonFinite(format!("column '{name}'")));
                }
                if *kind == ColumnKind::SensitiveBinary && *v != 0.0 && *v != 1.0 {
                    return Err(Error::Schema(format!(
                        "binary sensitive column '{name}' contains value {v}, expected 0 or 1"
                    )));
                }
            }
        }
        Ok(Dataset {
            schema,
            n_rows,
            columns,
            weights: vec![1.0; n_rows],
            codebook,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn column(&self, name: &str) -> Result<&[f64]> {
        let idx = self
            .schema
            .columns()
            .iter()
            .position(|(n, _)| n == name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))?;
        Ok(&self.columns[idx])
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Replace the sample weights; all must be strictly positive and finite.
    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.n_rows {
            return Err(Error::DimensionMismatch {
                expected: self.n_rows,
                got: weights.len(),
            });
        }
        if weights.iter().any(|w| !w.is_finite() || *w <= 0.0) {
            return Err(Error::InvalidArgument(
                "weights must be strictly positive and finite".into(),
            ));
        }
        self.weights = weights;
        Ok(self)
    }

    /// Original text labels for an integer-coded categorical column, in
    /// code order.
    pub fn labels(&self, column: &str) -> Option<&[String]> {
        self.codebook.get(column).map(|v| v.as_slice())
    }

    /// New dataset containing the given rows in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Dataset> {
        if rows.is_empty() {
            return Err(Error::EmptyData("row selection is empty".into()));
        }
        let columns = self
            .columns
            .iter()
            .map(|col| rows.iter().map(|&i| col[i]).collect())
            .collect();
        let weights = rows.iter().map(|&i| self.weights[i]).collect();
        Ok(Dataset {
            schema: self.schema.clone(),
            n_rows: rows.len(),
            columns,
            weights,
            codebook: self.codebook.clone(),
        })
    }

    /// Write the dataset as an RFC-4180 CSV with a header row.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = File::create(path)?;
        let mut out = BufWriter::new(file);
        let names: Vec<&str> = self.schema.names().collect();
        writeln!(out, "{}", names.join(","))?;
        for i in 0..self.n_rows {
            let row: Vec<String> = self
                .columns
                .iter()
                .map(|c| format_cell(c[i]))
                .collect();
            writeln!(out, "{}", row.join(","))?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Serialize an `f64` so that load ∘ write is the identity.
fn format_cell(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        // 17 significant digits round-trip any f64
        format!("{v:.17e}")
    }
}

/// Load a CSV whose header contains every schema column (by name; extra
/// file columns are ignored). All cells must parse as numbers except in
/// `SensitiveCategorical` columns, where text values are integer-coded in
/// first-seen order.
pub fn load_csv(path: impl AsRef<Path>, schema: &Schema) -> Result<Dataset> {
    let file = File::open(path.as_ref())?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(BufReader::new(file));

    let headers = reader.headers()?.clone();
    let mut positions = Vec::with_capacity(schema.columns().len());
    for (name, _) in schema.columns() {
        let pos = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("missing column '{name}' in CSV header")))?;
        positions.push(pos);
    }

    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); schema.columns().len()];
    let mut codebook: HashMap<String, Vec<String>> = HashMap::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record = record?;
        for (col_idx, (name, kind)) in schema.columns().iter().enumerate() {
            let raw = record.get(positions[col_idx]).ok_or_else(|| Error::Parse {
                row: row_idx + 1,
                column: name.clone(),
                message: "row has too few fields".into(),
            })?;
            let value = match raw.trim().parse::<f64>() {
                Ok(v) if v.is_finite() => v,
                Ok(_) => {
                    return Err(Error::Parse {
                        row: row_idx + 1,
                        column: name.clone(),
                        message: "non-finite value".into(),
                    })
                }
                Err(_) if *kind == ColumnKind::SensitiveCategorical => {
                    let labels = codebook.entry(name.clone()).or_default();
                    let code = match labels.iter().position(|l| l == raw) {
                        Some(c) => c,
                        None => {
                            labels.push(raw.to_string());
                            labels.len() - 1
                        }
                    };
                    code as f64
                }
                Err(e) => {
                    return Err(Error::Parse {
                        row: row_idx + 1,
                        column: name.clone(),
                        message: e.to_string(),
                    })
                }
            };
            columns[col_idx].push(value);
        }
    }
    if columns.first().map_or(0, |c| c.len()) == 0 {
        return Err(Error::EmptyData(format!(
            "{} has no data rows",
            path.as_ref().display()
        )));
    }
    Dataset::with_codebook(schema.clone(), columns, codebook)
}

/// Per-column `(mean, stddev)` pairs fit on one dataset and applied to
/// another, so test rows are scaled with training statistics only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationParams {
    /// `(column, mean, stddev)` triples, stddev > 0.
    pub params: Vec<(String, f64, f64)>,
}

/// Fit per-column mean and population (1/n) standard deviation. Constant
/// columns get stddev 1 so applying the transform maps them to all-zero.
pub fn fit_standardizer(ds: &Dataset, columns: &[String]) -> Result<StandardizationParams> {
    let mut params = Vec::with_capacity(columns.len());
    for name in columns {
        let col = ds.column(name)?;
        let n = col.len() as f64;
        let mean = col.iter().sum::<f64>() / n;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let stddev = if var > 0.0 { var.sqrt() } else { 1.0 };
        params.push((name.clone(), mean, stddev));
    }
    Ok(StandardizationParams { params })
}

/// Replace each listed column by `(x - mean) / stddev`; other columns are
/// untouched.
pub fn apply_standardizer(ds: &Dataset, params: &StandardizationParams) -> Result<Dataset> {
    let mut out = ds.clone();
    for (name, mean, stddev) in &params.params {
        let idx = out
            .schema
            .columns()
            .iter()
            .position(|(n, _)| n == name)
            .ok_or_else(|| Error::UnknownColumn(name.clone()))?;
        for v in &mut out.columns[idx] {
            *v = (*v - mean) / stddev;
        }
    }
    Ok(out)
}

/// Disjoint row partition with `round(train_fraction * n_rows)` training
/// rows. Shuffles with ChaCha8 keyed by `seed`.
pub fn split(ds: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train_fraction must lie in (0,1), got {train_fraction}"
        )));
    }
    if ds.n_rows() < 2 {
        return Err(Error::InvalidArgument(
            "split requires at least 2 rows".into(),
        ));
    }
    let mut indices: Vec<usize> = (0..ds.n_rows()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);
    let mut train_size = (train_fraction * ds.n_rows() as f64).round() as usize;
    // keep both sides nonempty
    train_size = train_size.clamp(1, ds.n_rows() - 1);
    let train = ds.select_rows(&indices[..train_size])?;
    let test = ds.select_rows(&indices[train_size..])?;
    Ok((train, test))
}

//! Command-line harness: synthetic data generation, weight computation,
//! experiment runs, and scoring of externally produced predictions.
//!
//! Exit codes: 0 on success, 1 on usage errors (bad flags, missing or
//! malformed config files), 2 on data errors (unparseable cells, schema
//! mismatches, degenerate inputs).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};

use fairreg::data::{load_csv, ColumnKind, Schema};
use fairreg::density::{DensityEstimatorSpec, DEFAULT_BANDWIDTH, DEFAULT_RADIUS};
use fairreg::experiment::{
    result_to_csv, result_to_markdown, run_experiment, score_predictions, ExperimentConfig, Task,
};
use fairreg::metrics::MetricReport;
use fairreg::reweighing::{fair_reweigh, WeighingConfig};
use fairreg::synth::{generate_jump, SynthSpec};
use fairreg::Error;

#[derive(Parser)]
#[command(name = "fairreg", version, about = "Fair-regression toolkit: density-based reweighing and separation metrics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimatorArg {
    Frequency,
    Neighbor,
    Kernel,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
    Md,
}

#[derive(Clone, Copy, ValueEnum)]
enum TaskArg {
    Regression,
    Classification,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic vertical-jump dataset (CSV + schema JSON).
    Synth {
        /// Number of rows.
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Output CSV path; the schema lands next to it as
        /// `<stem>.schema.json`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute sample weights for a dataset and write them as CSV.
    Weigh {
        /// Data CSV path.
        #[arg(long)]
        data: PathBuf,
        /// Schema config JSON path.
        #[arg(long)]
        schema: PathBuf,
        #[arg(long, value_enum, default_value_t = EstimatorArg::Kernel)]
        estimator: EstimatorArg,
        /// Radius for the neighbor estimator.
        #[arg(long)]
        radius: Option<f64>,
        /// Bandwidth for the kernel estimator.
        #[arg(long)]
        bandwidth: Option<f64>,
        /// Sensitive columns (comma separated); all schema sensitive
        /// columns when omitted.
        #[arg(long, value_delimiter = ',')]
        sensitive: Option<Vec<String>>,
        /// Skip standardization before density fitting.
        #[arg(long)]
        no_standardize: bool,
        /// Emit raw (unnormalized) weights.
        #[arg(long)]
        no_normalize: bool,
        /// Output CSV path (`index,weight` rows).
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a full experiment from a JSON config.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        /// Report output path; stdout summary is always printed.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Score externally produced predictions. The CSV must contain every
    /// schema column plus a `prediction` column.
    Metrics {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        #[arg(long, value_enum, default_value_t = TaskArg::Regression)]
        task: TaskArg,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };

    // FAIRREG_THREADS caps the rayon pool used for density evaluations
    if let Ok(threads) = std::env::var("FAIRREG_THREADS") {
        if let Ok(threads) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build_global();
        }
    }

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// Usage problems (missing files, malformed JSON, bad arguments) exit 1;
/// malformed or degenerate data exits 2.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(_) | Error::Json(_) | Error::InvalidArgument(_) => 1,
        _ => 2,
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Synth { n, seed, out } => synth(n, seed, &out),
        Command::Weigh {
            data,
            schema,
            estimator,
            radius,
            bandwidth,
            sensitive,
            no_standardize,
            no_normalize,
            out,
        } => weigh(
            &data,
            &schema,
            estimator,
            radius,
            bandwidth,
            sensitive,
            no_standardize,
            no_normalize,
            &out,
        ),
        Command::Experiment {
            config,
            out,
            format,
        } => experiment(&config, out.as_deref(), format),
        Command::Metrics {
            pred,
            schema,
            task,
            out,
            format,
        } => metrics(&pred, &schema, task, out.as_deref(), format),
    }
}

fn schema_sidecar(out: &Path) -> PathBuf {
    out.with_extension("schema.json")
}

fn synth(n: usize, seed: u64, out: &Path) -> Result<(), Error> {
    let ds = generate_jump(SynthSpec { n, seed })?;
    ds.write_csv(out)?;
    let schema_path = schema_sidecar(out);
    std::fs::write(&schema_path, ds.schema().to_config_json())?;
    println!(
        "wrote {n} rows to {} (schema: {})",
        out.display(),
        schema_path.display()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn weigh(
    data: &Path,
    schema: &Path,
    estimator: EstimatorArg,
    radius: Option<f64>,
    bandwidth: Option<f64>,
    sensitive: Option<Vec<String>>,
    no_standardize: bool,
    no_normalize: bool,
    out: &Path,
) -> Result<(), Error> {
    let schema = Schema::from_config_path(schema)?;
    let ds = load_csv(data, &schema)?;
    let estimator = match estimator {
        EstimatorArg::Frequency => DensityEstimatorSpec::Frequency,
        EstimatorArg::Neighbor => DensityEstimatorSpec::RadiusNeighbor {
            radius: radius.unwrap_or(DEFAULT_RADIUS),
        },
        EstimatorArg::Kernel => DensityEstimatorSpec::Kernel {
            bandwidth: bandwidth.unwrap_or(DEFAULT_BANDWIDTH),
        },
    };
    let cfg = WeighingConfig {
        sensitive: sensitive.unwrap_or_else(|| schema.sensitive_names()),
        target: schema.target().to_string(),
        estimator,
        standardize_before_density: !no_standardize,
        normalize_weights: !no_normalize,
    };
    let result = fair_reweigh(&ds, &cfg)?;
    let mut text = String::from("index,weight\n");
    for (i, w) in result.weights.iter().enumerate() {
        text.push_str(&format!("{i},{w}\n"));
    }
    std::fs::write(out, text)?;
    if result.capped_rows > 0 {
        eprintln!(
            "warning: {} rows hit the weight cap (floored denominator density)",
            result.capped_rows
        );
    }
    println!("wrote {} weights to {}", result.weights.len(), out.display());
    Ok(())
}

fn experiment(config: &Path, out: Option<&Path>, format: Format) -> Result<(), Error> {
    let text = std::fs::read_to_string(config)?;
    let cfg = ExperimentConfig::from_json(&text)?;
    let result = run_experiment(&cfg)?;
    let rendered = match format {
        Format::Json => serde_json::to_string_pretty(&result).map_err(Error::from)?,
        Format::Csv => result_to_csv(&result),
        Format::Md => result_to_markdown(&treatment_label(&cfg), &result),
    };
    match out {
        Some(path) => {
            std::fs::write(path, &rendered)?;
            println!("{}", result_to_markdown(&treatment_label(&cfg), &result));
            println!("report written to {}", path.display());
        }
        None => println!("{rendered}"),
    }
    Ok(())
}

fn treatment_label(cfg: &ExperimentConfig) -> String {
    use fairreg::experiment::Treatment;
    match &cfg.treatment {
        Treatment::None => "None".to_string(),
        Treatment::FairReweighing { estimator, .. } => match estimator {
            Some(DensityEstimatorSpec::Frequency) => "FairReweighing (Frequency)".into(),
            Some(DensityEstimatorSpec::RadiusNeighbor { .. }) => "FairReweighing (Neighbor)".into(),
            _ => "FairReweighing (Kernel)".into(),
        },
        Treatment::ClassicReweighing { .. } => "Reweighing".to_string(),
    }
}

fn metrics(
    pred: &Path,
    schema: &Path,
    task: TaskArg,
    out: Option<&Path>,
    format: Format,
) -> Result<(), Error> {
    let base = Schema::from_config_path(schema)?;
    let mut columns = base.columns().to_vec();
    columns.push(("prediction".to_string(), ColumnKind::Feature));
    let extended = Schema::new(columns)?;
    let ds = load_csv(pred, &extended)?;
    let predictions = ds.column("prediction")?.to_vec();
    let task = match task {
        TaskArg::Regression => Task::Regression,
        TaskArg::Classification => Task::Classification,
    };
    let report = score_predictions(task, &ds, &predictions)?;
    let rendered = match format {
        Format::Json => serde_json::to_string_pretty(&report).map_err(Error::from)?,
        Format::Csv => report_to_csv(&report),
        Format::Md => report_to_markdown(&report),
    };
    match out {
        Some(path) => {
            std::fs::write(path, &rendered)?;
            println!("report written to {}", path.display());
        }
        None => println!("{rendered}"),
    }
    Ok(())
}

fn report_to_csv(report: &MetricReport) -> String {
    let mut out = String::from("metric,scope,value\n");
    for (key, value) in &report.overall {
        out.push_str(&format!("{key},overall,{value}\n"));
    }
    for (attr, sub) in &report.per_attribute {
        for (key, value) in sub {
            out.push_str(&format!("{key},{attr},{value}\n"));
        }
    }
    out
}

fn report_to_markdown(report: &MetricReport) -> String {
    let mut out = String::from("| metric | scope | value |\n|---|---|---|\n");
    for (key, value) in &report.overall {
        out.push_str(&format!("| {key} | overall | {value:.4} |\n"));
    }
    for (attr, sub) in &report.per_attribute {
        for (key, value) in sub {
            out.push_str(&format!("| {key} | {attr} | {value:.4} |\n"));
        }
    }
    out
}

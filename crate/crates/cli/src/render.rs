//! CSV and JSON renderings. CSV writes an infinite value as `---`; JSON
//! writes it as `null`. Thresholds are shown with two decimals, and JSON
//! carries the unrounded value alongside.

use serde::Serialize;

use crate::{BreakdownRow, CliError, CliResult, EssReport, ExperimentConfig, OutputFormat, Table1Row, TableRow};

pub const INFINITY_MARK: &str = "---";

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

fn csv_number(v: f64) -> String {
    if v.is_infinite() {
        INFINITY_MARK.to_string()
    } else {
        format!("{v}")
    }
}

fn csv_threshold(v: f64) -> String {
    if v.is_infinite() {
        INFINITY_MARK.to_string()
    } else {
        format!("{v:.2}")
    }
}

fn round2(v: f64) -> Option<f64> {
    finite(v).map(|x| format!("{x:.2}").parse().unwrap())
}

fn write_csv<R: Serialize>(records: impl IntoIterator<Item = R>) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(r).map_err(|e| CliError::Output(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Output(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Output(e.to_string()))
}

#[derive(Serialize)]
struct JsonReport<'a, R: Serialize> {
    config: &'a ExperimentConfig,
    rows: Vec<R>,
}

fn write_json<R: Serialize>(cfg: &ExperimentConfig, rows: Vec<R>) -> CliResult<String> {
    let mut s = serde_json::to_string_pretty(&JsonReport { config: cfg, rows })
        .map_err(|e| CliError::Output(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

#[derive(Serialize)]
struct CsvRow<'a> {
    row_label: &'a str,
    metric: &'static str,
    divergence: String,
    divergence_method: &'static str,
    divergence_stderr: String,
    threshold: String,
    necessary_n_integer: String,
    epsilon: f64,
    delta: f64,
    seed: u64,
}

#[derive(Serialize)]
struct JsonRow<'a> {
    row_label: &'a str,
    metric: &'static str,
    divergence: Option<f64>,
    divergence_method: &'static str,
    divergence_stderr: Option<f64>,
    divergence_samples: Option<u64>,
    threshold: Option<f64>,
    threshold_exact: Option<f64>,
    necessary_n_integer: Option<u64>,
    epsilon: f64,
    delta: f64,
    seed: u64,
}

pub fn table(cfg: &ExperimentConfig, rows: &[TableRow]) -> CliResult<String> {
    match cfg.output_format {
        OutputFormat::Csv => write_csv(rows.iter().map(|r| CsvRow {
            row_label: &r.row_label,
            metric: r.metric.short_name(),
            divergence: csv_number(r.divergence.value),
            divergence_method: r.divergence.method.as_str(),
            divergence_stderr: r.divergence.std_error.map(csv_number).unwrap_or_default(),
            threshold: csv_threshold(r.threshold),
            necessary_n_integer: r
                .necessary_n_integer()
                .map(|n| n.to_string())
                .unwrap_or_else(|| INFINITY_MARK.to_string()),
            epsilon: r.epsilon,
            delta: r.delta,
            seed: r.seed,
        })),
        OutputFormat::Json => write_json(
            cfg,
            rows.iter()
                .map(|r| JsonRow {
                    row_label: &r.row_label,
                    metric: r.metric.short_name(),
                    divergence: finite(r.divergence.value),
                    divergence_method: r.divergence.method.as_str(),
                    divergence_stderr: r.divergence.std_error,
                    divergence_samples: r.divergence.sample_count,
                    threshold: round2(r.threshold),
                    threshold_exact: finite(r.threshold),
                    necessary_n_integer: r.necessary_n_integer(),
                    epsilon: r.epsilon,
                    delta: r.delta,
                    seed: r.seed,
                })
                .collect(),
        ),
    }
}

#[derive(Serialize)]
struct Table1Record {
    metric: &'static str,
    n: u64,
    epsilon: f64,
    generic: f64,
    symbolic: f64,
    abs_deviation: f64,
}

pub fn table1(cfg: &ExperimentConfig, rows: &[Table1Row]) -> CliResult<String> {
    let records = rows.iter().map(|r| Table1Record {
        metric: r.metric.short_name(),
        n: r.n,
        epsilon: r.epsilon,
        generic: r.generic,
        symbolic: r.symbolic,
        abs_deviation: r.abs_deviation,
    });
    match cfg.output_format {
        OutputFormat::Csv => write_csv(records),
        OutputFormat::Json => write_json(cfg, records.collect()),
    }
}

#[derive(Serialize)]
struct BreakdownRecord {
    metric: &'static str,
    divergence: f64,
    threshold: String,
    n_particles: u64,
    below_threshold: bool,
    replicates: u64,
    failure_count: u64,
    failure_frequency: f64,
    condition_i_violations: u64,
    condition_ii_violations: u64,
    overflow_count: u64,
    epsilon: f64,
    delta: f64,
    seed: u64,
}

#[derive(Serialize)]
struct BreakdownJson<'a> {
    metric: &'static str,
    divergence: f64,
    threshold: Option<f64>,
    threshold_exact: Option<f64>,
    below_threshold: bool,
    #[serde(flatten)]
    report: &'a isbound::BreakdownReport,
}

pub fn breakdown(cfg: &ExperimentConfig, rows: &[BreakdownRow]) -> CliResult<String> {
    match cfg.output_format {
        OutputFormat::Csv => write_csv(rows.iter().map(|r| BreakdownRecord {
            metric: r.metric.short_name(),
            divergence: r.divergence,
            threshold: csv_threshold(r.threshold),
            n_particles: r.report.n_particles,
            below_threshold: r.below_threshold,
            replicates: r.report.replicates,
            failure_count: r.report.failure_count,
            failure_frequency: r.report.failure_frequency,
            condition_i_violations: r.report.condition_i_violations,
            condition_ii_violations: r.report.condition_ii_violations,
            overflow_count: r.report.overflow_count,
            epsilon: r.report.budget.epsilon,
            delta: r.report.budget.delta,
            seed: cfg.seed,
        })),
        OutputFormat::Json => write_json(
            cfg,
            rows.iter()
                .map(|r| BreakdownJson {
                    metric: r.metric.short_name(),
                    divergence: r.divergence,
                    threshold: round2(r.threshold),
                    threshold_exact: finite(r.threshold),
                    below_threshold: r.below_threshold,
                    report: &r.report,
                })
                .collect(),
        ),
    }
}

pub fn ess(cfg: &ExperimentConfig, report: &EssReport) -> CliResult<String> {
    match cfg.output_format {
        OutputFormat::Csv => write_csv([report]),
        OutputFormat::Json => write_json(cfg, vec![report]),
    }
}

//! Table reproduction, bound reports and sampling experiments behind the
//! `isbound` binary.

use serde::Serialize;

use isbound::bounds::{self, u_f_eps, u_f_symbolic};
use isbound::gaussian::{self, make_gaussian_model, mc_divergence, quadrature_divergence};
use isbound::rng::derive_seed;
use isbound::sampling::{breakdown_probability, ess_chi2, ess_kl, normalized_weights, sample_particles};
use isbound::{BreakdownReport, DivergenceKind, DivergenceValue, Gaussian1D, QuadratureSpec, ToleranceBudget};

pub mod render;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(#[from] isbound::Error),
    #[error("output error: {0}")]
    Output(String),
}

impl CliError {
    /// 2 for configuration problems, 1 for everything that fails while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) | CliError::Output(_) => 1,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Table1,
    Table2,
    Table3,
    Bounds,
    Breakdown,
    Ess,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DivergenceMethod {
    ClosedForm,
    Quadrature,
    /// KL and Hellinger in closed form, `χ²` and TV by Monte Carlo.
    MonteCarlo,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MetricSelection {
    All,
    One(DivergenceKind),
}

impl Serialize for MetricSelection {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            MetricSelection::All => s.serialize_str("all"),
            MetricSelection::One(k) => s.serialize_str(k.short_name()),
        }
    }
}

impl std::str::FromStr for MetricSelection {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s.eq_ignore_ascii_case("all") {
            return Ok(MetricSelection::All);
        }
        s.parse::<DivergenceKind>().map(MetricSelection::One).map_err(|e| e.to_string())
    }
}

impl MetricSelection {
    pub fn kinds(self) -> Vec<DivergenceKind> {
        match self {
            MetricSelection::All => DivergenceKind::ALL.to_vec(),
            MetricSelection::One(k) => vec![k],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub command: Command,
    pub target_mean: f64,
    pub target_variance: f64,
    pub proposal_mean: f64,
    pub proposal_variance: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub metric: MetricSelection,
    pub mc_samples: u64,
    pub n_particles: usize,
    pub replicates: u64,
    pub seed: u64,
    pub divergence_method: DivergenceMethod,
    pub output_format: OutputFormat,
    pub n_values: Vec<u64>,
    pub epsilon_values: Vec<f64>,
}

impl ExperimentConfig {
    pub fn new(command: Command) -> Self {
        ExperimentConfig {
            command,
            target_mean: 0.0,
            target_variance: 1.0,
            proposal_mean: 0.0,
            proposal_variance: 1.0,
            epsilon: 0.1,
            delta: 0.1,
            metric: MetricSelection::All,
            mc_samples: 1_000_000,
            n_particles: 100,
            replicates: 1000,
            seed: 1,
            divergence_method: DivergenceMethod::ClosedForm,
            output_format: OutputFormat::Csv,
            n_values: vec![1, 2, 4, 10, 100, 1000, 10_000],
            epsilon_values: vec![0.0, 0.1, 1.0],
        }
    }

    pub fn budget(&self) -> CliResult<ToleranceBudget> {
        ToleranceBudget::new(self.epsilon, self.delta).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn target(&self) -> CliResult<Gaussian1D> {
        Gaussian1D::new(self.target_mean, self.target_variance).map_err(|e| CliError::Config(format!("target: {e}")))
    }

    pub fn proposal(&self) -> CliResult<Gaussian1D> {
        Gaussian1D::new(self.proposal_mean, self.proposal_variance)
            .map_err(|e| CliError::Config(format!("proposal: {e}")))
    }

    pub fn validate(&self) -> CliResult<()> {
        self.budget()?;
        self.target()?;
        self.proposal()?;
        if self.divergence_method == DivergenceMethod::MonteCarlo && self.mc_samples < 2 {
            return Err(CliError::Config("--mc-samples must be at least 2".into()));
        }
        if self.n_particles == 0 {
            return Err(CliError::Config("--particles must be at least 1".into()));
        }
        if self.replicates == 0 {
            return Err(CliError::Config("--replicates must be at least 1".into()));
        }
        if self.n_values.contains(&0) {
            return Err(CliError::Config("N values must be at least 1".into()));
        }
        if self.epsilon_values.iter().any(|&e| !(e >= 0.0 && e.is_finite())) {
            return Err(CliError::Config("epsilon values must be finite and nonnegative".into()));
        }
        Ok(())
    }
}

/// One metric of one table row.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TableRow {
    pub row_label: String,
    pub metric: DivergenceKind,
    pub divergence: DivergenceValue,
    pub threshold: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub seed: u64,
}

impl TableRow {
    pub fn necessary_n_integer(&self) -> Option<u64> {
        bounds::threshold_to_integer(self.threshold)
    }
}

fn metric_index(kind: DivergenceKind) -> u64 {
    DivergenceKind::ALL.iter().position(|&k| k == kind).unwrap() as u64
}

/// Divergence of `target` from `proposal` by the requested route.
/// Monte Carlo rows draw from stream `derive_seed(seed, stream)`.
pub fn compute_divergence(
    kind: DivergenceKind,
    target: &Gaussian1D,
    proposal: &Gaussian1D,
    method: DivergenceMethod,
    mc_samples: u64,
    seed: u64,
    stream: u64,
) -> CliResult<DivergenceValue> {
    let exact = gaussian::closed_form(kind, target, proposal);
    Ok(match method {
        DivergenceMethod::ClosedForm => exact,
        DivergenceMethod::Quadrature => {
            quadrature_divergence(&make_gaussian_model(*target, *proposal), &kind.into(), &QuadratureSpec::default())?
        }
        DivergenceMethod::MonteCarlo => match kind {
            DivergenceKind::KullbackLeibler | DivergenceKind::SquaredHellinger => exact,
            // An MC average over a finite sample cannot see an infinite divergence.
            DivergenceKind::ChiSquared if exact.is_infinite() => exact,
            DivergenceKind::ChiSquared | DivergenceKind::TotalVariation => mc_divergence(
                &make_gaussian_model(*target, *proposal),
                &kind.into(),
                mc_samples,
                derive_seed(seed, stream),
            )?,
        },
    })
}

fn threshold_for(kind: DivergenceKind, d: &DivergenceValue, budget: &ToleranceBudget) -> CliResult<f64> {
    let mut value = d.value;
    // Monte Carlo TV can land slightly above its cap.
    if let Some(max) = kind.range_max() {
        if d.method == isbound::Method::MonteCarlo {
            value = value.min(max);
        }
    }
    Ok(bounds::threshold(value, kind, budget)?)
}

fn table_rows(cfg: &ExperimentConfig, pairs: &[(String, Gaussian1D)]) -> CliResult<Vec<TableRow>> {
    cfg.validate()?;
    let budget = cfg.budget()?;
    let proposal = Gaussian1D::standard();
    let mut rows = Vec::new();
    for (i, (label, target)) in pairs.iter().enumerate() {
        for kind in cfg.metric.kinds() {
            let stream = i as u64 * 4 + metric_index(kind);
            let d = compute_divergence(kind, target, &proposal, cfg.divergence_method, cfg.mc_samples, cfg.seed, stream)?;
            rows.push(TableRow {
                row_label: label.clone(),
                metric: kind,
                threshold: threshold_for(kind, &d, &budget)?,
                divergence: d,
                epsilon: budget.epsilon,
                delta: budget.delta,
                seed: cfg.seed,
            });
        }
    }
    Ok(rows)
}

/// Mean shifts `m ∈ {2, 2.5, 3, 3.5}` with unit variance against `N(0, 1)`.
pub fn run_table2(cfg: &ExperimentConfig) -> CliResult<Vec<TableRow>> {
    let pairs: Vec<(String, Gaussian1D)> = [2.0, 2.5, 3.0, 3.5]
        .iter()
        .map(|&m| (format!("m={m}"), Gaussian1D::new(m, 1.0).unwrap()))
        .collect();
    table_rows(cfg, &pairs)
}

/// Centred targets with variances `{1e-9, 1e-4, 16, 25}` against `N(0, 1)`.
pub fn run_table3(cfg: &ExperimentConfig) -> CliResult<Vec<TableRow>> {
    let pairs: Vec<(String, Gaussian1D)> = [("1e-9", 1e-9), ("1e-4", 1e-4), ("16", 16.0), ("25", 25.0)]
        .iter()
        .map(|&(label, v)| (format!("sigma2={label}"), Gaussian1D::new(0.0, v).unwrap()))
        .collect();
    table_rows(cfg, &pairs)
}

/// Thresholds for the configured target/proposal pair.
pub fn run_bounds(cfg: &ExperimentConfig) -> CliResult<Vec<TableRow>> {
    cfg.validate()?;
    let budget = cfg.budget()?;
    let (target, proposal) = (cfg.target()?, cfg.proposal()?);
    let label = format!(
        "N({},{})||N({},{})",
        cfg.target_mean, cfg.target_variance, cfg.proposal_mean, cfg.proposal_variance
    );
    cfg.metric
        .kinds()
        .into_iter()
        .map(|kind| {
            let d = compute_divergence(kind, &target, &proposal, cfg.divergence_method, cfg.mc_samples, cfg.seed, metric_index(kind))?;
            Ok(TableRow {
                row_label: label.clone(),
                metric: kind,
                threshold: threshold_for(kind, &d, &budget)?,
                divergence: d,
                epsilon: budget.epsilon,
                delta: budget.delta,
                seed: cfg.seed,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Table1Row {
    pub metric: DivergenceKind,
    pub n: u64,
    pub epsilon: f64,
    pub generic: f64,
    pub symbolic: f64,
    pub abs_deviation: f64,
}

/// Generic bound `(f((1+ε)N) + (N−1)f(0))/N` next to its simplified form.
pub fn run_table1(n_values: &[u64], epsilon_values: &[f64], metrics: &[DivergenceKind]) -> CliResult<Vec<Table1Row>> {
    let mut rows = Vec::new();
    for &kind in metrics {
        for &epsilon in epsilon_values {
            for &n in n_values {
                let generic = u_f_eps(n, epsilon, &kind.into()).map_err(|e| CliError::Config(e.to_string()))?;
                let symbolic = u_f_symbolic(kind, n, epsilon).map_err(|e| CliError::Config(e.to_string()))?;
                rows.push(Table1Row {
                    metric: kind,
                    n,
                    epsilon,
                    generic,
                    symbolic,
                    abs_deviation: (generic - symbolic).abs(),
                });
            }
        }
    }
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BreakdownRow {
    pub metric: DivergenceKind,
    pub divergence: f64,
    pub threshold: f64,
    pub below_threshold: bool,
    pub report: BreakdownReport,
}

/// Breakdown experiment for every selected metric with a finite divergence.
///
/// The exact divergence comes from the closed form (or quadrature when
/// selected). Asking for `χ²` alone when it is infinite is a configuration
/// error; with `--metric all` such metrics are skipped.
pub fn run_breakdown(cfg: &ExperimentConfig) -> CliResult<Vec<BreakdownRow>> {
    cfg.validate()?;
    if cfg.divergence_method == DivergenceMethod::MonteCarlo {
        return Err(CliError::Config(
            "breakdown compares against an exact divergence; use --method closed or quadrature".into(),
        ));
    }
    let budget = cfg.budget()?;
    let (target, proposal) = (cfg.target()?, cfg.proposal()?);
    let model = make_gaussian_model(target, proposal);
    let mut rows = Vec::new();
    for kind in cfg.metric.kinds() {
        let d = compute_divergence(kind, &target, &proposal, cfg.divergence_method, 0, cfg.seed, 0)?;
        if d.is_infinite() {
            if cfg.metric == MetricSelection::One(kind) {
                return Err(CliError::Config(format!(
                    "{kind} divergence is infinite for this pair; the breakdown experiment needs a finite value"
                )));
            }
            continue;
        }
        let threshold = bounds::threshold(d.value, kind, &budget)?;
        let report = breakdown_probability(
            &model,
            &kind.into(),
            d.value,
            cfg.n_particles,
            &budget,
            cfg.replicates,
            derive_seed(cfg.seed, metric_index(kind)),
        )?;
        rows.push(BreakdownRow {
            metric: kind,
            divergence: d.value,
            threshold,
            below_threshold: (cfg.n_particles as f64) < threshold,
            report,
        });
    }
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EssReport {
    pub n_particles: usize,
    pub total_mass: f64,
    pub ess_kl: f64,
    pub ess_chi2: f64,
    pub seed: u64,
}

/// Effective sample sizes of one particle set.
pub fn run_ess(cfg: &ExperimentConfig) -> CliResult<EssReport> {
    cfg.validate()?;
    let model = make_gaussian_model(cfg.target()?, cfg.proposal()?);
    let measure = sample_particles(&model, cfg.n_particles, cfg.seed)?;
    let w = normalized_weights(&measure)?;
    Ok(EssReport {
        n_particles: measure.len(),
        total_mass: measure.total_mass(),
        ess_kl: ess_kl(&w),
        ess_chi2: ess_chi2(&w),
        seed: cfg.seed,
    })
}

/// Runs the configured command and renders its report.
pub fn run(cfg: &ExperimentConfig) -> CliResult<String> {
    cfg.validate()?;
    match cfg.command {
        Command::Table1 => {
            let rows = run_table1(&cfg.n_values, &cfg.epsilon_values, &cfg.metric.kinds())?;
            render::table1(cfg, &rows)
        }
        Command::Table2 => render::table(cfg, &run_table2(cfg)?),
        Command::Table3 => render::table(cfg, &run_table3(cfg)?),
        Command::Bounds => render::table(cfg, &run_bounds(cfg)?),
        Command::Breakdown => render::breakdown(cfg, &run_breakdown(cfg)?),
        Command::Ess => render::ess(cfg, &run_ess(cfg)?),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn find(rows: &[TableRow], label: &str, kind: DivergenceKind) -> f64 {
        rows.iter().find(|r| r.row_label == label && r.metric == kind).unwrap().threshold
    }

    #[test]
    fn table2_closed_form() {
        let rows = run_table2(&ExperimentConfig::new(Command::Table2)).unwrap();
        assert_eq!(rows.len(), 16);
        assert!((find(&rows, "m=2", DivergenceKind::KullbackLeibler) - 5.11).abs() < 0.005);
        assert!((find(&rows, "m=3.5", DivergenceKind::SquaredHellinger) - 11.00).abs() < 0.005);
        assert!((find(&rows, "m=2", DivergenceKind::ChiSquared) - 45.21).abs() < 0.005);
    }

    #[test]
    fn table3_closed_form() {
        let rows = run_table3(&ExperimentConfig::new(Command::Table3)).unwrap();
        assert!((find(&rows, "sigma2=1e-4", DivergenceKind::KullbackLeibler) - 34.67).abs() < 0.005);
        assert!((find(&rows, "sigma2=1e-9", DivergenceKind::SquaredHellinger) - 94.39).abs() < 0.005);
        assert!(find(&rows, "sigma2=16", DivergenceKind::ChiSquared).is_infinite());
    }

    #[test]
    fn table1_examples() {
        let rows = run_table1(&[1, 4, 10], &[0.0, 0.1], &DivergenceKind::ALL).unwrap();
        let get = |k, n, e: f64| rows.iter().find(|r| r.metric == k && r.n == n && r.epsilon == e).unwrap().generic;
        assert!((get(DivergenceKind::TotalVariation, 10, 0.1) - 0.95).abs() < 1e-12);
        assert!((get(DivergenceKind::SquaredHellinger, 4, 0.0) - 1.0).abs() < 1e-12);
        for k in DivergenceKind::ALL {
            assert_eq!(get(k, 1, 0.0), 0.0);
        }
    }

    #[test]
    fn breakdown_refuses_infinite_chi2() {
        let mut cfg = ExperimentConfig::new(Command::Breakdown);
        cfg.target_variance = 4.0;
        cfg.metric = MetricSelection::One(DivergenceKind::ChiSquared);
        let err = run_breakdown(&cfg).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        cfg.metric = MetricSelection::All;
        cfg.replicates = 10;
        let rows = run_breakdown(&cfg).unwrap();
        assert_eq!(rows.len(), 3);
    }

    #[test]
    fn breakdown_identical_pair() {
        let mut cfg = ExperimentConfig::new(Command::Breakdown);
        cfg.replicates = 50;
        for row in run_breakdown(&cfg).unwrap() {
            assert_eq!(row.report.failure_frequency, 0.0);
        }
    }

    #[test]
    fn ess_identical_and_heavy() {
        let cfg = ExperimentConfig::new(Command::Ess);
        let r = run_ess(&cfg).unwrap();
        assert!((r.ess_kl - 100.0).abs() < 1e-9 && (r.ess_chi2 - 100.0).abs() < 1e-9);
        let mut heavy = cfg.clone();
        heavy.target_mean = 3.0;
        let r = run_ess(&heavy).unwrap();
        assert!(r.ess_chi2 <= r.ess_kl && r.ess_kl <= 100.0);
    }

    #[test]
    fn ess_degenerate_two_particles() {
        // With N = 2 and a far target, one weight dominates.
        let mut cfg = ExperimentConfig::new(Command::Ess);
        cfg.target_mean = 8.0;
        cfg.n_particles = 2;
        let r = run_ess(&cfg).unwrap();
        assert!(r.ess_kl < 1.01 && r.ess_chi2 < 1.01, "{r:?}");
    }

    #[test]
    fn invalid_config_is_exit_two() {
        let mut cfg = ExperimentConfig::new(Command::Bounds);
        cfg.target_variance = 0.0;
        assert_eq!(run(&cfg).unwrap_err().exit_code(), 2);
        let mut cfg = ExperimentConfig::new(Command::Table2);
        cfg.epsilon = -1.0;
        assert_eq!(run(&cfg).unwrap_err().exit_code(), 2);
    }
}

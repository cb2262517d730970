use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use isbound_cli::{run, CliError, Command, DivergenceMethod, ExperimentConfig, MetricSelection, OutputFormat};

#[derive(Parser, Debug)]
#[command(name = "isbound", version, about = "Necessary sample sizes for importance sampling")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    #[arg(long, global = true, default_value_t = 0.0, allow_negative_numbers = true)]
    target_mean: f64,
    #[arg(long, global = true, default_value_t = 1.0)]
    target_var: f64,
    #[arg(long, global = true, default_value_t = 0.0, allow_negative_numbers = true)]
    proposal_mean: f64,
    #[arg(long, global = true, default_value_t = 1.0)]
    proposal_var: f64,

    /// Mass tolerance for condition i.
    #[arg(long, global = true, default_value_t = 0.1, allow_negative_numbers = true)]
    eps: f64,
    /// Divergence tolerance for condition ii.
    #[arg(long, global = true, default_value_t = 0.1, allow_negative_numbers = true)]
    delta: f64,

    /// kl, chi2, tv, hellinger or all.
    #[arg(long, global = true, default_value = "all")]
    metric: MetricSelection,
    #[arg(long, global = true, value_enum, default_value_t = MethodArg::Closed)]
    method: MethodArg,
    #[arg(long, global = true, default_value_t = 1_000_000)]
    mc_samples: u64,
    #[arg(long, global = true, default_value_t = 100)]
    particles: usize,
    #[arg(long, global = true, default_value_t = 1000)]
    replicates: u64,
    #[arg(long, global = true, env = "ISBOUND_SEED", default_value_t = 1)]
    seed: u64,

    #[arg(long, global = true, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug, Clone)]
enum Cmd {
    /// Generic bound against its simplified form.
    Table1 {
        /// Comma-separated sample sizes.
        #[arg(long, value_delimiter = ',', default_values_t = [1u64, 2, 4, 10, 100, 1000, 10_000])]
        n_values: Vec<u64>,
        /// Comma-separated mass tolerances.
        #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.1, 1.0])]
        eps_values: Vec<f64>,
    },
    /// Thresholds for mean-shifted targets.
    Table2,
    /// Thresholds for rescaled targets.
    Table3,
    /// Thresholds for the configured pair.
    Bounds,
    /// Replicated two-condition failure experiment.
    Breakdown,
    /// Effective sample sizes of one particle set.
    Ess,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum MethodArg {
    #[value(alias = "closed-form", alias = "closed_form")]
    Closed,
    Quadrature,
    #[value(alias = "monte-carlo", alias = "monte_carlo")]
    Mc,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum FormatArg {
    Csv,
    Json,
}

impl Cli {
    fn config(&self) -> ExperimentConfig {
        let command = match self.command {
            Cmd::Table1 { .. } => Command::Table1,
            Cmd::Table2 => Command::Table2,
            Cmd::Table3 => Command::Table3,
            Cmd::Bounds => Command::Bounds,
            Cmd::Breakdown => Command::Breakdown,
            Cmd::Ess => Command::Ess,
        };
        let mut cfg = ExperimentConfig::new(command);
        cfg.target_mean = self.target_mean;
        cfg.target_variance = self.target_var;
        cfg.proposal_mean = self.proposal_mean;
        cfg.proposal_variance = self.proposal_var;
        cfg.epsilon = self.eps;
        cfg.delta = self.delta;
        cfg.metric = self.metric;
        cfg.mc_samples = self.mc_samples;
        cfg.n_particles = self.particles;
        cfg.replicates = self.replicates;
        cfg.seed = self.seed;
        cfg.divergence_method = match self.method {
            MethodArg::Closed => DivergenceMethod::ClosedForm,
            MethodArg::Quadrature => DivergenceMethod::Quadrature,
            MethodArg::Mc => DivergenceMethod::MonteCarlo,
        };
        cfg.output_format = match self.format {
            FormatArg::Csv => OutputFormat::Csv,
            FormatArg::Json => OutputFormat::Json,
        };
        if let Cmd::Table1 { n_values, eps_values } = &self.command {
            cfg.n_values = n_values.clone();
            cfg.epsilon_values = eps_values.clone();
        }
        cfg
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = run(&cli.config()).and_then(|report| match &cli.out {
        Some(path) => std::fs::write(path, report).map_err(|e| CliError::Output(format!("{}: {e}", path.display()))),
        None => {
            print!("{report}");
            Ok(())
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("isbound: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

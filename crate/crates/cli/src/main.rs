//! `vmt-rebound`: ingest survey data, estimate VMT demand elasticities, and
//! forecast induced travel and energy rebound.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use vmt_rebound::design::ModelId;
use vmt_rebound::estimator::Correction;
use vmt_rebound::forecast::{FuelConvention, GridRange};

use crate::commands::{Context, EstimateArgs, ForecastArgs, IngestArgs};
use crate::config::{DataRoot, PathChoice, RunConfig, DATA_ROOT_ENV};
use crate::error::CliError;

#[derive(Parser)]
#[command(name = "vmt-rebound", version, about = "VMT demand elasticities and CAV energy-rebound forecasts")]
struct Cli {
    /// TOML run configuration; see config/reference.toml for every key.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the random seed for synthetic stages.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Root directory for relative input paths.
    #[arg(long, global = true, env = DATA_ROOT_ENV)]
    data_root: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum CorrectionArg {
    Cr0,
    Cr1,
}

#[derive(Clone, Copy, ValueEnum)]
enum PathArg {
    M3,
    M4,
}

#[derive(Clone, Copy, ValueEnum)]
enum ConventionArg {
    Mpg,
    EnergyIntensity,
}

#[derive(Args)]
struct ForecastInputs {
    /// Estimate JSON (from `estimate`) or a bare elasticity set.
    #[arg(long)]
    elasticities: Option<PathBuf>,
    /// Separate-price (m3) or combined-price (m4) forecast.
    #[arg(long, value_enum)]
    path: Option<PathArg>,
    /// Baseline cost shares JSON for the combined-price path.
    #[arg(long)]
    shares: Option<PathBuf>,
    /// Forecast one income group instead of the overall sample.
    #[arg(long)]
    group: Option<u8>,
    #[arg(long, value_enum)]
    fuel_convention: Option<ConventionArg>,
}

#[derive(Subcommand)]
enum Command {
    /// Join and filter raw survey tables into a canonical household table.
    Ingest {
        #[arg(long)]
        households: Option<PathBuf>,
        #[arg(long)]
        vehicles: Option<PathBuf>,
        #[arg(long)]
        trips: Option<PathBuf>,
        #[arg(long)]
        epa: Option<PathBuf>,
        /// Column mapping (TOML or JSON); defaults to the config's [schema].
        #[arg(long)]
        schema: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit one demand model and write the fit as JSON.
    Estimate {
        /// Directory holding households.csv, or the table itself.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model: Option<ModelId>,
        #[arg(long)]
        interact_income: bool,
        /// base, s1 or s2.
        #[arg(long)]
        ttc_scenario: Option<String>,
        /// Control blocks: all, none, or a comma list of members, socioeconomic, location, timing.
        #[arg(long)]
        controls: Option<String>,
        #[arg(long, value_enum)]
        correction: Option<CorrectionArg>,
        /// Also export the design matrix as CSV.
        #[arg(long)]
        design_csv: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sweep induced travel over a fuel-economy by time-cost grid.
    Forecast {
        #[command(flatten)]
        inputs: ForecastInputs,
        #[arg(long)]
        x_min: Option<f64>,
        #[arg(long)]
        x_max: Option<f64>,
        #[arg(long)]
        y_min: Option<f64>,
        #[arg(long)]
        y_max: Option<f64>,
        #[arg(long)]
        step: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Break-even time-cost reduction for one fuel-economy gain.
    Frontier {
        #[command(flatten)]
        inputs: ForecastInputs,
        #[arg(long)]
        x: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic household table.
    Simulate {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Monte Carlo recovery study on synthetic populations.
    McRecovery {
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        model: Option<ModelId>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Text tables from estimate files and forecast directories.
    Report {
        #[arg(long, num_args = 1..)]
        estimates: Vec<PathBuf>,
        #[arg(long, num_args = 1..)]
        forecasts: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Data, every configured model, forecasts and report in one go.
    Run {
        #[arg(long)]
        out: PathBuf,
    },
}

impl ForecastInputs {
    fn into_args(self, grid: GridRange) -> ForecastArgs {
        ForecastArgs {
            elasticities: self.elasticities,
            path: self.path.map(|p| match p {
                PathArg::M3 => PathChoice::M3,
                PathArg::M4 => PathChoice::M4,
            }),
            shares: self.shares,
            group: self.group,
            grid,
            fuel_convention: self.fuel_convention.map(|c| match c {
                ConventionArg::Mpg => FuelConvention::Mpg,
                ConventionArg::EnergyIntensity => FuelConvention::EnergyIntensity,
            }),
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let cfg = RunConfig::load(cli.config.as_deref())?.with_seed(cli.seed);
    let data_root = DataRoot(cli.data_root.or_else(|| cfg.data_root.clone()));
    let ctx = Context { cfg, config_path: cli.config, data_root };
    match cli.command {
        Command::Ingest { households, vehicles, trips, epa, schema, out } => {
            commands::run_ingest(&ctx, IngestArgs { households, vehicles, trips, epa, schema, out })
        }
        Command::Estimate { data, model, interact_income, ttc_scenario, controls, correction, design_csv, out } => {
            let correction = correction.map(|c| match c {
                CorrectionArg::Cr0 => Correction::CR0,
                CorrectionArg::Cr1 => Correction::CR1,
            });
            commands::run_estimate(
                &ctx,
                EstimateArgs { data, model, interact_income, ttc_scenario, controls, correction, design_csv, out },
            )
        }
        Command::Forecast { inputs, x_min, x_max, y_min, y_max, step, out } => {
            let g = ctx.cfg.forecast.grid;
            let grid = GridRange {
                x_min: x_min.unwrap_or(g.x_min),
                x_max: x_max.unwrap_or(g.x_max),
                y_min: y_min.unwrap_or(g.y_min),
                y_max: y_max.unwrap_or(g.y_max),
                step: step.unwrap_or(g.step),
            };
            commands::run_forecast(&ctx, inputs.into_args(grid), out)
        }
        Command::Frontier { inputs, x, out } => {
            let grid = ctx.cfg.forecast.grid;
            commands::run_frontier(&ctx, inputs.into_args(grid), x, out)
        }
        Command::Simulate { n, out } => commands::run_simulate(&ctx, n, out),
        Command::McRecovery { reps, model, n, out } => commands::run_mc(&ctx, reps, model, n, out),
        Command::Report { estimates, forecasts, out } => commands::run_report(&ctx, estimates, forecasts, out),
        Command::Run { out } => commands::run_pipeline(&ctx, out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

//! Command-line entry point.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use minet_cli::run::{run_arima, run_combine, run_metrics, run_regress, run_report, run_synth, with_pool};
use minet_cli::{Overrides, RunConfig};

#[derive(Parser)]
#[command(
    name = "minet",
    about = "Hourly mutual-information stock networks: metric tables, score tables, combined predictors and ARIMA comparisons",
    version
)]
struct Cli {
    /// TOML config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Data source: directory of per-ticker csv files or one wide csv.
    #[arg(long, global = true)]
    data: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Index series name (overrides the data-directory manifest).
    #[arg(long, global = true)]
    index: Option<String>,
    /// Window length in minutes.
    #[arg(long, global = true)]
    window_length: Option<usize>,
    /// Forecast lag in windows for the change targets.
    #[arg(long, global = true)]
    lag: Option<usize>,
    /// Bin rule, e.g. equal-width-count:12 or equal-frequency:5.
    #[arg(long, global = true)]
    bin_rule: Option<String>,
    /// KLD smoothing epsilon.
    #[arg(long, global = true)]
    epsilon: Option<f64>,
    /// Mixing-constant grid resolution.
    #[arg(long, global = true)]
    grid_step: Option<f64>,
    /// Worker threads (0 = machine default).
    #[arg(long, global = true)]
    parallelism: Option<usize>,
    /// Write one MI matrix file per window.
    #[arg(long, global = true)]
    dump_mi_matrices: bool,
    /// Write one strength file per window.
    #[arg(long, global = true)]
    dump_strengths: bool,
    /// Synthetic fixture seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Synthetic fixture ticker count.
    #[arg(long, global = true)]
    tickers: Option<usize>,
    /// Synthetic fixture minute count.
    #[arg(long, global = true)]
    minutes: Option<usize>,
    /// Synthetic fixture regime count.
    #[arg(long, global = true)]
    events: Option<usize>,
    /// First regime window (0-based) of the synthetic fixture.
    #[arg(long, global = true)]
    first_event_window: Option<usize>,
    /// Windows between synthetic regimes.
    #[arg(long, global = true)]
    event_spacing: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic fixture into the data directory.
    Synth,
    /// Compute the per-window metric table and change series.
    Metrics,
    /// Score every metric against actual, squared and absolute changes.
    Regress,
    /// Optimize the configured combined predictors.
    Combine,
    /// Fit the baseline ARIMA and the exogenous variants, compare MSE.
    Arima,
    /// Run metrics, regress, combine and arima in sequence.
    Report,
}

fn overrides_of(cli: &Cli) -> Overrides {
    Overrides {
        data: cli.data.clone(),
        output: cli.output.clone(),
        index: cli.index.clone(),
        window_length: cli.window_length,
        target_lag: cli.lag,
        bin_rule: cli.bin_rule.clone(),
        epsilon: cli.epsilon,
        grid_step: cli.grid_step,
        parallelism: cli.parallelism,
        seed: cli.seed,
        tickers: cli.tickers,
        minutes: cli.minutes,
        events: cli.events,
        first_event_window: cli.first_event_window,
        event_spacing: cli.event_spacing,
        dump_mi_matrices: cli.dump_mi_matrices,
        dump_strengths: cli.dump_strengths,
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .with_writer(std::io::stderr)
        .init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };

    let config = match RunConfig::resolve(cli.config.as_deref(), &overrides_of(&cli)) {
        Ok(config) => config,
        Err(err) => {
            eprintln!("error: {err}");
            return ExitCode::from(1);
        }
    };

    let parallelism = config.parallelism;
    let result = with_pool(parallelism, || match cli.command {
        Command::Synth => run_synth(&config),
        Command::Metrics => run_metrics(&config),
        Command::Regress => run_regress(&config),
        Command::Combine => run_combine(&config),
        Command::Arima => run_arima(&config),
        Command::Report => run_report(&config),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

//! Command-line driver: single seeded runs, Monte-Carlo sweeps to CSV,
//! two-dimensional error histograms, and the verification suite.
//!
//! Exit codes: 0 success, 1 validation error, 2 infeasible schedule,
//! 3 verification failure.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use visor_core::harness::{self, verify, HeatmapConfig, RunConfig, RunMode, SweepConfig};
use visor_core::Error;

#[derive(Parser)]
#[command(name = "visor", version, about = "Variance-reduced stochastic optimization benchmark harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonOverrides {
    /// Override the config's base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's schedule mode.
    #[arg(long, value_parser = parse_mode)]
    mode: Option<RunMode>,
    /// Worker threads for trial execution (results are order-independent).
    #[arg(long)]
    parallel: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single method/instance trial and print the trial record as JSON.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: CommonOverrides,
    },
    /// Run a sweep config and emit the aggregated CSV.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the config's trial count.
        #[arg(long)]
        trials: Option<usize>,
        #[command(flatten)]
        common: CommonOverrides,
    },
    /// Run heatmap trials and emit the binned histogram CSV.
    Heatmap {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the config's trial count.
        #[arg(long)]
        trials: Option<usize>,
        #[command(flatten)]
        common: CommonOverrides,
    },
    /// Run the assumption/property Monte-Carlo suites and print a table.
    Verify {
        /// Restrict to one instance family.
        #[arg(long)]
        instance: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn parse_mode(s: &str) -> Result<RunMode, String> {
    match s {
        "theory" => Ok(RunMode::Theory),
        "experiment" => Ok(RunMode::Experiment),
        other => Err(format!("expected `theory` or `experiment`, got `{other}`")),
    }
}

fn load_config<T: serde::de::DeserializeOwned>(path: &PathBuf) -> Result<T, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de)
        .map_err(|e| format!("invalid config field `{}`: {}", e.path(), e.inner()))
}

fn emit(out: Option<PathBuf>, text: &str) -> Result<(), String> {
    match out {
        Some(path) => fs::write(&path, text).map_err(|e| format!("cannot write {}: {e}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::InfeasibleSchedule { .. } => 2,
        _ => 1,
    }
}

fn init_pool(parallel: Option<usize>) -> Result<(), String> {
    if let Some(threads) = parallel {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build_global()
            .map_err(|e| format!("cannot initialize thread pool: {e}"))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err((msg, code)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, (String, u8)> {
    match cli.command {
        Command::Run { config, out, common } => {
            init_pool(common.parallel).map_err(|m| (m, 1))?;
            let mut cfg: RunConfig = load_config(&config).map_err(|m| (m, 1))?;
            if let Some(seed) = common.seed {
                cfg.seed = seed;
            }
            if let Some(mode) = common.mode {
                cfg.mode = mode;
            }
            let record = harness::run_single(&cfg).map_err(|e| (e.to_string(), exit_code_for(&e)))?;
            let mut text = serde_json::to_string_pretty(&record).expect("trial records serialize");
            text.push('\n');
            emit(out, &text).map_err(|m| (m, 1))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep { config, out, trials, common } => {
            init_pool(common.parallel).map_err(|m| (m, 1))?;
            let mut cfg: SweepConfig = load_config(&config).map_err(|m| (m, 1))?;
            if let Some(seed) = common.seed {
                cfg.base_seed = seed;
            }
            if let Some(mode) = common.mode {
                cfg.mode = mode;
            }
            if let Some(t) = trials {
                cfg.trials = t;
            }
            let rows = harness::run_sweep(&cfg).map_err(|e| (e.to_string(), exit_code_for(&e)))?;
            emit(out, &harness::sweep_to_csv(&rows)).map_err(|m| (m, 1))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Heatmap { config, out, trials, common } => {
            init_pool(common.parallel).map_err(|m| (m, 1))?;
            let mut cfg: HeatmapConfig = load_config(&config).map_err(|m| (m, 1))?;
            if let Some(seed) = common.seed {
                cfg.base_seed = seed;
            }
            if let Some(mode) = common.mode {
                cfg.mode = mode;
            }
            if let Some(t) = trials {
                cfg.trials = t;
            }
            let grid = harness::heatmap_data(&cfg).map_err(|e| (e.to_string(), exit_code_for(&e)))?;
            emit(out, &grid.to_csv()).map_err(|m| (m, 1))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { instance, seed } => {
            let results = verify::verify_families(instance.as_deref(), seed)
                .map_err(|e| (e.to_string(), exit_code_for(&e)))?;
            print!("{}", verify::render_table(&results));
            if results.iter().all(|r| r.pass) {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::from(3))
            }
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::info;
use urllc_runner::sweep::{run, sweep, RunOptions};
use urllc_runner::{CliError, ExperimentConfig};

#[derive(Parser)]
#[command(name = "urllc", version, about = "Seeded URLLC latency/reliability experiments")]
struct Cli {
    /// Overrides the config's master seed.
    #[arg(long, global = true, env = "URLLC_SEED")]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, env = "URLLC_JOBS")]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Runs one scenario.
    Run {
        #[arg(long, env = "URLLC_CONFIG")]
        config: PathBuf,
        #[arg(long, env = "URLLC_OUT")]
        out: Option<PathBuf>,
    },
    /// Runs one point per value of a parameter.
    Sweep {
        #[arg(long, env = "URLLC_CONFIG")]
        config: PathBuf,
        /// Dotted path, e.g. `activation_prob` or `params.receiver.mpr_gamma`.
        #[arg(long)]
        param: String,
        /// Comma-separated JSON values.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<String>,
        #[arg(long, env = "URLLC_OUT")]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(CliError::Validation("--jobs must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    match cli.command {
        Command::Run { config, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let manifest = run(&cfg, &RunOptions { out_dir: out, seed: cli.seed })?;
            for o in &manifest.outputs {
                info!("{} {}", o.sha256, o.file);
            }
            println!("{} done in {:.2}s", manifest.scenario, manifest.wall_time_s);
        }
        Command::Sweep { config, param, values, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let rows = sweep(&cfg, &param, &values, &RunOptions { out_dir: out, seed: cli.seed })?;
            for r in &rows {
                println!("{} {}={} {}={}", r.output_dir, r.param, r.value, r.metric, r.metric_value);
            }
        }
    }
    Ok(())
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use reqvar_core::pipeline::{
    cmd_generate_weather, cmd_report, cmd_sweep, cmd_target, run_all, ExperimentConfig, PipelineError, RunManifest,
};

#[derive(Parser)]
#[command(name = "reqvar", about = "Weather variability study of envelope resistance estimates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment configuration (TOML).
    #[arg(long, global = true, default_value = "reqvar.toml")]
    config: PathBuf,
    /// Overrides `master_seed` from the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for the sweep; defaults to the available cores.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Keep sweep rows that already have a result file.
    #[arg(long, global = true)]
    resume: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    GenerateWeather,
    Target,
    Sweep,
    Report,
    All,
}

fn run(cli: &Cli) -> Result<(), PipelineError> {
    let mut cfg = ExperimentConfig::load(&cli.config)?;
    if let Some(seed) = cli.seed {
        cfg.master_seed = seed;
    }
    cfg.validate()?;
    let workers = cli
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if let Command::All = cli.command {
        run_all(&cfg, workers, cli.resume)?;
        return Ok(());
    }
    let mut manifest = RunManifest::open(&cfg.output_dir, &cfg.hash()?, cfg.master_seed)?;
    match cli.command {
        Command::GenerateWeather => cmd_generate_weather(&cfg, &mut manifest)?,
        Command::Target => {
            cmd_target(&cfg, &mut manifest)?;
        }
        Command::Sweep => {
            cmd_sweep(&cfg, &mut manifest, workers, cli.resume)?;
        }
        Command::Report => cmd_report(&cfg, &mut manifest)?,
        Command::All => unreachable!(),
    }
    manifest.save(&cfg.output_dir)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

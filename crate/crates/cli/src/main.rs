//! `clood`: generate the glyph dataset, train the continual-learning grid,
//! probe checkpoints and aggregate results into figure-ready CSVs.

mod commands;
mod config;
mod layout;
mod registry;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use config::ExperimentConfig;
use layout::Layout;

#[derive(Debug, Parser)]
#[command(name = "clood", version, about = "Continual-learning OOD experiments on synthetic glyphs")]
struct Cli {
    /// Experiment config (TOML, or JSON by extension). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output root; beats CLOOD_OUT and the config's out_dir.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for independent grid cells.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Replace the training seed list (and the probe seed) with this single seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Print what would be done and exit.
    #[arg(long, global = true)]
    dry_run: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render the dataset container, manifest and a sample sheet.
    Generate,
    /// Train every (T, M, seed) run of the grid, skipping completed ones.
    Train,
    /// Run the probe battery on final (and optionally per-experience) checkpoints.
    Probe,
    /// Aggregate results into report CSVs and JSON.
    Report {
        /// Results directory; the output root when omitted.
        results_dir: Option<PathBuf>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Generate => "generate",
            Command::Train => "train",
            Command::Probe => "probe",
            Command::Report { .. } => "report",
        }
    }
}

pub struct Context {
    pub config: ExperimentConfig,
    pub layout: Layout,
    pub jobs: usize,
    pub dry_run: bool,
}

fn context(cli: &Cli) -> Result<Context> {
    let mut config = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.training.seeds = vec![seed];
        config.probe.seed = seed;
    }
    config.validate()?;
    let root = cli
        .out
        .clone()
        .or_else(|| std::env::var_os("CLOOD_OUT").map(PathBuf::from))
        .or_else(|| config.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("clood_out"));
    Ok(Context {
        config,
        layout: Layout::new(root),
        jobs: cli.jobs.max(1),
        dry_run: cli.dry_run,
    })
}

fn dispatch(cli: &Cli) -> Result<()> {
    let ctx = context(cli)?;
    match &cli.command {
        Command::Generate => commands::generate::run(&ctx),
        Command::Train => commands::train::run(&ctx),
        Command::Probe => commands::probe::run(&ctx),
        Command::Report { results_dir } => {
            let dir = results_dir.clone().unwrap_or_else(|| ctx.layout.root.clone());
            commands::report::run(&dir, ctx.dry_run)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp_secs()
        .init();
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let err = serde_json::json!({
                "status": "error",
                "command": cli.command.name(),
                "message": e.to_string(),
                "causes": e.chain().skip(1).map(|c| c.to_string()).collect::<Vec<_>>(),
            });
            eprintln!("{err}");
            ExitCode::FAILURE
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use gama_core::pipeline::Preset;

mod commands;
mod config;

use commands::{Coded, Run};
use config::{resolve, Overrides};

#[derive(Parser, Debug)]
#[command(name = "gama", version, about = "Motif benchmarks for attribution-based importance profiles")]
struct Cli {
    /// JSON configuration overlaid on the preset.
    #[arg(long, global = true, env = "GAMA_CONFIG")]
    config: Option<PathBuf>,

    #[arg(long, global = true, env = "GAMA_RUN_DIR", default_value = "runs/default")]
    run_dir: PathBuf,

    #[arg(long, global = true, env = "GAMA_PRESET")]
    preset: Option<Preset>,

    /// Comma-separated condition names, e.g. AND_2-4_r1.0.
    #[arg(long, global = true, env = "GAMA_CONDITIONS", value_delimiter = ',')]
    conditions: Option<Vec<String>>,

    #[arg(long, global = true, env = "GAMA_WORKERS")]
    workers: Option<usize>,

    #[arg(long, global = true, env = "GAMA_SEED")]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Generate synthetic datasets.
    Gen,
    /// Train one model per dataset, keeping the untrained reference.
    Train,
    /// Attribute a seeded sample under both models.
    Attribute,
    /// Compute importance profiles from the stored attributions.
    Gama,
    /// Score profiles against the implanted motifs.
    Bench,
    /// Rank-correlate a profile with per-position binding energies.
    Correlate,
    /// Export frequency matrices, profiles and diagnostics.
    Report,
    /// Run gen, train, attribute, gama and bench in sequence.
    All,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Gen => "gen",
            Command::Train => "train",
            Command::Attribute => "attribute",
            Command::Gama => "gama",
            Command::Bench => "bench",
            Command::Correlate => "correlate",
            Command::Report => "report",
            Command::All => "all",
        }
    }
}

fn run(cli: &Cli) -> Result<usize> {
    let overrides = Overrides {
        preset: cli.preset,
        conditions: cli.conditions.clone(),
        workers: cli.workers,
        seed: cli.seed,
    };
    let cfg = resolve(cli.config.as_deref(), &overrides).map_err(|e| Coded {
        code: "invalid_config",
        message: format!("{e:#}"),
    })?;
    let stages: &[fn(&Run) -> Result<usize>] = match cli.command {
        Command::Gen => &[commands::cmd_gen],
        Command::Train => &[commands::cmd_train],
        Command::Attribute => &[commands::cmd_attribute],
        Command::Gama => &[commands::cmd_gama],
        Command::Bench => &[commands::cmd_bench],
        Command::Correlate => &[commands::cmd_correlate],
        Command::Report => &[commands::cmd_report],
        Command::All => &[
            commands::cmd_gen,
            commands::cmd_train,
            commands::cmd_attribute,
            commands::cmd_gama,
            commands::cmd_bench,
        ],
    };
    let mut count = 0;
    for stage in stages {
        let run = Run::open(&cli.run_dir, cfg.clone())?;
        count = stage(&run)?;
        run.finish()?;
    }
    Ok(count)
}

fn error_code(err: &anyhow::Error) -> &'static str {
    for cause in err.chain() {
        if let Some(c) = cause.downcast_ref::<Coded>() {
            return c.code;
        }
        if let Some(e) = cause.downcast_ref::<gama_core::Error>() {
            return e.code();
        }
    }
    "error"
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(count) => {
            let out = serde_json::json!({
                "status": "ok",
                "command": cli.command.name(),
                "items": count,
                "run_dir": cli.run_dir,
            });
            println!("{out}");
            ExitCode::SUCCESS
        }
        Err(err) => {
            let out = serde_json::json!({
                "status": "error",
                "command": cli.command.name(),
                "code": error_code(&err),
                "message": format!("{err:#}"),
            });
            println!("{out}");
            ExitCode::FAILURE
        }
    }
}

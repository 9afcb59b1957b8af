//! Command-line driver for the quasicontinuum experiments.
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qclab::experiment::{
    cmd_bands, cmd_continue, cmd_fracture, cmd_plan, cmd_profile, CommandError, ExperimentConfig, Outcome,
};

#[derive(Parser)]
#[command(version, about = "One-dimensional quasicontinuum experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// key = value configuration file
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(short, long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    potential: Option<String>,
    #[arg(short = 'M', global = true)]
    m: Option<String>,
    #[arg(short = 'N', global = true)]
    n: Option<String>,
    #[arg(short = 'K', global = true)]
    k: Option<String>,
    /// Full load
    #[arg(long, global = true)]
    scale: Option<String>,
    /// Contraction constant, decimal or a/b
    #[arg(long, global = true)]
    alpha: Option<String>,
    #[arg(long, global = true)]
    epsilon: Option<String>,
    #[arg(long, global = true)]
    gamma0: Option<String>,
    /// uniform, endpoint or single-step
    #[arg(long, global = true)]
    planner: Option<String>,
    #[arg(long, global = true)]
    seed: Option<String>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Potential landmarks, load limit and assumption checks
    Profile,
    /// Contraction bands around the loading response
    Bands,
    /// Full load in a single step
    Fracture,
    /// Plan and run the load continuation
    Continue,
    /// Plan only
    Plan,
}

fn config(cli: &Cli) -> Result<ExperimentConfig, CommandError> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    let flags = [
        ("potential", &cli.potential),
        ("M", &cli.m),
        ("N", &cli.n),
        ("K", &cli.k),
        ("scale", &cli.scale),
        ("alpha", &cli.alpha),
        ("epsilon", &cli.epsilon),
        ("gamma0", &cli.gamma0),
        ("planner", &cli.planner),
        ("seed", &cli.seed),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            cfg.set(key, v)?;
        }
    }
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<Outcome, CommandError> {
    let cfg = config(cli)?;
    match cli.command {
        Command::Profile => cmd_profile(&cfg),
        Command::Bands => cmd_bands(&cfg),
        Command::Fracture => cmd_fracture(&cfg),
        Command::Continue => cmd_continue(&cfg),
        Command::Plan => cmd_plan(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(outcome) => {
            println!("{}", serde_json::to_string_pretty(&outcome.report).expect("report serializes"));
            for f in &outcome.files {
                eprintln!("wrote {}", f.display());
            }
            ExitCode::from(outcome.exit.code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit().code() as u8)
        }
    }
}

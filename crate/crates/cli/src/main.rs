//! `tilted`: run tilted-transport experiments and write CSV tables plus a
//! `run.json` provenance sidecar into a run directory.
//!
//! Exit codes: 0 when every asserted check passes, 1 when a check fails,
//! 2 for usage or config errors, 3 when an experiment errors out.

mod commands;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::SystemTime;

use anyhow::Result;
use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use commands::{GmmCmd, IsingCmd, IteratedCmd, PhaseCmd, Phi4Cmd};
use run::{config_hash, resolve, Criterion, RunDir};

#[derive(Parser, Debug)]
#[command(name = "tilted", version, about = "Tilted transport experiments")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// JSON config overlaid on the defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override one config value, e.g. `--set run.n_samples=500`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    sets: Vec<String>,

    /// Overrides `run.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Start from the large-scale preset instead of the desk-scale defaults.
    #[arg(long, global = true)]
    paper_scale: bool,

    /// Run directory; defaults to `runs/<command>-<config hash>`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Print the resolved config and exit.
    #[arg(long, global = true)]
    dry_run: bool,

    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Cmd {
    /// Langevin vs boosted Langevin vs analytic boost on Gaussian-mixture priors.
    GmmSweep,
    /// Site-averaged autocorrelation of plain and boosted Langevin on φ⁴.
    Phi4Acf,
    /// Smoothed-hypercube Ising sampler scored against exact enumeration.
    Ising,
    /// Log-concavity margin of Gaussian-mixture posteriors over (SNR, κ).
    PhaseDiagram,
    /// Iterated transport under the heat semigroup.
    Iterated,
}

impl Cmd {
    fn name(self) -> &'static str {
        match self {
            Cmd::GmmSweep => "gmm-sweep",
            Cmd::Phi4Acf => "phi4-acf",
            Cmd::Ising => "ising",
            Cmd::PhaseDiagram => "phase-diagram",
            Cmd::Iterated => "iterated",
        }
    }
}

enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

fn prepare<T: Serialize + DeserializeOwned>(cli: &Cli, defaults: T, has_seed: bool) -> Result<(T, Value)> {
    let mut sets = Vec::new();
    if let Some(seed) = cli.seed {
        if has_seed {
            sets.push(format!("run.seed={seed}"));
        } else {
            log::warn!("{} is deterministic; ignoring --seed", cli.command.name());
        }
    }
    sets.extend(cli.sets.iter().cloned());
    resolve(&defaults, cli.config.as_deref(), &sets)
}

fn execute<T: Serialize + DeserializeOwned>(
    cli: &Cli,
    defaults: T,
    has_seed: bool,
    body: fn(&T, &mut RunDir) -> Result<Vec<Criterion>>,
) -> Result<Vec<Criterion>, Failure> {
    let (config, value) = prepare(cli, defaults, has_seed).map_err(Failure::Config)?;
    if cli.dry_run {
        println!("{}", serde_json::to_string_pretty(&value).map_err(|e| Failure::Config(e.into()))?);
        return Ok(Vec::new());
    }
    let name = cli.command.name();
    let dir = cli
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("runs").join(format!("{name}-{}", &config_hash(&value)[..12])));
    let started = SystemTime::now();
    let mut out = RunDir::create(dir).map_err(Failure::Runtime)?;
    log::info!("{name}: writing to {}", out.path().display());
    let criteria = body(&config, &mut out).map_err(Failure::Runtime)?;
    out.finish(name, &value, started, &criteria).map_err(Failure::Runtime)?;
    Ok(criteria)
}

fn dispatch(cli: &Cli) -> Result<Vec<Criterion>, Failure> {
    let large = cli.paper_scale;
    match cli.command {
        Cmd::GmmSweep => {
            let d = if large { GmmCmd::large_scale() } else { GmmCmd::default() };
            execute(cli, d, true, commands::gmm)
        }
        Cmd::Phi4Acf => {
            let d = if large { Phi4Cmd::large_scale() } else { Phi4Cmd::default() };
            execute(cli, d, true, commands::phi4)
        }
        Cmd::Ising => execute(cli, IsingCmd::default(), true, commands::ising),
        Cmd::PhaseDiagram => execute(cli, PhaseCmd::default(), false, commands::phase),
        Cmd::Iterated => execute(cli, IteratedCmd::default(), true, commands::iterated),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    match dispatch(&cli) {
        Ok(criteria) => {
            for c in &criteria {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            if criteria.iter().all(|c| c.passed) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(Failure::Config(e)) => {
            eprintln!("config error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}

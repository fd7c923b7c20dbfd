//! `hyperpam`: experiment runner for the parabolic Anderson model toolkit.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Parser, Subcommand};

use config::Config;
use output::{read_manifest, Format, Run};

#[derive(Parser, Debug)]
#[command(name = "hyperpam", version, about = "Parabolic Anderson model on hyperbolic space")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override a configuration key, e.g. `--set noise.beta=2`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,

    /// Output directory.
    #[arg(long, default_value = "out", global = true)]
    out: PathBuf,

    /// Worker threads for Monte Carlo (overrides mc.workers).
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Master seed (overrides mc.seed).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Format of tabular outputs.
    #[arg(long, value_enum, default_value = "csv", global = true)]
    format: Format,
}

#[derive(Subcommand, Debug, Clone)]
enum Command {
    /// Tabulate G_α, its lower bound and the heat kernel.
    KernelTable,
    /// Sample Brownian paths and their radial speed.
    BmSample,
    /// Feynman–Kac moment estimate and first chaos coefficient.
    MomentMc {
        /// Also run at dt/2 and report whether the estimate moved by less than one stderr.
        #[arg(long)]
        check_dt: bool,
    },
    /// F_i profile, Θ, upper and lower exponent tables.
    Bounds,
    /// Sign of both exponents over (β, p) with critical curves.
    PhaseDiagram,
    /// Large-parameter growth of the lower exponent.
    SlopeCheck,
    /// Intermittency ratios over mc.times.
    Intermittency,
    /// Quick property suite; nonzero exit on any failure.
    Validate,
    /// Re-run the subcommand recorded in a manifest with its configuration.
    Rerun {
        manifest: PathBuf,
    },
    /// Check that the files listed in a manifest still match their digests.
    Verify {
        manifest: PathBuf,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::KernelTable => "kernel-table",
            Command::BmSample => "bm-sample",
            Command::MomentMc { .. } => "moment-mc",
            Command::Bounds => "bounds",
            Command::PhaseDiagram => "phase-diagram",
            Command::SlopeCheck => "slope-check",
            Command::Intermittency => "intermittency",
            Command::Validate => "validate",
            Command::Rerun { .. } => "rerun",
            Command::Verify { .. } => "verify",
        }
    }

    fn parse_name(name: &str) -> Result<Self> {
        Ok(match name {
            "kernel-table" => Command::KernelTable,
            "bm-sample" => Command::BmSample,
            "moment-mc" => Command::MomentMc { check_dt: false },
            "bounds" => Command::Bounds,
            "phase-diagram" => Command::PhaseDiagram,
            "slope-check" => Command::SlopeCheck,
            "intermittency" => Command::Intermittency,
            "validate" => Command::Validate,
            other => bail!("manifest names unknown subcommand {other:?}"),
        })
    }
}

/// Runs one subcommand; `Ok(false)` means a check inside it failed.
fn execute(command: &Command, cfg: &Config, cli: &Cli, format: Format) -> Result<bool> {
    let mut ledger = cfg.ledger()?;
    let mut run = Run::new(&cli.out, format)?;
    let ok = match command {
        Command::KernelTable => commands::kernel_table(cfg, &mut ledger, &mut run).map(|_| true)?,
        Command::BmSample => commands::bm_sample(cfg, &mut run).map(|_| true)?,
        Command::MomentMc { check_dt } => commands::moment_mc(cfg, &ledger, &mut run, *check_dt)?,
        Command::Bounds => commands::bounds(cfg, &ledger, &mut run).map(|_| true)?,
        Command::PhaseDiagram => commands::phase_diagram(cfg, &ledger, &mut run).map(|_| true)?,
        Command::SlopeCheck => commands::slope_check(cfg, &ledger, &mut run)?,
        Command::Intermittency => commands::intermittency(cfg, &ledger, &mut run).map(|_| true)?,
        Command::Validate => commands::validate(cfg, &mut run)?,
        Command::Rerun { .. } | Command::Verify { .. } => unreachable!("resolved before execution"),
    };
    run.write_bytes("config.toml", cfg.to_toml()?.as_bytes())?;
    let manifest = run.finish(command.name(), cfg, &ledger)?;
    eprintln!(
        "wrote {} output(s) and {} to {}",
        manifest.outputs.len(),
        output::MANIFEST,
        cli.out.display()
    );
    Ok(ok)
}

fn verify(path: &std::path::Path) -> Result<bool> {
    let m = read_manifest(path)?;
    let dir = path.parent().unwrap_or(std::path::Path::new("."));
    let mut ok = true;
    for (file, matches) in output::verify_digests(dir, &m)? {
        println!("{}  {file}", if matches { "ok      " } else { "MISMATCH" });
        ok &= matches;
    }
    Ok(ok)
}

fn main_inner(cli: &Cli) -> Result<bool> {
    if let Command::Verify { manifest } = &cli.command {
        return verify(manifest);
    }
    let (command, mut cfg, format) = match &cli.command {
        Command::Rerun { manifest } => {
            let m = read_manifest(manifest)?;
            (Command::parse_name(&m.subcommand)?, m.config_echo, m.format)
        }
        c => (c.clone(), Config::load(cli.config.as_deref(), &cli.overrides)?, cli.format),
    };
    if let Some(w) = cli.workers {
        cfg.mc.workers = w;
    }
    if let Some(s) = cli.seed {
        cfg.mc.seed = s;
    }
    cfg.validate()?;
    execute(&command, &cfg, cli, format)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match main_inner(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("one or more checks failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

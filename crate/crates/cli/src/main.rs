//! `stable-depths`: sampling, limit propagation, verification, rate
//! experiments and figure grids for deep stable neural networks.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use config::Settings;

/// Environment variable holding the number of worker threads.
const THREADS_ENV: &str = "STABLE_DEPTHS_THREADS";

#[derive(Parser)]
#[command(name = "stable-depths", version, about = "Deep stable neural networks: samplers, limits and diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write draws of network units to samples.csv.
    Sample(Flags),
    /// Propagate the limiting spectral measures layer by layer.
    Limit(Flags),
    /// Compare finite networks with their limits; writes verify.csv.
    Verify(Flags),
    /// Convergence-rate experiments; writes rates.csv.
    Rates(Flags),
    /// One network realization on a grid over [0,1]² per α.
    Figure(Flags),
}

#[derive(clap::Args)]
struct Flags {
    /// Experiment configuration (`key = value` lines).
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Network width.
    #[arg(long)]
    n: Option<usize>,
    /// Particle count for limit propagation.
    #[arg(long = "m-particles")]
    m_particles: Option<usize>,
    /// Any other config key, as `key=value`; may be repeated.
    #[arg(long = "set", value_parser = parse_pair)]
    set: Vec<(String, String)>,
}

fn parse_pair(s: &str) -> std::result::Result<(String, String), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected key=value, got `{s}`"))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

impl Flags {
    fn settings(&self, command: &str) -> Result<Settings> {
        let mut over = self.set.clone();
        let named = [
            ("seed", self.seed.map(|v| v.to_string())),
            ("out", self.out.as_ref().map(|p| p.display().to_string())),
            ("alpha", self.alpha.map(|v| v.to_string())),
            ("n", self.n.map(|v| v.to_string())),
            ("particles", self.m_particles.map(|v| v.to_string())),
        ];
        over.extend(named.into_iter().filter_map(|(k, v)| v.map(|v| (k.to_string(), v))));
        Settings::load(&self.config, command, &over)
    }
}

fn configure_threads() -> Result<()> {
    if let Ok(raw) = std::env::var(THREADS_ENV) {
        let n: usize = raw.parse().with_context(|| format!("{THREADS_ENV} must be a positive integer"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global()?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    configure_threads()?;
    match cli.command {
        Command::Sample(f) => commands::sample::run(f.settings("sample")?),
        Command::Limit(f) => commands::limit::run(f.settings("limit")?),
        Command::Verify(f) => commands::verify::run(f.settings("verify")?),
        Command::Rates(f) => commands::rates::run(f.settings("rates")?),
        Command::Figure(f) => commands::figure::run(f.settings("figure")?),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("stable-depths: one or more assertions failed (see the report files)");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("stable-depths: error: {e:#}");
            ExitCode::from(2)
        }
    }
}

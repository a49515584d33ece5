use std::io::Write;
use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use genpgd_cli::commands::{cmd_diagnose, cmd_gen, cmd_solve, cmd_sweep, load_config};

/// Projected gradient descent with generative priors: experiment runner.
#[derive(Parser)]
#[command(name = "genpgd", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a random generator's weights and report its shape.
    Gen(Common),
    /// Solve one planted instance and write its trace.
    Solve(Common),
    /// Run every (m, seed, solver) cell and tabulate the results.
    Sweep(Common),
    /// Estimate restricted constants and check convergence predictions.
    Diagnose(Common),
}

#[derive(Args)]
struct Common {
    /// TOML config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Instance seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: config `out_dir`, then $GENPGD_OUT, then ./genpgd-out).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Sweep worker threads (0 = all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Override a config key, e.g. `--set m=64`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Common {
    fn overrides(&self) -> Vec<String> {
        let mut o = self.set.clone();
        if let Some(s) = self.seed {
            o.push(format!("seed={s}"));
        }
        if let Some(p) = &self.out {
            o.push(format!("out_dir={}", toml_string(&p.display().to_string())));
        }
        if let Some(w) = self.workers {
            o.push(format!("workers={w}"));
        }
        o
    }
}

fn toml_string(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match &cli.command {
        Command::Gen(c) => {
            cmd_gen(&load_config(c.config.as_deref(), &c.overrides())?, &mut out)?;
        }
        Command::Solve(c) => {
            cmd_solve(&load_config(c.config.as_deref(), &c.overrides())?, &mut out)?;
        }
        Command::Sweep(c) => {
            cmd_sweep(&load_config(c.config.as_deref(), &c.overrides())?, &mut out)?;
        }
        Command::Diagnose(c) => {
            cmd_diagnose(&load_config(c.config.as_deref(), &c.overrides())?, &mut out)?;
        }
    }
    out.flush()?;
    Ok(())
}

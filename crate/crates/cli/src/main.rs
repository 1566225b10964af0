//! g2calc: exact identity certificates, torsion classification, deformations
//! and numerical verification suites for G₂-structures on a 7-torus.

mod commands;
mod config;
mod conventions;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde_json::json;

use commands::{CliError, Outcome};
use config::{ConfigError, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "g2calc", version, about = "Identity certificates, torsion and deformations of G2-structures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration; defaults to the flat structure on a 256-point line.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write the JSON report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for the randomized controls.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Points per active axis.
    #[arg(long, global = true)]
    grid: Option<usize>,
    /// Finite-difference order (2, 4, 6 or 8).
    #[arg(long, global = true)]
    order: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exact integer certificates of the pointwise identities.
    Identities {
        /// Run a single certificate.
        #[arg(long)]
        only: Option<String>,
        /// Perturb one coefficient set: phiphi, phipsi, psipsi or projectors.
        #[arg(long)]
        mutate: Option<String>,
    },
    /// Torsion and its class for the configured structure.
    Torsion,
    /// Deform the configured base and check the closed forms.
    Deform {
        /// Where to write the deformed 3-form; defaults to the report path with a .g2f1 extension.
        #[arg(long)]
        snapshot: Option<PathBuf>,
    },
    /// Run the verification suites.
    Verify,
}

impl Cli {
    fn run_config(&self) -> Result<RunConfig, ConfigError> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(n) = self.grid {
            cfg.grid.points_per_axis = n;
        }
        if let Some(k) = self.order {
            cfg.grid.fd_order = k;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(out) = &self.out {
            cfg.output = Some(out.clone());
        }
        cfg.validate()?;
        cfg.grid_spec()?;
        Ok(cfg)
    }
}

fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let cfg = cli.run_config()?;
    let (name, outcome) = match &cli.command {
        Command::Identities { only, mutate } => {
            let t0 = Instant::now();
            let mut o = commands::identities(only.as_deref(), mutate.as_deref())?;
            o.report["elapsed_s"] = json!(t0.elapsed().as_secs_f64());
            ("identities", o)
        }
        Command::Torsion => ("torsion", commands::torsion(&cfg)?),
        Command::Deform { snapshot } => {
            let snap = snapshot.clone().or_else(|| cfg.output.as_ref().map(|o| o.with_extension("g2f1")));
            ("deform", commands::deform(&cfg, snap)?)
        }
        Command::Verify => ("verify", commands::verify(&cfg)?),
    };
    let mut report = json!({
        "tool": "g2calc",
        "version": env!("CARGO_PKG_VERSION"),
        "command": name,
        "conventions": conventions::conventions(),
        "config": cfg,
        "seed": cfg.seed,
    });
    if let (Some(dst), Some(src)) = (report.as_object_mut(), outcome.report.as_object()) {
        dst.extend(src.clone());
    }
    let text = serde_json::to_string_pretty(&report).expect("reports serialize");
    match &cfg.output {
        Some(path) => {
            std::fs::write(path, text + "\n").map_err(|source| CliError::Write { path: path.clone(), source })?
        }
        None => {
            let mut out = std::io::stdout().lock();
            let _ = writeln!(out, "{text}");
        }
    }
    Ok(Outcome { report, pass: outcome.pass })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(o) if o.pass => ExitCode::SUCCESS,
        Ok(_) => {
            eprintln!("g2calc: verification failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("g2calc: {e}");
            ExitCode::from(2)
        }
    }
}

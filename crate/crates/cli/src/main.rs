//! `cfdim`: experiments on Dirichlet non-improvable sets from the command line.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{CliError, Outcome, ResultExt, EXIT_FINDINGS, EXIT_USAGE};
use config::ExperimentConfig;
use output::Sink;

#[derive(Debug, Parser)]
#[command(name = "cfdim", version, about)]
struct Cli {
    /// JSON experiment config. Without it a small built-in schedule is used.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for output files. Without one, output goes to stdout.
    #[arg(long = "out-dir", global = true, env = "CFDIM_OUT_DIR")]
    out_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    depth: Option<usize>,
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[arg(long, global = true)]
    margin: Option<f64>,
    #[arg(long = "precision-bits", global = true)]
    precision_bits: Option<u32>,
    #[arg(long = "node-budget", global = true)]
    node_budget: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Expansion, convergents, Cassels residuals and Dirichlet's solution.
    Cf(commands::CfArgs),
    /// Sweep the pressure equation over caps M.
    Pressure(commands::PressureArgs),
    /// Level statistics and seeded sample points of the configured schedule.
    Cantor(commands::CantorArgs),
    /// Mass distribution and its normalization audit.
    Measure,
    /// Dimension estimates against S and 2/(2+τ).
    Dimension(commands::DimensionArgs),
    /// Geometry, normalization, inclusion and Hölder audits as JSON lines.
    Audit(commands::AuditArgs),
    /// Lower order, dimension formula, series test and membership evidence.
    Classify(commands::ClassifyArgs),
}

impl Cli {
    fn config(&self) -> Result<ExperimentConfig, CliError> {
        let mut c = match &self.config {
            Some(path) => ExperimentConfig::load(path).usage()?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.seed {
            c.seed = Some(s);
        }
        if let Some(d) = self.depth {
            c.depth = d;
        }
        if let Some(t) = self.tol {
            c.tol = t;
        }
        if let Some(m) = self.margin {
            c.margin = m;
        }
        if let Some(p) = self.precision_bits {
            c.precision_bits = p;
        }
        if let Some(b) = self.node_budget {
            c.node_budget = b;
        }
        c.validate().usage()?;
        Ok(c)
    }
}

fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let config = cli.config()?;
    let dir = cli.out_dir.clone().or_else(|| config.output_dir.clone());
    let mut sink = Sink::new(dir).internal()?;
    if matches!(cli.command, Command::Measure | Command::Dimension(_) | Command::Audit(_)) {
        if let Some(note) = commands::effective_precision_note(config.precision_bits) {
            eprintln!("{note}");
        }
    }
    let outcome = match &cli.command {
        Command::Cf(a) => commands::cmd_cf(a, &mut sink),
        Command::Pressure(a) => commands::cmd_pressure(a, &config, &mut sink),
        Command::Cantor(a) => commands::cmd_cantor(a, &config, &mut sink),
        Command::Measure => commands::cmd_measure(&config, &mut sink),
        Command::Dimension(a) => commands::cmd_dimension(a, &config, &mut sink),
        Command::Audit(a) => commands::cmd_audit(a, &config, &mut sink),
        Command::Classify(a) => commands::cmd_classify(a, &config, &mut sink),
    }?;
    if let Some(d) = sink.dir() {
        for p in sink.written() {
            eprintln!("wrote {}", p.strip_prefix(d).unwrap_or(p).display());
        }
    }
    Ok(outcome)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(Outcome::Clean) => ExitCode::SUCCESS,
        Ok(Outcome::Findings) => ExitCode::from(EXIT_FINDINGS),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}

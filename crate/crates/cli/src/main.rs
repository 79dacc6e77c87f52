//! `blochnet <experiment> --config <path> [--out <dir>] [--threads <n>] [--gauge single|uniform]`
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical error, 1 I/O failure.

mod config;
mod experiments;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use blochnet::Gauge;
use clap::{Parser, ValueEnum};

use crate::output::{OutputDir, RunInfo};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical error in {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Experiment {
    Star,
    Ybeam,
    Entangler,
    Interferometer,
    Qring,
    Film,
    Ab,
    Sweep,
    ReduceReport,
}

impl Experiment {
    fn name(self) -> &'static str {
        match self {
            Experiment::Star => "star",
            Experiment::Ybeam => "ybeam",
            Experiment::Entangler => "entangler",
            Experiment::Interferometer => "interferometer",
            Experiment::Qring => "qring",
            Experiment::Film => "film",
            Experiment::Ab => "ab",
            Experiment::Sweep => "sweep",
            Experiment::ReduceReport => "reduce-report",
        }
    }
}

/// Run tight-binding network experiments and write CSV results.
#[derive(Debug, Parser)]
#[command(name = "blochnet", version)]
struct Cli {
    /// Experiment to run.
    #[arg(value_enum)]
    experiment: Experiment,
    /// TOML config file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory [default: out/<experiment>].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for grid scans [default: all cores].
    #[arg(long)]
    threads: Option<usize>,
    /// Where loop fluxes are placed on the links.
    #[arg(long, default_value = "single", value_parser = parse_gauge)]
    gauge: Gauge,
}

fn parse_gauge(s: &str) -> Result<Gauge, String> {
    s.parse::<Gauge>().map_err(|e| e.to_string())
}

fn run(cli: &Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("option `--threads` must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("option `--threads`: {e}")))?;
    }
    let name = cli.experiment.name();
    let out_dir = cli
        .out
        .clone()
        .unwrap_or_else(|| Path::new("out").join(name));
    let mut out = OutputDir::create(&out_dir)?;
    let info = || RunInfo {
        experiment: name,
        config: &cli.config,
        gauge: cli.gauge,
        threads: rayon::current_num_threads(),
    };
    macro_rules! dispatch {
        ($f:path) => {{
            let params = $f(&cli.config, info(), &mut out)?;
            out.manifest(info(), &params)
        }};
    }
    match cli.experiment {
        Experiment::Star => dispatch!(experiments::star),
        Experiment::Ybeam => dispatch!(experiments::ybeam),
        Experiment::Entangler => dispatch!(experiments::entangler),
        Experiment::Interferometer => dispatch!(experiments::interferometer),
        Experiment::Qring => dispatch!(experiments::qring),
        Experiment::Film => dispatch!(experiments::film),
        Experiment::Ab => dispatch!(experiments::ab),
        Experiment::Sweep => dispatch!(experiments::sweep),
        Experiment::ReduceReport => dispatch!(experiments::reduce_report),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("blochnet {}: {e}", cli.experiment.name());
            ExitCode::from(e.exit_code())
        }
    }
}

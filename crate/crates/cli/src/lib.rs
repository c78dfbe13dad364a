//! `relfk`: run experiments from a TOML file and write CSV or JSON tables
//! plus a `manifest.json` that replays the run.
//!
//! Exit codes: 0 success, 1 a check failed, 2 bad configuration or
//! arguments, 3 numerical failure, 4 I/O error.

pub mod config;
pub mod output;
pub mod run;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Parser;
use thiserror::Error;

use config::{Format, Kind, RunConfig};
use output::Manifest;

pub const OUT_DIR_ENV: &str = "RELFK_OUT_DIR";
const DEFAULT_OUT_DIR: &str = "relfk-out";

#[derive(Debug, Error)]
pub enum Failure {
    #[error("configuration: {0}")]
    Schema(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("check failed: {0}")]
    Check(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Check(_) => 1,
            Failure::Schema(_) => 2,
            Failure::Numerical(_) => 3,
            Failure::Io(_) => 4,
        }
    }
}

impl From<relfk_core::Error> for Failure {
    fn from(e: relfk_core::Error) -> Self {
        match e {
            relfk_core::Error::InvalidArgument(_) => Failure::Schema(e.to_string()),
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "relfk", version, about = "Feynman-Kac Monte Carlo and lattice checks for the relativistic Pauli operator")]
pub struct Cli {
    #[arg(value_enum)]
    pub kind: Kind,
    /// TOML run configuration.
    #[arg(long, conflicts_with = "from_manifest")]
    pub config: Option<PathBuf>,
    /// Replay the configuration recorded in a previous run's manifest.
    #[arg(long)]
    pub from_manifest: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub samples: Option<u64>,
    /// Worker threads; never changes the numbers.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Output directory (default: $RELFK_OUT_DIR, then ./relfk-out).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

/// Parses `args`, runs, and returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(dir) => {
            println!("wrote {}", dir.display());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| Failure::Schema(format!("{}: {}", path.display(), e.message())))
}

/// Config file or manifest, then command-line overrides.
pub fn resolve(cli: &Cli) -> Result<RunConfig, Failure> {
    let mut config = match (&cli.config, &cli.from_manifest) {
        (Some(path), _) => load_config(path)?,
        (None, Some(path)) => {
            let manifest = output::read_manifest(path)?;
            if manifest.kind != cli.kind.name() {
                return Err(Failure::Schema(format!("manifest records a `{}` run, not `{}`", manifest.kind, cli.kind.name())));
            }
            manifest.config
        }
        (None, None) => RunConfig::default(),
    };
    if let Some(kind) = config.kind {
        if kind != cli.kind {
            return Err(Failure::Schema(format!("config `kind` is `{}` but the subcommand is `{}`", kind.name(), cli.kind.name())));
        }
    }
    config.kind = Some(cli.kind);
    if let Some(spec) = config.experiment.as_mut() {
        if let Some(seed) = cli.seed {
            spec.seed = seed;
        }
        if let Some(n) = cli.samples {
            spec.n_samples = n;
        }
        if let Some(threads) = cli.threads {
            spec.threads = threads;
        }
    }
    if let Some(seed) = cli.seed {
        config.validate.seed = seed;
    }
    if let Some(n) = cli.samples {
        config.validate.samples = n;
    }
    if let Some(format) = cli.format {
        config.output.format = format;
    }
    let dir = cli
        .out
        .clone()
        .or_else(|| config.output.dir.clone())
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
    config.output.dir = Some(dir);
    Ok(config)
}

/// Runs and writes results; returns the output directory.
pub fn execute(cli: &Cli) -> Result<PathBuf, Failure> {
    let config = resolve(cli)?;
    let started = Instant::now();
    let threads = cli.threads.unwrap_or(0);
    let outcome = match cli.kind {
        Kind::Validate => run::validate(&config, threads)?,
        Kind::Estimate => run::estimate(&config)?,
        Kind::Oracle => run::oracle(&config)?,
        Kind::Decay => run::decay(&config)?,
        Kind::Martingale => run::martingale(&config)?,
        Kind::Diamagnetic => run::diamagnetic(&config)?,
    };
    let dir = config.output.dir.clone().expect("resolved above");
    let outputs = output::write_tables(&dir, &outcome.tables, config.output.format)?;
    let spec = config.experiment.as_ref();
    let manifest = Manifest {
        tool: "relfk".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        kind: cli.kind.name().into(),
        seed: spec.map(|s| s.seed).or((cli.kind == Kind::Validate).then_some(config.validate.seed)),
        samples: spec.map(|s| s.n_samples).or((cli.kind == Kind::Validate).then_some(config.validate.samples)),
        threads: spec.map(|s| s.threads),
        discretization: spec.map(|s| s.discretization.clone()),
        config: config.clone(),
        outputs,
        wall_time_seconds: started.elapsed().as_secs_f64(),
        passed: outcome.passed,
    };
    output::write_manifest(&dir, &manifest)?;
    if !outcome.passed {
        let failing: Vec<String> = outcome
            .tables
            .iter()
            .flat_map(|t| {
                let pass_col = t.columns.iter().position(|c| *c == "pass" || *c == "holds");
                t.rows.iter().filter_map(move |row| match pass_col.map(|i| &row[i]) {
                    Some(output::Cell::Bool(false)) => Some(format!("{}: {}", t.name, row_label(row))),
                    _ => None,
                })
            })
            .collect();
        let named = if failing.is_empty() { format!("{} constancy", cli.kind.name()) } else { failing.join("; ") };
        return Err(Failure::Check(named));
    }
    Ok(dir)
}

fn row_label(row: &[output::Cell]) -> String {
    row.iter()
        .take(2)
        .map(|c| match c {
            output::Cell::Text(s) => s.clone(),
            output::Cell::Num(v) => format!("{v}"),
            output::Cell::Int(v) => v.to_string(),
            output::Cell::Bool(v) => v.to_string(),
        })
        .collect::<Vec<_>>()
        .join(" ")
}

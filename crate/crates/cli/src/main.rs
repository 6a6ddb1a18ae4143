mod commands;
mod validate;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use spectral_lab::config::{parse_overrides, RunConfig};
use spectral_lab::LabError;

/// Numerical laboratory for ergodic Schrödinger operators.
#[derive(Parser)]
#[command(name = "spectral-lab", version)]
struct Cli {
    /// JSON run configuration; every field has a default.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads.
    #[arg(long, global = true, env = "SPECTRAL_LAB_THREADS")]
    threads: Option<usize>,

    /// Re-read and check the outputs after the run.
    #[arg(long, global = true)]
    validate: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Empirical DOS, IDS and spectral bands.
    Dos(Overrides),
    /// Direct and Thouless-formula Lyapunov exponents.
    Lyapunov(Overrides),
    /// Same outputs as `lyapunov`.
    Thouless(Overrides),
    /// Inductive construction of a sampler near the target.
    Construct(Overrides),
    /// Uniformity probe of `(1/n) log ‖A_E^n(ω)‖`.
    Walters(Overrides),
    /// Check every known output in a run directory.
    Validate { dir: PathBuf },
}

#[derive(clap::Args)]
struct Overrides {
    /// Dotted-path overrides, e.g. `--numerics.N 4000`.
    #[arg(
        trailing_var_arg = true,
        allow_hyphen_values = true,
        value_name = "--PATH VALUE"
    )]
    overrides: Vec<String>,
}

/// Exit codes: 2 for configuration errors, 3 for capped construction
/// failures.
#[derive(Debug)]
pub enum Outcome {
    Done,
    Capped,
}

fn is_config_error(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        matches!(
            c.downcast_ref::<LabError>(),
            Some(LabError::InvalidParameter { .. } | LabError::Parse { .. })
        ) || c.downcast_ref::<ConfigError>().is_some()
    })
}

#[derive(Debug)]
struct ConfigError(String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn load_config(path: Option<&PathBuf>, args: &[String]) -> anyhow::Result<RunConfig> {
    let base = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| ConfigError(format!("cannot read config {}: {e}", p.display())))?;
            RunConfig::from_json(&text)?
        }
        None => RunConfig::default(),
    };
    let cfg = base.with_overrides(&parse_overrides(args)?)?;
    cfg.validate()?;
    Ok(cfg)
}

/// Moves global flags that landed among the trailing overrides back onto
/// the parsed arguments.
fn hoist_globals(cli: &mut Cli) -> anyhow::Result<()> {
    let o = match &mut cli.command {
        Command::Dos(o)
        | Command::Lyapunov(o)
        | Command::Thouless(o)
        | Command::Construct(o)
        | Command::Walters(o) => o,
        Command::Validate { .. } => return Ok(()),
    };
    let mut rest = Vec::new();
    let mut it = std::mem::take(&mut o.overrides).into_iter();
    while let Some(arg) = it.next() {
        let (key, inline) = match arg.split_once('=') {
            Some((k, v)) => (k.to_string(), Some(v.to_string())),
            None => (arg.clone(), None),
        };
        let mut value = |name: &str| {
            inline
                .clone()
                .or_else(|| it.next())
                .ok_or_else(|| ConfigError(format!("{name} needs a value")))
        };
        match key.as_str() {
            "--validate" if inline.is_none() => cli.validate = true,
            "--config" => cli.config = Some(PathBuf::from(value("--config")?)),
            "--threads" => {
                let v = value("--threads")?;
                cli.threads = Some(
                    v.parse()
                        .map_err(|_| ConfigError(format!("--threads: not a count: {v}")))?,
                );
            }
            _ => rest.push(arg),
        }
    }
    o.overrides = rest;
    Ok(())
}

fn run(mut cli: Cli) -> anyhow::Result<Outcome> {
    hoist_globals(&mut cli)?;
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(ConfigError("--threads must be at least 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("thread pool")?;
    }
    let (cfg, outcome) = match &cli.command {
        Command::Validate { dir } => {
            check_outputs(dir)?;
            return Ok(Outcome::Done);
        }
        Command::Dos(o) => {
            let cfg = load_config(cli.config.as_ref(), &o.overrides)?;
            let r = commands::dos(&cfg)?;
            (cfg, r)
        }
        Command::Lyapunov(o) | Command::Thouless(o) => {
            let cfg = load_config(cli.config.as_ref(), &o.overrides)?;
            let r = commands::lyapunov(&cfg)?;
            (cfg, r)
        }
        Command::Construct(o) => {
            let cfg = load_config(cli.config.as_ref(), &o.overrides)?;
            let r = commands::construct(&cfg)?;
            (cfg, r)
        }
        Command::Walters(o) => {
            let cfg = load_config(cli.config.as_ref(), &o.overrides)?;
            let r = commands::walters(&cfg)?;
            (cfg, r)
        }
    };
    if cli.validate {
        check_outputs(cfg.output.as_ref())?;
    }
    Ok(outcome)
}

/// Invalid outputs are run failures, not configuration errors.
fn check_outputs(dir: &std::path::Path) -> anyhow::Result<()> {
    validate::validate_dir(dir).map_err(|e| anyhow::anyhow!("{e:#}"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Capped) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e:#}");
            if is_config_error(&e) {
                ExitCode::from(2)
            } else if e
                .chain()
                .any(|c| matches!(c.downcast_ref::<LabError>(), Some(LabError::Seeding(_))))
            {
                ExitCode::from(3)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}

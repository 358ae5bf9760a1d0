//! `treehist`: runs experiments on the expanding-tree apparatus and writes
//! CSV tables with JSON sidecars.

mod args;
mod commands;
mod error;
mod validate;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use args::{merge, read_config, DeltaArgs, LgArgs, MomentsArgs, PointerArgs, StatsArgs, ValidateArgs};
use error::{CliError, CliResult};

#[derive(Parser, Debug)]
#[command(name = "treehist", version, about = "Measurement histories of an expanding-tree quantum apparatus")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output CSV path; a `<out>.json` sidecar is written next to it.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// JSON file whose fields override the flags (a sidecar also works).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Decoherence probe ‖Δ‖₁ over a sweep of windows.
    Delta(DeltaArgs),
    /// Pointer-state ensemble and the single-time density.
    Pointer(PointerArgs),
    /// Leggett-Garg scan.
    Lg(LgArgs),
    /// History statistics: covariance, frozen-outcome law or samples.
    Stats(StatsArgs),
    /// Closed-form moments of the coarse magnetization.
    Moments(MomentsArgs),
    /// Cross-check fast paths against the statevector oracle.
    Validate(ValidateArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Delta(_) => "delta",
            Command::Pointer(_) => "pointer",
            Command::Lg(_) => "lg",
            Command::Stats(_) => "stats",
            Command::Moments(_) => "moments",
            Command::Validate(_) => "validate",
        }
    }
}

fn resolve<T: Serialize + DeserializeOwned>(flags: &T, config: &Option<Value>) -> CliResult<(T, Value)> {
    let merged = merge(flags, config.clone())?;
    let value = serde_json::to_value(&merged)?;
    Ok((merged, value))
}

fn required_out(out: &Option<PathBuf>) -> CliResult<&Path> {
    out.as_deref().ok_or_else(|| CliError::Config("--out is required (path of the CSV to write)".into()))
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    let threads = rayon::current_num_threads();
    let name = cli.command.name();
    let config = cli.config.as_deref().map(|p| read_config(p, name)).transpose()?;
    let start = Instant::now();

    if let Command::Validate(flags) = &cli.command {
        let (a, value) = resolve(flags, &config)?;
        let checks = validate::run(&a)?;
        validate::print_report(std::io::stdout().lock(), &checks).map_err(|e| CliError::io("stdout", e))?;
        if let Some(out) = &cli.out {
            let file = std::fs::File::create(out).map_err(|e| CliError::io(out, e))?;
            validate::write_csv(file, &checks)?;
            let results = serde_json::json!({ "checks": checks });
            commands::write_sidecar(out, name, &value, threads, start.elapsed().as_secs_f64(), results)?;
        }
        let failed = checks.iter().filter(|c| !c.pass).count();
        return if failed == 0 { Ok(()) } else { Err(CliError::ValidationFailed(failed)) };
    }

    let out = required_out(&cli.out)?;
    let (value, results) = match &cli.command {
        Command::Delta(f) => {
            let (a, v) = resolve(f, &config)?;
            (v, commands::delta(&a, out)?)
        }
        Command::Pointer(f) => {
            let (a, v) = resolve(f, &config)?;
            (v, commands::pointer(&a, out)?)
        }
        Command::Lg(f) => {
            let (a, v) = resolve(f, &config)?;
            (v, commands::lg(&a, out)?)
        }
        Command::Stats(f) => {
            let (a, v) = resolve(f, &config)?;
            (v, commands::stats(&a, out)?)
        }
        Command::Moments(f) => {
            let (a, v) = resolve(f, &config)?;
            (v, commands::moments(&a, out)?)
        }
        Command::Validate(_) => unreachable!(),
    };
    let sidecar = commands::write_sidecar(out, name, &value, threads, start.elapsed().as_secs_f64(), results)?;
    eprintln!("wrote {} and {}", out.display(), sidecar.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

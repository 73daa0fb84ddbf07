//! `ergobound`: command-line front end for the ergodic-bounds library.
//!
//! Exit codes: 0 success, 1 internal numerical failure, 2 malformed input
//! or domain error, 3 horizon not above the validity threshold, 4 some
//! `verify` cell not dominated, 5 simulation failure.

mod args;
mod commands;
mod model;
mod output;

use std::fs;
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::Parser;
use ergodic_bounds::Error;

use crate::args::{Cli, Command, ReplayArgs};
use crate::output::{emit, RunContext, RunManifest};

#[derive(Debug)]
pub enum Failure {
    Usage(anyhow::Error),
    InvalidThreshold,
    NotDominated(usize),
    Simulation(anyhow::Error),
    Internal(anyhow::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Simulation { .. } => Failure::Simulation(e.into()),
            Error::Domain(_)
            | Error::Model(_)
            | Error::SupNormViolated { .. }
            | Error::Inapplicable(_)
            | Error::NoStationaryDensity => Failure::Usage(e.into()),
            _ => Failure::Internal(e.into()),
        }
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Internal(_) => 1,
            Failure::Usage(_) => 2,
            Failure::InvalidThreshold => 3,
            Failure::NotDominated(_) => 4,
            Failure::Simulation(_) => 5,
        }
    }

    fn report(&self) {
        match self {
            Failure::Usage(e) | Failure::Simulation(e) | Failure::Internal(e) => {
                eprintln!("error: {e:#}")
            }
            Failure::InvalidThreshold => {
                eprintln!("t is not above the validity threshold; the bound does not apply")
            }
            Failure::NotDominated(n) => eprintln!("{n} grid cell(s) not dominated by the bound"),
        }
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Bound(_) => "bound",
        Command::JacobiBound(_) => "jacobi-bound",
        Command::TanouBound(_) => "tanou-bound",
        Command::Check(_) => "check",
        Command::Tav(_) => "tav",
        Command::Pi(_) => "pi",
        Command::Poisson(_) => "poisson",
        Command::Simulate(_) => "simulate",
        Command::Verify(_) => "verify",
        Command::Replay(_) => "replay",
    }
}

fn model_file(c: &Command) -> Option<std::path::PathBuf> {
    match c {
        Command::Check(a) | Command::Tav(a) => a.model.model_file.clone(),
        Command::Pi(a) => a.model.model_file.clone(),
        Command::Poisson(a) => a.model.model_file.clone(),
        Command::Simulate(a) => a.model.model_file.clone(),
        Command::Verify(a) => a.model.model_file.clone(),
        _ => None,
    }
}

fn replay(args: &ReplayArgs) -> Result<u8, Failure> {
    let text = fs::read_to_string(&args.manifest)
        .with_context(|| format!("cannot read manifest {}", args.manifest.display()))
        .map_err(Failure::Usage)?;
    let manifest: RunManifest = serde_json::from_str(&text)
        .context("malformed manifest")
        .map_err(Failure::Usage)?;
    let mut argv = manifest.argv.clone();
    if argv.first().map(String::as_str) == Some("replay") {
        return Err(Failure::Usage(anyhow!(
            "a manifest cannot replay another replay"
        )));
    }
    if let Some(to) = &args.to {
        let to = to.to_string_lossy().into_owned();
        let mut replaced = false;
        let mut i = 0;
        while i < argv.len() {
            if argv[i] == "--out" && i + 1 < argv.len() {
                argv[i + 1] = to.clone();
                replaced = true;
                i += 1;
            } else if argv[i].starts_with("--out=") {
                argv[i] = format!("--out={to}");
                replaced = true;
            }
            i += 1;
        }
        if !replaced {
            argv.extend(["--out".to_string(), to]);
        }
    }
    Ok(run(argv))
}

fn dispatch(cli: &Cli, argv: &[String]) -> Result<u8, Failure> {
    let seed = cli.global.seed;
    let outcome = match &cli.command {
        Command::Bound(a) => commands::bound(a)?,
        Command::JacobiBound(a) => commands::jacobi_bound(a)?,
        Command::TanouBound(a) => commands::tanou_bound(a)?,
        Command::Check(a) => commands::check(a)?,
        Command::Tav(a) => commands::tav(a)?,
        Command::Pi(a) => commands::pi(a)?,
        Command::Poisson(a) => commands::poisson(a)?,
        Command::Simulate(a) => commands::simulate(a, seed)?,
        Command::Verify(a) => commands::verify(a, seed)?,
        Command::Replay(a) => return replay(a),
    };
    let ctx = RunContext {
        global: &cli.global,
        command: command_name(&cli.command),
        argv,
        model_file: model_file(&cli.command),
    };
    emit(&ctx, &outcome.payload)?;
    match outcome.failure {
        Some(f) => Err(f),
        None => Ok(0),
    }
}

/// Parses `argv` (program name excluded), runs the command and returns the
/// exit code.
pub fn run(argv: Vec<String>) -> u8 {
    let cli = match Cli::try_parse_from(
        std::iter::once("ergobound".to_string()).chain(argv.iter().cloned()),
    ) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match cli.global.threads {
        Some(0) => Err(Failure::Usage(anyhow!("--threads must be positive"))),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(&cli, &argv)),
            Err(e) => Err(Failure::Internal(e.into())),
        },
        None => dispatch(&cli, &argv),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            f.report();
            f.code()
        }
    }
}

fn main() -> ExitCode {
    ExitCode::from(run(std::env::args().skip(1).collect()))
}

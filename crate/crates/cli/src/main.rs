//! `stiffflex` command-line front end.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use stiffflex::{Error, ProblemSpec};

use config::{Format, RunConfig};
use output::Writer;

/// Bad input: command line, configuration or problem definition.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

#[derive(Parser, Debug)]
#[command(name = "stiffflex", version, about = "Eigenvalues of stiff/flexible transmission problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Comma-separated eps values; for `verify` the convergence grid.
    #[arg(long, global = true, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    /// Number of eigenvalues or limit modes.
    #[arg(long, global = true)]
    count: Option<usize>,
    /// Truncation order of the expansions (at most 6).
    #[arg(long, global = true)]
    order: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Table format.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Eigenvalues of the perturbed problem.
    Solve,
    /// Limit spectrum with its Jordan structure.
    Limit,
    /// Asymptotic expansions of the limit modes.
    Expand,
    /// Convergence studies; exit status 1 if any fails.
    Verify,
    /// All of the above on the built-in constant-coefficient problem.
    Demo,
}

fn build_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match (&cli.config, cli.command) {
        (Some(path), _) => RunConfig::load(path)?,
        (None, Command::Demo) => RunConfig::demo(),
        (None, _) => return Err(UsageError("--config is required (except for demo)".into()).into()),
    };
    if let Some(eps) = &cli.eps {
        if cli.command == Command::Verify {
            cfg.run.grid = Some(eps.clone());
        } else {
            cfg.run.eps = Some(eps.clone());
        }
    }
    if let Some(c) = cli.count {
        cfg.run.count = c;
    }
    if let Some(o) = cli.order {
        cfg.run.order = o;
    }
    if let Some(d) = &cli.out {
        cfg.output.dir = d.clone();
    }
    if let Some(f) = cli.format {
        cfg.output.format = f;
    }
    for w in cfg.validate()? {
        eprintln!("warning: {w}");
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<bool> {
    let cfg = build_config(cli)?;
    let p = ProblemSpec::from_source(&cfg.problem)?;
    let mut out = Writer::new(&cfg)?;
    let pass = match cli.command {
        Command::Solve => commands::solve(&p, &cfg, &mut out).map(|_| true)?,
        Command::Limit => commands::limit(&p, &cfg, &mut out).map(|_| true)?,
        Command::Expand => commands::expand(&p, &cfg, &mut out).map(|_| true)?,
        Command::Verify => commands::verify(&p, &cfg, &mut out)?,
        Command::Demo => {
            commands::solve(&p, &cfg, &mut out)?;
            commands::limit(&p, &cfg, &mut out)?;
            commands::expand(&p, &cfg, &mut out)?;
            commands::verify(&p, &cfg, &mut out)?
        }
    };
    eprintln!("wrote {} file(s) to {}", out.written.len(), out.dir().display());
    Ok(pass)
}

fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<UsageError>().is_some() || e.downcast_ref::<std::io::Error>().is_some() {
        return 2;
    }
    match e.downcast_ref::<Error>() {
        Some(
            Error::Parse { .. }
            | Error::UnknownIdentifier { .. }
            | Error::Domain(_)
            | Error::InvalidProblem(_)
            | Error::InvalidArgument(_),
        ) => 2,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_error_class() {
        let usage = anyhow::Error::from(UsageError("x".into()));
        assert_eq!(exit_code(&usage), 2);
        let parse = anyhow::Error::from(Error::Parse { pos: 3, msg: "x".into() }).context("loading");
        assert_eq!(exit_code(&parse), 2);
        let num = anyhow::Error::from(Error::RootSearch("x".into()));
        assert_eq!(exit_code(&num), 3);
        let solv = anyhow::Error::from(Error::Solvability { stage: "s".into(), residual: 1.0 });
        assert_eq!(exit_code(&solv), 3);
    }
}

use clap::{Parser, Subcommand};
use pshenv::config::{parse_config, RunConfig};
use pshenv::error::{Error, Result};
use pshenv::io::{write_failure_record, FailureItem, FailureRecord};
use pshenv::{runner, verify};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "pshenv",
    version,
    about = "Plurisubharmonic envelopes, Monge-Ampère densities, and relative capacity on lattice domains"
)]
struct Cli {
    /// TOML run configuration
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (overrides the config)
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Sweep order (overrides the config)
    #[arg(long, global = true, value_parser = ["seq", "redblack"])]
    mode: Option<String>,

    /// Reject configs with unknown keys instead of warning
    #[arg(long, global = true)]
    strict: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Conditional envelope by obstacle iteration
    Envelope,
    /// Conditional envelope by exponential penalization
    Berman,
    /// Relative capacity of the configured compact set
    Capacity,
    /// Built-in verification criteria: ids, name fragments, or `all`
    Verify { selection: Vec<String> },
    /// Envelope error against the configured closed form over a refinement
    /// list (spacings as decimals or fractions, e.g. 1/16 1/32)
    Convergence { refinement: Vec<String> },
}

fn parse_spacing(token: &str) -> Result<f64> {
    let parse = |s: &str| -> Result<f64> {
        s.trim()
            .parse()
            .map_err(|_| Error::Validation(format!("`{token}` is not a spacing")))
    };
    match token.split_once('/') {
        Some((num, den)) => {
            let d = parse(den)?;
            if d == 0.0 {
                return Err(Error::Validation(format!("`{token}` divides by zero")));
            }
            Ok(parse(num)? / d)
        }
        None => parse(token),
    }
}

fn load_config(cli: &Cli) -> Result<Option<RunConfig>> {
    let Some(path) = &cli.config else {
        return Ok(None);
    };
    let (cfg, warnings) = parse_config(path, cli.strict)?;
    for w in warnings {
        eprintln!("warning: {w}");
    }
    Ok(Some(cfg))
}

fn require_config(cfg: Option<RunConfig>) -> Result<RunConfig> {
    cfg.ok_or_else(|| Error::Validation("this subcommand needs --config".into()))
}

fn run(cli: Cli) -> Result<bool> {
    let mut cfg = load_config(&cli)?;
    if let (Some(c), Some(mode)) = (cfg.as_mut(), &cli.mode) {
        c.mode = mode.clone();
        c.validate()?;
    }
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.as_ref().map(|c| c.outdir.clone()))
        .unwrap_or_else(|| PathBuf::from("out"));

    match cli.command {
        Command::Envelope | Command::Berman => {
            let mut cfg = require_config(cfg)?;
            cfg.method = match cli.command {
                Command::Berman => "berman".into(),
                _ => "obstacle".into(),
            };
            runner::run_envelope(&cfg, &out)
        }
        Command::Capacity => runner::run_capacity(&require_config(cfg)?, &out),
        Command::Convergence { refinement } => {
            let cfg = require_config(cfg)?;
            let hs = if refinement.is_empty() {
                cfg.hs()
            } else {
                refinement
                    .iter()
                    .map(|t| parse_spacing(t))
                    .collect::<Result<Vec<f64>>>()?
            };
            runner::run_convergence(&cfg, &hs, &out)
        }
        Command::Verify { selection } => {
            let tokens = if !selection.is_empty() {
                selection
            } else if let Some(c) = &cfg {
                if c.experiments.is_empty() {
                    vec!["all".into()]
                } else {
                    c.experiments.clone()
                }
            } else {
                vec!["all".into()]
            };
            let mut ids = Vec::new();
            for t in &tokens {
                for id in verify::select(t)? {
                    if !ids.contains(&id) {
                        ids.push(id);
                    }
                }
            }
            runner::run_verify(&ids, &out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command = match &cli.command {
        Command::Envelope => "envelope",
        Command::Berman => "berman",
        Command::Capacity => "capacity",
        Command::Verify { .. } => "verify",
        Command::Convergence { .. } => "convergence",
    }
    .to_string();
    let out = cli.out.clone();

    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            let record = FailureRecord {
                command,
                message: e.to_string(),
                failures: vec![FailureItem { name: "run".into(), detail: e.to_string() }],
            };
            let dir = out.unwrap_or_else(|| PathBuf::from("out"));
            let _ = write_failure_record(&dir.join("failures.toml"), &record);
            ExitCode::from(2)
        }
    }
}

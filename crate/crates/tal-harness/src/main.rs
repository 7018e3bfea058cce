//! Command-line experiment harness. Experiments are described by TOML specs
//! (see `specs/`), validated strictly, and executed cell by cell with
//! resumable, atomically written outputs: per-cell CSV curves, per-scheme
//! aggregates, and deterministic SVG plots.
//!
//! Exit codes: `0` success, `2` invalid experiment spec or usage, `3`
//! runtime failure (training or I/O).

mod output;
mod runner;
mod spec;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use runner::{run_experiment, RunOptions};
use spec::ExperimentSpec;

/// Specs compiled into the binary; `run`/`validate` accept these names as
/// well as file paths, and the files ship alongside the crate under
/// `specs/`.
const EMBEDDED_SPECS: &[(&str, &str)] = &[
    (
        "fig2-cartpole-q2",
        include_str!("../specs/fig2-cartpole-q2.toml"),
    ),
    (
        "fig5-actiongap",
        include_str!("../specs/fig5-actiongap.toml"),
    ),
];

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    /// The experiment spec file (or how it was invoked) is invalid; exit
    /// code 2.
    #[error("{0}")]
    Spec(String),
    /// Execution failed after a valid spec; exit code 3.
    #[error("{0}")]
    Runtime(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl HarnessError {
    fn exit_code(&self) -> u8 {
        match self {
            HarnessError::Spec(_) => 2,
            _ => 3,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "tal-harness",
    version,
    about = "Runs declarative comparisons of entropy-regularized learning schemes"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Execute a spec (a TOML file path or an embedded spec name).
    Run {
        spec: String,
        /// Output root; results land under `<out>/<experiment name>/`.
        #[arg(long, default_value = "runs")]
        out: PathBuf,
        /// Worker threads for independent cells (default: run serially).
        #[arg(long)]
        jobs: Option<usize>,
        /// Comma-separated seed list replacing the spec file's seeds.
        #[arg(long)]
        seed_override: Option<String>,
    },
    /// Parse and validate an experiment spec without running it.
    Validate { spec: String },
    /// List the experiment specs embedded in this binary.
    List,
    /// Print the harness version.
    Version,
}

fn load_spec(arg: &str) -> Result<ExperimentSpec, HarnessError> {
    let path = std::path::Path::new(arg);
    let text = if path.exists() {
        std::fs::read_to_string(path)?
    } else if let Some((_, text)) = EMBEDDED_SPECS.iter().find(|(name, _)| *name == arg) {
        (*text).to_string()
    } else {
        return Err(HarnessError::Spec(format!(
            "spec {arg:?} is neither a readable file nor an embedded spec \
             (try `tal-harness list`)"
        )));
    };
    ExperimentSpec::parse(&text)
}

fn parse_seed_list(arg: &str) -> Result<Vec<u64>, HarnessError> {
    let seeds: Result<Vec<u64>, _> = arg.split(',').map(|s| s.trim().parse::<u64>()).collect();
    let seeds = seeds.map_err(|e| HarnessError::Spec(format!("bad --seed-override: {e}")))?;
    if seeds.is_empty() {
        return Err(HarnessError::Spec("--seed-override must list seeds".into()));
    }
    Ok(seeds)
}

fn dispatch(cli: Cli) -> Result<(), HarnessError> {
    match cli.cmd {
        Cmd::Run {
            spec,
            out,
            jobs,
            seed_override,
        } => {
            let spec = load_spec(&spec)?;
            spec.validate()?;
            let opts = RunOptions {
                out_dir: out,
                jobs,
                seed_override: seed_override.as_deref().map(parse_seed_list).transpose()?,
            };
            let summary = run_experiment(&spec, &opts)?;
            println!(
                "experiment {}: {} cell(s) run, {} skipped; outputs in {}",
                spec.name,
                summary.trained,
                summary.skipped,
                opts.out_dir.join(&spec.name).display()
            );
            Ok(())
        }
        Cmd::Validate { spec } => {
            let parsed = load_spec(&spec)?;
            parsed.validate()?;
            println!("spec {} is valid ({:?})", parsed.name, parsed.kind);
            Ok(())
        }
        Cmd::List => {
            for (name, text) in EMBEDDED_SPECS {
                let first_comment = text
                    .lines()
                    .next()
                    .unwrap_or("")
                    .trim_start_matches('#')
                    .trim();
                println!("{name}: {first_comment}");
            }
            Ok(())
        }
        Cmd::Version => {
            println!("tal-harness {}", env!("CARGO_PKG_VERSION"));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embedded_specs_parse_and_validate() {
        for (name, text) in EMBEDDED_SPECS {
            let spec = ExperimentSpec::parse(text).unwrap_or_else(|e| {
                panic!("embedded spec {name} failed to parse: {e}");
            });
            spec.validate()
                .unwrap_or_else(|e| panic!("embedded spec {name} invalid: {e}"));
            assert_eq!(&spec.name, name, "embedded name must match registry key");
        }
    }

    #[test]
    fn seed_list_parsing() {
        assert_eq!(parse_seed_list("1, 2,3").unwrap(), vec![1, 2, 3]);
        assert!(parse_seed_list("1,x").is_err());
        assert!(parse_seed_list("").is_err());
    }
}

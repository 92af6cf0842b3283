//! Command line surface: one JSON config in, one self-describing run
//! directory out (manifest.json, CSV field files, summary.json).
//!
//! Exit codes: 0 success, 1 configuration or validation error, 2 solver
//! failure, 3 invariant-check failure.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

const USAGE: &str = "usage: caginalp <command> <config.json> [--out DIR] [--threads N]

commands:
  simulate           forward solve with the potential selected by the config
  simulate-obstacle  forward solve forcing the obstacle (active set) strategy
  adjoint            forward solve plus the backward adjoint sweep
  gradient-check     Taylor test of the adjoint gradient, with negative control
  optimize           projected gradient descent over the admissible box
  quench-sweep       barrier-to-obstacle state convergence study
  approx-control     adapted optimal-control continuation toward the obstacle

options:
  --out DIR     write into DIR instead of a timestamped directory under ./runs
  --threads N   cap on concurrently solved schedule entries / probes (default 1)
";

pub struct CliArgs {
    pub command: String,
    pub config: PathBuf,
    pub out: Option<PathBuf>,
    pub threads: usize,
}

fn parse_args(mut args: Vec<String>) -> Result<CliArgs, String> {
    if args.is_empty() {
        return Err(USAGE.to_string());
    }
    let command = args.remove(0);
    let known = [
        "simulate",
        "simulate-obstacle",
        "adjoint",
        "gradient-check",
        "optimize",
        "quench-sweep",
        "approx-control",
    ];
    if !known.contains(&command.as_str()) {
        return Err(format!("unknown command '{command}'\n\n{USAGE}"));
    }
    let mut config = None;
    let mut out = None;
    let mut threads = 1usize;
    let mut it = args.into_iter();
    while let Some(arg) = it.next() {
        match arg.as_str() {
            "--out" => {
                let v = it.next().ok_or("--out needs a directory argument")?;
                out = Some(PathBuf::from(v));
            }
            "--threads" => {
                let v = it.next().ok_or("--threads needs a number")?;
                threads = v
                    .parse::<usize>()
                    .map_err(|_| format!("invalid thread count '{v}'"))?
                    .max(1);
            }
            other if config.is_none() && !other.starts_with("--") => {
                config = Some(PathBuf::from(other));
            }
            other => return Err(format!("unexpected argument '{other}'\n\n{USAGE}")),
        }
    }
    let config = config.ok_or_else(|| format!("missing config path\n\n{USAGE}"))?;
    Ok(CliArgs {
        command,
        config,
        out,
        threads,
    })
}

fn main() -> ExitCode {
    let raw: Vec<String> = std::env::args().skip(1).collect();
    if raw.iter().any(|a| a == "--help" || a == "-h") || raw.is_empty() {
        print!("{USAGE}");
        return ExitCode::from(if raw.is_empty() { 1 } else { 0 });
    }
    let args = match parse_args(raw) {
        Ok(a) => a,
        Err(msg) => {
            eprintln!("{msg}");
            return ExitCode::from(1);
        }
    };

    match commands::dispatch(&args) {
        Ok(all_checks_passed) => {
            if all_checks_passed {
                ExitCode::from(0)
            } else {
                eprintln!("one or more invariant checks failed (see summary.json)");
                ExitCode::from(3)
            }
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

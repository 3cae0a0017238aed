//! `herglotz-flow <subcommand> --config <file> [--out <dir>] [--seed <n>]`
//!
//! Exit codes: 0 when every result row passes, 2 on numeric failures,
//! 1 on usage or config errors. Nothing is written unless the run finishes.

mod commands;
mod config;

use clap::error::ErrorKind;
use clap::Parser;
use herglotz_core::report::{write_atomic, Report};
use serde_json::json;
use std::path::PathBuf;
use std::process::ExitCode;

use commands::Command;
use config::ExperimentConfig;

#[derive(Debug, Parser)]
#[command(name = "herglotz-flow", version, about = "Möbius flows of Herglotz functions and spectral averaging")]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// JSON experiment config. `suite` runs without one.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory for report.json and CSV exports; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

fn fail(kind: &str, message: impl std::fmt::Display) -> ExitCode {
    eprintln!("{}", json!({ "error": kind, "message": message.to_string() }));
    ExitCode::from(1)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail("usage", e.to_string().trim()),
    };

    let text = match &cli.config {
        Some(p) => match std::fs::read_to_string(p) {
            Ok(t) => t,
            Err(e) => return fail("config", format!("{}: {e}", p.display())),
        },
        None if cli.command == Command::Suite => "{}".to_string(),
        None => return fail("usage", "--config is required for this subcommand"),
    };
    let mut cfg = match ExperimentConfig::parse(&text) {
        Ok(c) => c,
        Err(e) => return fail("config", e),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let out = cli.out.clone().or_else(|| cfg.out.clone().map(PathBuf::from));

    let workers = std::env::var("HF_WORKERS").ok().map(|v| v.parse::<usize>());
    let workers = match workers {
        Some(Ok(n)) if n > 0 => Some(n),
        Some(_) => return fail("usage", "HF_WORKERS must be a positive integer"),
        None => cfg.workers,
    };
    if let Some(n) = workers {
        // Only fails when a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }

    if let Err(e) = commands::precheck(cli.command, &cfg) {
        return fail("config", e);
    }
    let outcome = match commands::run(cli.command, &cfg) {
        Ok(o) => o,
        Err(e) => return fail("config", e),
    };

    let canonical = serde_json::to_vec(&json!({ "command": cli.command.name(), "config": cfg }))
        .expect("config serializes");
    let mut report = Report::new(cli.command.name(), &canonical, outcome.rows);
    report.details = outcome.details;
    let body = match report.to_json() {
        Ok(b) => b,
        Err(e) => return fail("internal", e),
    };

    match out {
        Some(dir) => {
            if let Err(e) = std::fs::create_dir_all(&dir) {
                return fail("io", format!("{}: {e}", dir.display()));
            }
            let mut files = Vec::new();
            if cfg.outputs.json {
                files.push((dir.join("report.json"), body.clone()));
            }
            if let (true, Some((name, csv))) = (cfg.outputs.csv, outcome.csv) {
                files.push((dir.join(name), csv));
            }
            for (path, contents) in files {
                if let Err(e) = write_atomic(&path, &contents) {
                    return fail("io", format!("{}: {e}", path.display()));
                }
            }
        }
        None => println!("{body}"),
    }

    if report.all_pass() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}

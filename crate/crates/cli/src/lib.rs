//! Command-line front end for the `chipower` library.
//!
//! Every command prints one JSON document `{command, config, result}` on
//! stdout. With `--out-dir` the same document is written to
//! `<command>.json` next to delimited artifacts.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod args;
mod commands;

use std::ffi::OsString;
use std::io::Write;
use std::path::Path;

use chipower::{CodaError, ErrorKind};
use clap::Parser;
use serde::Serialize;
use serde_json::Value;

use crate::args::Cli;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

pub const THREADS_ENV: &str = "CHIPOWER_THREADS";

pub fn exit_code(e: &CodaError) -> i32 {
    match e.kind() {
        ErrorKind::Usage => EXIT_USAGE,
        ErrorKind::Data => EXIT_DATA,
        ErrorKind::Numerical => EXIT_NUMERICAL,
    }
}

#[derive(Serialize)]
struct Envelope<'a, C: Serialize> {
    command: &'a str,
    config: &'a C,
    result: Value,
}

/// Parses `argv`, runs the command and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return exit_code(&e);
    }
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn configure_threads() -> chipower::Result<()> {
    let Ok(text) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = text.trim().parse().ok().filter(|&t| t > 0).ok_or_else(|| {
        CodaError::InvalidArgument(format!("{THREADS_ENV} must be a positive integer"))
    })?;
    // a pool may already exist when run is called repeatedly in one process
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global();
    Ok(())
}

fn execute(cli: &Cli) -> chipower::Result<()> {
    let name = cli.command.name();
    let outcome = commands::dispatch(&cli.command)?;
    let config = command_config(&cli.command)?;
    let document = Envelope {
        command: name,
        config: &config,
        result: outcome.result,
    };
    let text = serde_json::to_string_pretty(&document).map_err(json_error)?;
    if let Some(dir) = &outcome.out_dir {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(format!("{name}.json")), format!("{text}\n"))?;
        for artifact in outcome.artifacts {
            artifact.write(dir)?;
        }
    }
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    writeln!(lock, "{text}")?;
    Ok(())
}

/// The arguments of the chosen subcommand, without the enum wrapper.
fn command_config(command: &args::Command) -> chipower::Result<Value> {
    let wrapped = serde_json::to_value(command).map_err(json_error)?;
    Ok(match wrapped {
        Value::Object(map) if map.len() == 1 => {
            let inner = map.into_iter().next().expect("one entry").1;
            match inner {
                Value::Object(sub) if matches!(command, args::Command::Zeros(_)) => {
                    sub.into_iter().next().map_or(Value::Null, |(_, v)| v)
                }
                v => v,
            }
        }
        v => v,
    })
}

pub(crate) fn json_error(e: serde_json::Error) -> CodaError {
    CodaError::Io(std::io::Error::other(e.to_string()))
}

pub(crate) enum Artifact {
    Json(String, Value),
    Table(String, Vec<String>, Vec<Vec<String>>),
}

impl Artifact {
    fn write(self, dir: &Path) -> chipower::Result<()> {
        match self {
            Artifact::Json(name, value) => {
                let text = serde_json::to_string_pretty(&value).map_err(json_error)?;
                std::fs::write(dir.join(name), format!("{text}\n"))?;
            }
            Artifact::Table(name, header, rows) => {
                let header: Vec<&str> = header.iter().map(String::as_str).collect();
                chipower::io::write_table(dir.join(name), &header, rows)?;
            }
        }
        Ok(())
    }
}

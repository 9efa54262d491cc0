//! `sbl`: command-line access to the eigenvalue bound toolkit.
//!
//! Each invocation runs exactly one subcommand. Failures print a one-line
//! JSON object `{"error": <name>, "message": <text>}` on stderr and exit
//! with status 2 (usage) or 3 (numerical or I/O failure).

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod report;

use std::ffi::OsString;
use std::io::Write;

use clap::Parser;

use crate::config::{Cli, RunConfig};
use crate::error::{CliError, CliResult};

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "SBL_THREADS";

/// Parses `args`, runs the command and returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            return report_failure(&CliError::usage(e.render().to_string().trim_end()));
        }
    };
    match cli.into_run_config().and_then(|cfg| run_config(&cfg)) {
        Ok(()) => 0,
        Err(e) => report_failure(&e),
    }
}

fn report_failure(e: &CliError) -> i32 {
    eprintln!("{}", e.to_json());
    e.exit_code()
}

fn thread_count() -> CliResult<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::usage(format!(
                "{THREADS_ENV} must be a positive integer, got {s:?}"
            ))),
        },
    }
}

/// Runs a resolved configuration inside a pool sized by `SBL_THREADS` and
/// writes its output.
pub fn run_config(cfg: &RunConfig) -> CliResult<()> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_count()? {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::usage(format!("cannot start worker threads: {e}")))?;
    let out = pool.install(|| commands::execute(cfg))?;
    match &cfg.out {
        Some(path) => output::write_atomic(path, out.body.as_bytes())?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(out.body.as_bytes())?;
            stdout.flush()?;
        }
    }
    for w in &out.warnings {
        eprintln!("warning: {w}");
    }
    Ok(())
}

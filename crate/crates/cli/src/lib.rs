//! Reproducible command-line runs: phantoms, forward data, inversions and
//! error tables. Each command resolves its flags into a [`RunConfig`],
//! validates it, writes it as `run.toml` and then produces its outputs.

pub mod commands;
pub mod config;
pub mod report;

mod args;

use std::fmt;

pub use args::{main_with_args, Cli};
pub use commands::{execute, Outcome};
pub use config::{BumpForm, Command, GeometrySpec, RunConfig, Source, Transform};
pub use report::{error_table, ReportTable};

/// Process exit codes.
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Numeric,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError { kind: ErrorKind::Config, message: message.into() }
    }

    pub fn numeric(message: impl Into<String>) -> Self {
        CliError { kind: ErrorKind::Numeric, message: message.into() }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            ErrorKind::Config => EXIT_CONFIG,
            ErrorKind::Numeric => EXIT_NUMERIC,
        }
    }
}

/// One line, `error[config]: ...` or `error[numeric]: ...`.
impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.kind {
            ErrorKind::Config => "config",
            ErrorKind::Numeric => "numeric",
        };
        write!(f, "error[{tag}]: {}", config::one_line(&self.message))
    }
}

impl std::error::Error for CliError {}

impl From<vline_core::Error> for CliError {
    fn from(e: vline_core::Error) -> Self {
        if e.is_numeric() {
            CliError::numeric(e.to_string())
        } else {
            CliError::config(e.to_string())
        }
    }
}

/// Caps the global thread pool at `VLINE_THREADS` when set.
pub fn init_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("VLINE_THREADS") else {
        return Ok(());
    };
    let k: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|k| *k > 0)
        .ok_or_else(|| CliError::config(format!("VLINE_THREADS = {raw:?} is not a positive integer")))?;
    // a pool built earlier in the same process is kept
    let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
    Ok(())
}

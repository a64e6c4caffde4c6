//! Batch front end for the numerical laboratory: configuration loading,
//! mode dispatch, and artifact persistence.
//!
//! A run is described by one [`config::RunConfig`] — a TOML document plus a
//! few command-line overrides — and produces one output directory holding
//! `manifest.json` (tool version + the effective configuration), `results.json`,
//! and whatever CSV tables the mode calls for. Re-running from the manifest's
//! embedded configuration reproduces the artifacts byte for byte.

use std::fmt;

pub mod config;
pub mod run;

/// Process-level failure: what to print and which exit code to die with.
///
/// Exit codes: 0 ok, 2 configuration error (the message names the offending
/// field), 3 numerical failure, 1 artifact I/O failure.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Numerical(String),
    Io(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 2,
            Failure::Numerical(_) => 3,
            Failure::Io(_) => 1,
        }
    }

    /// Sorts a core error into the config/numerical buckets: anything the
    /// user could have prevented by editing the run document is a config
    /// error; everything the computation discovers on its own is numerical.
    pub fn from_core(context: &str, e: nehari_lab::Error) -> Self {
        use nehari_lab::Error::*;
        match e {
            InvalidGrid(_) | InvalidParams(_) | InvalidSubset(_) | Inadmissible { .. }
            | InvalidConfig(_) | UnderResolved { .. } => {
                Failure::Config(format!("{context}: {e}"))
            }
            _ => Failure::Numerical(format!("{context}: {e}")),
        }
    }

    pub fn io(context: &str, e: std::io::Error) -> Self {
        Failure::Io(format!("{context}: {e}"))
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(msg) => write!(f, "invalid configuration: {msg}"),
            Failure::Numerical(msg) => write!(f, "numerical failure: {msg}"),
            Failure::Io(msg) => write!(f, "i/o failure: {msg}"),
        }
    }
}

//! Library half of the `cef` binary: run configs, architectures as data,
//! checkpoints and the subcommands.

pub mod arch;
pub mod checkpoint;
pub mod commands;
pub mod config;
mod error;

pub use error::{CliError, CliResult};

/// Caps the global rayon pool from `CEF_THREADS`, if set.
pub fn init_threads() -> CliResult<()> {
    let Ok(v) = std::env::var("CEF_THREADS") else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| CliError::Usage(format!("CEF_THREADS must be a positive integer, got '{v}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))
}

//! Command-line front end for the optimix design library: JSON run
//! configurations, design optimization and evaluation, and CSV/JSON output.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;

pub use commands::{cmd_draws, cmd_evaluate, cmd_optimize, EvaluateOutcome, OptimizeOutcome};
pub use config::{LoadedConfig, RunConfig};
pub use error::{CliError, CliResult};

/// Sizes the global worker pool from `OPTIMIX_THREADS` (unset or 0: all
/// cores).
pub fn configure_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var("OPTIMIX_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| CliError::Validation(format!("OPTIMIX_THREADS must be a count, got '{raw}'")))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Validation(format!("cannot size thread pool: {e}")))?;
    }
    Ok(())
}

//! Experiment harness for `gavg-core`: TOML configuration, the ε-ladder
//! convergence and oracle experiments, and deterministic artifact output.

pub mod config;
pub mod error;
pub mod experiments;
pub mod output;

pub use config::{ExperimentConfig, ExperimentKind};
pub use error::{AppError, AppResult};
pub use experiments::{run, run_converge, run_findim, ConvergenceReport, FindimReport, Report};
pub use output::{emit_outputs, render};

/// Runs `f` on a dedicated pool of `threads` workers.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> AppResult<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| AppError::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

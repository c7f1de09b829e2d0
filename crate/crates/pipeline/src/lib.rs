//! Dataset build, experiments and the `surge` command-line tool.

pub mod cli;
pub mod dataset;
pub mod error;
pub mod experiment;

pub use error::PipelineError;

/// Sizes the global rayon pool from `SURGE_THREADS`, if set.
pub fn init_thread_pool() -> Result<(), PipelineError> {
    let Ok(value) = std::env::var(cli::THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| PipelineError::Usage(format!("{} must be a positive integer, got {value:?}", cli::THREADS_ENV)))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| PipelineError::Usage(e.to_string()))
}

//! Fan-out of independent runs with results merged in input order.

use rayon::prelude::*;

use crate::error::{Error, Result};

pub const WORKERS_ENV: &str = "CONVEYOR_WORKERS";

/// Worker count: explicit request, else `CONVEYOR_WORKERS`, else the
/// machine's available parallelism.
pub fn resolve_workers(requested: Option<usize>) -> Result<usize> {
    if let Some(n) = requested {
        return if n == 0 {
            Err(Error::Config("worker count must be at least 1".into()))
        } else {
            Ok(n)
        };
    }
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        return match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(Error::Config(format!("{WORKERS_ENV}={v} is not a positive integer"))),
        };
    }
    Ok(std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

/// Apply `f` to every input on a pool of `workers` threads. Output order
/// matches input order regardless of scheduling.
pub fn run_ordered<T, R, F>(inputs: &[T], workers: usize, f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Result<R> + Sync + Send,
{
    if workers <= 1 || inputs.len() <= 1 {
        return inputs.iter().map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    pool.install(|| inputs.par_iter().map(f).collect())
}

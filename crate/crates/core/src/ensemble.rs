//! Parallel execution of independent paths.
//!
//! Each path owns its noise streams, so the only requirement for
//! reproducibility is that per-path results come back in path order; rayon's
//! indexed `collect` guarantees that whatever the number of workers.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Environment variable consulted when no worker count is given.
pub const WORKERS_ENV: &str = "EFFDIFF_WORKERS";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ensemble {
    workers: usize,
}

impl Default for Ensemble {
    /// `EFFDIFF_WORKERS` if set, otherwise the available parallelism.
    fn default() -> Self {
        let workers = std::env::var(WORKERS_ENV)
            .ok()
            .and_then(|s| s.trim().parse::<usize>().ok())
            .filter(|&n| n > 0)
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
        Self { workers }
    }
}

impl Ensemble {
    pub fn new(workers: usize) -> Self {
        Self { workers: workers.max(1) }
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    /// Evaluates `f(0), …, f(n-1)` on the pool and returns the results in
    /// index order. The first error by index wins.
    pub fn map<T, F>(&self, n: usize, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(u64) -> Result<T> + Sync + Send,
    {
        if self.workers == 1 {
            return (0..n as u64).map(f).collect();
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .build()
            .map_err(|e| Error::InvalidParameter { name: "workers", reason: e.to_string() })?;
        let results: Vec<Result<T>> = pool.install(|| (0..n as u64).into_par_iter().map(&f).collect());
        results.into_iter().collect()
    }
}

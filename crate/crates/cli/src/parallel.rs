//! Worker pool with an order-preserving map.

use rayon::prelude::*;

use crate::CliError;

pub const THREADS_ENV: &str = "AFFAPPROX_THREADS";

/// Thread count: `AFFAPPROX_THREADS` if set, else `flag`, else the number of
/// available cores.
pub fn resolve_threads(flag: Option<usize>) -> Result<usize, CliError> {
    let from_env = match std::env::var(THREADS_ENV) {
        Ok(text) => Some(
            text.trim()
                .parse::<usize>()
                .map_err(|_| CliError::input(format!("{THREADS_ENV} must be a positive integer, got {text:?}")))?,
        ),
        Err(_) => None,
    };
    let threads = from_env.or(flag).unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if threads == 0 {
        return Err(CliError::input("parallelism must be at least 1"));
    }
    Ok(threads)
}

pub struct Workers {
    pool: rayon::ThreadPool,
}

impl Workers {
    pub fn new(threads: usize) -> Result<Self, CliError> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build()
            .map_err(|e| CliError::input(format!("cannot start worker pool: {e}")))?;
        Ok(Workers { pool })
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }

    /// `items.map(f)`, evaluated on the pool; results come back in item order.
    pub fn map<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync,
    {
        self.pool.install(|| items.par_iter().map(&f).collect())
    }

    /// Like [`map`](Self::map) for fallible `f`; the error of the earliest
    /// failing item is returned.
    pub fn try_map<T, R, E, F>(&self, items: &[T], f: F) -> Result<Vec<R>, E>
    where
        T: Sync,
        R: Send,
        E: Send,
        F: Fn(&T) -> Result<R, E> + Sync,
    {
        self.map(items, f).into_iter().collect()
    }
}

//! Rayon-backed [`Executor`]. Chunk results come back in chunk order, so
//! output does not depend on the thread count.

use rayon::prelude::*;
use rayon::{ThreadPool, ThreadPoolBuilder};
use telecert_core::montecarlo::Executor;

pub const THREADS_ENV: &str = "TELECERT_THREADS";

pub struct Rayon {
    pool: Option<ThreadPool>,
}

impl Rayon {
    /// Global pool.
    pub fn new() -> Self {
        Rayon { pool: None }
    }

    pub fn with_threads(threads: usize) -> Result<Self, rayon::ThreadPoolBuildError> {
        let pool = ThreadPoolBuilder::new().num_threads(threads).build()?;
        Ok(Rayon { pool: Some(pool) })
    }

    /// Pool bounded by `TELECERT_THREADS` when set to a positive integer.
    pub fn from_env() -> Self {
        std::env::var(THREADS_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .filter(|&n| n > 0)
            .and_then(|n| Self::with_threads(n).ok())
            .unwrap_or_default()
    }
}

impl Default for Rayon {
    fn default() -> Self {
        Self::new()
    }
}

impl Executor for Rayon {
    fn map_chunks<T, F>(&self, chunks: u64, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64) -> T + Sync + Send,
    {
        let run = || (0..chunks).into_par_iter().map(&f).collect();
        match &self.pool {
            Some(pool) => pool.install(run),
            None => run(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use telecert_core::montecarlo::{estimate_mean, Sequential};

    #[test]
    fn matches_sequential() {
        use rand::Rng;
        let a = estimate_mean(&Sequential, 100_000, 3, |rng| rng.gen::<f64>());
        let b = estimate_mean(&Rayon::with_threads(3).unwrap(), 100_000, 3, |rng| rng.gen::<f64>());
        assert_eq!(a, b);
    }
}

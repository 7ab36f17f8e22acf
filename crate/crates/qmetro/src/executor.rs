use qmetro_core::optimize::RestartExecutor;
use rayon::prelude::*;

use crate::error::{CliError, Result};

/// Runs restarts on a dedicated rayon pool. Results keep restart order,
/// so output does not depend on the worker count.
pub struct Pool {
    pool: rayon::ThreadPool,
}

impl Pool {
    /// `workers = None` uses one thread per core.
    pub fn new(workers: Option<usize>) -> Result<Self> {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(w) = workers {
            if w == 0 {
                return Err(CliError::Config {
                    origin: "--workers".into(),
                    message: "must be at least 1".into(),
                });
            }
            b = b.num_threads(w);
        }
        let pool = b.build().map_err(|e| CliError::Config {
            origin: "--workers".into(),
            message: e.to_string(),
        })?;
        Ok(Pool { pool })
    }

    pub fn workers(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl RestartExecutor for Pool {
    fn map<T, F>(&self, count: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        self.pool
            .install(|| (0..count).into_par_iter().map(f).collect())
    }
}

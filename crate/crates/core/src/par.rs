//! Replicate fan-out. Every replicate owns its random stream, so the serial
//! and parallel paths return identical vectors.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Serial,
    /// Rayon fan-out; `None` uses the global pool. Falls back to serial when
    /// the `parallel` feature is disabled.
    #[default]
    Parallel,
    ParallelWith {
        workers: usize,
    },
}

impl Execution {
    pub fn from_workers(workers: Option<usize>) -> Self {
        match workers {
            Some(1) => Execution::Serial,
            Some(w) => Execution::ParallelWith { workers: w },
            None => Execution::Parallel,
        }
    }
}

pub fn map_replicates<T, F>(reps: u64, exec: Execution, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    match exec {
        Execution::Serial => Ok((0..reps).map(f).collect()),
        Execution::Parallel => Ok(parallel_map(reps, f)),
        Execution::ParallelWith { workers } => {
            if workers == 0 {
                return Err(Error::Config("worker count must be positive".into()));
            }
            run_in_pool(workers, || parallel_map(reps, f))
        }
    }
}

#[cfg(feature = "parallel")]
fn parallel_map<T: Send, F: Fn(u64) -> T + Sync + Send>(reps: u64, f: F) -> Vec<T> {
    use rayon::prelude::*;
    (0..reps as usize).into_par_iter().with_min_len(64).map(|r| f(r as u64)).collect()
}

#[cfg(not(feature = "parallel"))]
fn parallel_map<T: Send, F: Fn(u64) -> T + Sync + Send>(reps: u64, f: F) -> Vec<T> {
    (0..reps).map(f).collect()
}

#[cfg(feature = "parallel")]
fn run_in_pool<T: Send>(workers: usize, job: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
    Ok(pool.install(job))
}

#[cfg(not(feature = "parallel"))]
fn run_in_pool<T: Send>(_workers: usize, job: impl FnOnce() -> T + Send) -> Result<T> {
    Ok(job())
}

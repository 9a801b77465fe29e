//! Scenario-driven experiments: EVM/constellation runs, capacity sweeps and
//! the oracle self-check, with seeded drop-parallel execution.

pub mod config;
pub mod output;
pub mod runner;
pub mod seed;
pub mod selfcheck;

pub use config::{Scenario, ScenarioConfig, REFERENCE_SCENARIO};
pub use runner::{run_capacity, run_constellation, CapacityRun, ConstellationRun};
pub use selfcheck::{run_selfcheck, SelfcheckReport};

/// Runs `f` on a pool of `jobs` threads, or on the global pool when `None`.
pub fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> crate::Result<T> {
    match jobs {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| crate::Error::Parameter(format!("cannot start {n} worker threads: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

//! Configuration, execution and CSV output for the `condphase` experiments.

pub mod config;
pub mod error;
pub mod experiments;
pub mod record;
pub mod validate;

pub use config::{ExperimentConfig, ExperimentId};
pub use error::{HarnessError, Result};
pub use experiments::ExperimentOutput;
pub use record::{to_csv_string, write_csv, SweepRecord, HEADER};
pub use validate::{validate, PlanItem, ValidationReport};

/// Environment variable overriding the configured master seed.
pub const SEED_ENV: &str = "CONDPHASE_SEED";

/// Master seed after applying the [`SEED_ENV`] override.
pub fn master_seed(config: &ExperimentConfig) -> Result<u64> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| HarnessError::Config(format!("{SEED_ENV}={v:?} is not a u64"))),
        Err(std::env::VarError::NotPresent) => Ok(config.seed),
        Err(e) => Err(HarnessError::Config(format!("{SEED_ENV}: {e}"))),
    }
}

/// Validate, then run `id` on a pool of `workers` threads. Output does not
/// depend on `workers`.
pub fn run(config: &ExperimentConfig, id: ExperimentId, workers: usize) -> Result<ExperimentOutput> {
    run_with_seed(config, id, workers, master_seed(config)?)
}

pub fn run_with_seed(config: &ExperimentConfig, id: ExperimentId, workers: usize, master: u64) -> Result<ExperimentOutput> {
    validate(config, id).into_result()?;
    if workers == 0 {
        return Err(HarnessError::Config("workers must be >= 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| HarnessError::Config(format!("thread pool: {e}")))?;
    pool.install(|| experiments::run_experiment(config, id, master))
}

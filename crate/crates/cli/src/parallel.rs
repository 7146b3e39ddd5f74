use rayon::prelude::*;

use grbm_core::experiments::aggregate;
use grbm_core::{SweepRow, SweepSpec, TrialRecord};

use crate::error::CliError;

/// Environment variable read for the worker count when none is given.
pub const THREADS_ENV: &str = "GRBM_THREADS";

/// Builds a pool with `threads` workers, falling back to `GRBM_THREADS` and
/// then to rayon's default.
pub fn thread_pool(threads: Option<usize>) -> Result<rayon::ThreadPool, CliError> {
    let threads = match threads {
        Some(n) => Some(n),
        None => match std::env::var(THREADS_ENV) {
            Ok(v) => Some(v.trim().parse().map_err(|_| {
                CliError::Usage(format!("{THREADS_ENV}={v:?} is not a thread count"))
            })?),
            Err(_) => None,
        },
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    Ok(builder.build()?)
}

/// Every trial of one grid point, in trial order.
pub fn point_records(spec: &SweepSpec, point: usize) -> Result<Vec<TrialRecord>, CliError> {
    Ok((0..spec.trials)
        .into_par_iter()
        .map(|t| spec.run_point_trial(point, t))
        .collect::<Result<Vec<_>, _>>()?)
}

/// Parallel counterpart of [`grbm_core::run_sweep`]. Records are collected in
/// trial order before averaging, so the rows are bitwise identical to the
/// sequential run for any worker count.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>, CliError> {
    spec.validate()?;
    spec.sd_grid
        .iter()
        .enumerate()
        .map(|(point, &sd)| Ok(aggregate(spec.mode, sd, &point_records(spec, point)?, spec.strict)))
        .collect()
}

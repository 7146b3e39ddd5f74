//! Gaussian restricted Boltzmann machines with continuous visible units and
//! discrete hidden units, together with two naive mean-field inference schemes:
//!
//! * type I factorizes the whole joint distribution over visible and hidden
//!   units;
//! * type II integrates the visible layer out analytically and factorizes only
//!   the resulting hidden-layer Boltzmann machine.
//!
//! The [`exact`] module provides brute-force oracles (enumeration of the
//! marginal hidden-layer model and a block Gibbs sampler) that the mean-field
//! results are measured against, and [`experiments`] builds the trial and
//! parameter-sweep machinery on top.
//!
//! The crate is `no_std` and only needs an allocator. Parallel sweeps, file
//! formats and the command line live in the companion `grbm-cli` crate.
#![no_std]
#![allow(clippy::needless_range_loop)]

extern crate alloc;
#[cfg(test)]
extern crate std;

mod error;
mod math;

pub mod exact;
pub mod experiments;
pub mod meanfield;
pub mod model;

pub use error::{Error, Result};
pub use exact::{
    exact_free_energy, exact_free_energy_capped, exact_moments, exact_moments_capped,
    gibbs_estimate, ExactMoments, GibbsEstimate, GibbsOptions,
    DEFAULT_STATE_CAP,
};
pub use experiments::{
    aggregate, mse, run_sweep, run_trial, run_trial_capped, trial_seeds, SweepMode, SweepRow, SweepSpec, Trial, TrialRecord, VaryFamily,
};
pub use meanfield::{
    free_energy_type1, free_energy_type2, hidden_unit_stats, kld_gap, solve_type1, solve_type2, solve_type2_from, undamped_update,
    variational_free_energy_type1, variational_free_energy_type2,
    MfSolution, SolverOptions, UnitStats, Variant,
};
pub use model::{
    energy, hidden_field_given_visible, marginalize, sample_params, visible_mean_given_hidden,
    GrbmParams, InstanceSpec, MarginalBm, SampleSpace,
};

//! Std-side tooling around `grbm-core`: parallel sweeps, CSV/TSV tables, the
//! invariant check suite, instance inspection and the Gibbs cross-check.
//!
//! The `grbm` binary is a thin clap front end over this library.

pub mod checks;
pub mod error;
pub mod inspect;
pub mod parallel;
pub mod table;

pub use error::CliError;

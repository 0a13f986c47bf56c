//! Batch front end for the Turaev-Viro code simulator: verification
//! suites, protocol runs and report emission.  Every command returns a
//! [`Report`] fully determined by its [`RunConfig`].

pub mod protocol;
pub mod report;
pub mod verify;

pub use report::{Check, Report, RunConfig};

/// Seed used when none is given.
pub const DEFAULT_SEED: u64 = 2024;

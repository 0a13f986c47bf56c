//! Simulator, protocol engine and circuit compiler for the Fibonacci
//! Turaev-Viro code.

pub mod circuits;
pub mod error;
pub mod errors;
pub mod fusion;
pub mod gadgets;
pub mod lattice;
pub mod scalar;
pub mod schedule;
pub mod statevec;

pub use error::{Result, TvqError};
pub use scalar::Scalar;

/// Double-precision Fibonacci (or other) category data.
pub type FusionDataF64 = fusion::FusionData<f64>;

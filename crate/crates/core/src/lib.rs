//! Exact dynamics and thermometry for small interacting bosonic systems.

// Checks such as `!(x > 0.0)` are written to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod correlators;
pub mod error;
pub mod fock;
pub mod hamiltonian;
pub mod linalg;
pub mod partition;
pub mod propagator;
pub mod runner;
pub mod states;
pub mod thermofit;

pub use error::{Error, Result};

//! Shallow-depth linear-optical circuits.
//!
//! The crate builds local and non-local circuit architectures, decides which
//! boson-sampling outcomes their lightcones permit, evaluates Fock-state and
//! Gaussian output weights through permanents and hafnians, and runs the
//! Monte-Carlo diagnostics (density curves, frame potentials, Rényi-2 page
//! curves) that track convergence to the Haar ensemble.

pub mod arch;
pub mod cli;
pub mod error;
pub mod fock;
pub mod gaussian;
pub mod linalg;
pub mod matching;
pub mod matfn;
pub mod stats;

pub use error::{Error, Result};

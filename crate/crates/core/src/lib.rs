//! Bessel-process semigroup derivatives and their Bismut–Elworthy–Li representation.
//!
//! The crate is split the same way the checks are: closed-form kernels,
//! quadrature of the semigroup, path simulation of `ρ`, `η` and `D`, and a
//! verifier that compares the three against each other.

pub mod error;
pub mod kernels;
pub mod pathsim;
pub mod quadrature;
pub mod report;
pub mod rng;
pub mod semigroup;
pub mod stats;
pub mod suite;
pub mod testfn;
pub mod verifier;

pub use error::{Error, Result};

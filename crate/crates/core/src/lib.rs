//! Simulation kernels for multivariate diffusions crossing families of
//! semipermeable hyperplane membranes, their homogenized limit, and the
//! estimators used to compare the two.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod coefficients;
pub mod error;
pub mod limit;
pub mod linalg;
pub mod membranes;
pub mod oracles;
pub mod quadrature;
pub mod rng;
pub mod sim;
pub mod stats;
pub mod transform;

pub use error::{Error, Result};

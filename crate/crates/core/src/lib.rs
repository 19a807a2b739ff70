//! Photon-counting statistics and phase estimation for a lossless Mach-Zehnder interferometer
//! fed by a coherent state in one port and squeezed vacuum in the other.

pub mod bayes;
pub mod error;
pub mod outcome;
pub mod scaling;
pub mod sensitivity;
pub mod specfun;
pub mod states;
pub mod structure;
#[cfg(test)]
mod testutil;

pub use error::{Error, Result};

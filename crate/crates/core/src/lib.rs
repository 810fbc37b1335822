//! Classical simulation and certification of qubit teleportation.
//!
//! Everything here is `no_std` + `alloc`; file formats, the command line and
//! thread pools live in the `telecert` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod analytic;
pub mod certify;
pub mod error;
pub mod geometry;
pub mod montecarlo;
pub mod protocols;
pub mod quadrature;
pub mod stats;

pub use error::Error;
pub use geometry::{BitPair, BlochVector, Vec3};
pub use protocols::{Outcome, OutcomeDistribution, Protocol, Sign};

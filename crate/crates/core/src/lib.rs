//! Fermionic field state produced by electron–positron pair creation in two
//! counterpropagating, elliptically polarized laser waves.
//!
//! The single-particle Dirac propagator is computed on a truncated momentum
//! lattice; pair amplitudes, vacuum persistence, multi-pair sector
//! probabilities and spin/helicity averages follow from its G-blocks. A small
//! exact Fock-space propagator ([`fockoracle`]) cross-checks the
//! combinatorics.

pub mod dynamics;
pub mod error;
pub mod fieldmodel;
pub mod fockoracle;
mod linalg;
pub mod modebasis;
pub mod multipair;
pub mod physconfig;

pub use error::{Error, Result};

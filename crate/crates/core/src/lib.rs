//! Radial Dunkl processes attached to the dihedral root systems I2(n).
//!
//! Two independent routes to the same laws: closed-form spectral series
//! (transition densities, generalized Bessel function, Hermite system,
//! hitting-time tails) and pathwise simulation from squared Bessel processes.
//! The [`validate`] module reconciles them.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dihedral;
pub mod error;
pub mod hermite;
pub mod hitting;
pub mod quad;
pub mod series;
pub mod simulate;
pub mod specfun;
pub mod spectral;
pub mod stats;
pub mod validate;

pub use dihedral::{make_system, weight, DihedralSystem, Parity, PolarPoint, SystemDescriptor};
pub use error::{Error, Result};
pub use series::SeriesControl;

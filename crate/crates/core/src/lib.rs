//! Geometry engine for Lagrange-Finsler spaces and nonholonomic manifolds.

pub mod cli;
pub mod clifford;
pub mod curvature;
pub mod dconn;
pub mod dirac;
pub mod dsl;
pub mod dynamics;
pub mod error;
pub mod jet;
pub mod jetmat;
pub mod lagrangian;
pub mod nlc;
pub mod spectral;

pub use error::{GeomError, Result};

#[cfg(test)]
#[path = "../tests/common/oracle.rs"]
pub(crate) mod oracle;

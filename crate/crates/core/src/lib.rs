//! Symmetric periodic orbit of the octahedral six-body problem.
//!
//! The orbit is computed by direct minimization of the discretized Lagrangian
//! action over loops with dihedral symmetry, and then checked against
//! independent oracles: the equations of motion, integration of a regularized
//! flow through the double collisions, the central-configuration system, the
//! homothetic comparison action and the Sundman collision asymptotics.

pub mod action;
pub mod central_config;
pub mod dynamics;
pub mod error;
pub mod kepler;
pub mod ode;
pub mod regularize;
pub mod symmetry;
pub mod verify;

pub use error::{Error, Result};

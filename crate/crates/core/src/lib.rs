//! Thin-plate dimension-reduction laboratory.
//!
//! Three-dimensional linear elasticity on the plate box
//! `(-ell, ell)^2 x (-epsilon, epsilon)` with the classical or the
//! thickness-modified stored energy, the Kirchhoff–Love limit plate, the
//! scaling maps between them, convergence sweeps, and the inertial working
//! of the two energy families.

pub mod basis;
pub mod error;
pub mod fem3d;
pub mod harness;
pub mod inertia;
pub mod material;
pub mod mesh;
pub mod plate2d;
pub mod scaling;
pub mod sparse;

pub use error::{Error, Result};

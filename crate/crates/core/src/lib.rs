//! Kustaanheimo-Stiefel unfolding of the Kepler problem.
//!
//! The Kepler system on `T R³₀` is realized as the reduction of a family of
//! four-dimensional harmonic oscillators: restrict to the zero level of the
//! fiber charge `h`, reparametrize time by `dt = 2R² dτ`, and project along the
//! U(1) fibers of the KS map.

pub mod cli;
pub mod error;
pub mod integrate;
pub mod phase_geometry;
pub mod reduction;
pub mod sampling;
pub mod symplectic;
pub mod systems;

pub use error::{Error, FieldError, Result};

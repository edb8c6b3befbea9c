//! Numerical pluripotential theory on lattice domains in ℂⁿ (n = 1, 2):
//! conditional plurisubharmonic envelopes of bounded obstacles with a
//! Monge–Ampère density constraint, computed by two independent methods
//! (obstacle-clamped Gauss–Seidel iteration and exponential penalization),
//! plus relative extremal functions, capacity, and an experiment suite
//! exercising the structural properties of the envelope operator.

pub mod capacity;
pub mod config;
pub mod density;
pub mod domain;
pub mod envelope;
pub mod error;
pub mod experiments;
pub mod expr;
pub mod grid;
pub mod io;
pub mod ma;
pub mod runner;
pub mod solver;
pub mod stencil;
pub mod verify;

pub use error::{Error, Result};

//! Finite-dimensional laboratory for non-linearly damped skew systems
//!
//! ```text
//! x'(t) = A x(t) - B phi(B* x(t))
//! ```
//!
//! All models live in energy coordinates, so `A` is a real skew matrix and the
//! physical energy is half the squared Euclidean norm of the state. The crate is
//! `no_std` (it needs `alloc`); file formats, the CLI and parallel sweeps live in
//! the `dampdecay` companion crate.
//!
//! Modules follow the pipeline: [`model`] builds a [`DampedSystem`],
//! [`nonlinearity`] supplies the damping map, [`integrator`] advances the flow,
//! [`spectral`] and [`decay`] turn systems and trajectories into numbers.

#![no_std]
// index loops read closer to the formulas; `!(x > 0.0)` is deliberate so NaN fails
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod decay;
mod error;
pub mod fit;
pub mod initial;
pub mod integrator;
pub mod model;
pub mod nonlinearity;
pub mod quadrature;
pub mod spectral;
mod vecops;

pub use error::{Error, Result};
pub use integrator::{Method, Schedule, Trajectory};
pub use model::{DampedSystem, EigenData, Generator};
pub use nonlinearity::{Nonlinearity, RadialProfile};

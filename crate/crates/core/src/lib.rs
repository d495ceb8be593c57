//! One-dimensional time-dependent Schrödinger lab for tunnel-ionization
//! time delays of a soft-core atom in a Gaussian field pulse.
//!
//! Everything numerical is generic over [`num::Real`] (`f32` or `f64`); the
//! aliases below fix the usual double-precision instantiation.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod atom;
pub mod detector;
pub mod error;
pub mod grid;
pub mod num;
pub mod output;
pub mod pipeline;
pub mod propagator;
pub mod spectrum;

pub use error::{Error, Result};

pub type Grid = grid::Grid<f64>;
pub type Wavefunction = grid::Wavefunction<f64>;
pub type AtomFieldModel = atom::AtomFieldModel<f64>;
pub type EigenPair = spectrum::EigenPair<f64>;

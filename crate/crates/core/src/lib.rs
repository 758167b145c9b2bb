//! Recursive estimation of quantum state vectors from measured observables.
//!
//! The crate simulates a small quantum system (unitary dynamics, measurement
//! operators, additive noise), runs a complex recursive-least-squares /
//! Kalman estimator against the resulting observables, and provides the
//! harness and file formats used to compare it with a memoryless
//! pseudo-inverse reconstruction.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimator;
pub mod harness;
pub mod io;
pub mod linalg;
pub mod quantum;
pub mod rng;

pub use error::{Error, Result};

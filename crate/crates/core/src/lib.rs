//! Finite elements with constraints imposed through Nitsche-type energy
//! terms, solved by semismooth Newton iteration.
//!
//! The pipeline is: build meshes ([`mesh`]), choose element families
//! ([`elements`]), describe the energy as a list of terms ([`forms`],
//! [`assembly`]), and minimize it ([`solver`]). Ready-made problem setups
//! live in [`problems`]; [`harness`] runs convergence and conditioning
//! studies and writes their output.

#![allow(clippy::needless_range_loop, clippy::type_complexity)]

pub mod assembly;
pub mod autodiff;
pub mod elements;
pub mod error;
pub mod forms;
pub mod harness;
pub mod mesh;
pub mod problems;
pub mod quadrature;
pub mod solver;

pub use error::{Error, Result};

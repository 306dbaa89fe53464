//! Bloch-wave homogenization of periodic second-order operators.

pub mod cell;
pub mod cli;
pub mod error;
pub mod estimates;
pub mod fiber;
pub mod fields;
pub mod gallery;
pub mod io;
pub mod germ;
pub mod lattice;
pub mod linalg;

pub use error::{HomogError, Result};

//! Exact polyhedral variational analysis.

pub mod calculus;
pub mod cli;
pub mod cones;
pub mod constraint;
pub mod error;
pub mod geometry;
pub mod maps;
pub mod verify;

pub use error::{Error, Result};

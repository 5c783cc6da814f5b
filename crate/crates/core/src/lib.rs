//! Best Diophantine approximations of real matrices under block norms, and
//! empirical statistics of their sequences.
pub mod bestapprox;
pub mod dynamics;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod lattice;
pub mod numerics;
pub mod sampling;
pub mod stats;

pub use error::{Error, Result};

//! Trace-polynomial calculus, exact GUE and free-semicircular oracles, Langevin sampling of
//! convex multimatrix models, and numerical transport maps from the GUE.

pub mod algebra;
pub mod error;
pub mod harness;
pub mod langevin;
pub mod matrix;
pub mod rng;
pub mod semicircle;
pub mod stats;
pub mod transport;
pub mod wick;

pub use error::{Error, Result};

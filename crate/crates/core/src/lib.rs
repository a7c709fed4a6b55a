//! Finite-volume solver for nonlocal cross-diffusion systems on periodic
//! Cartesian meshes, using a generalized Scharfetter-Gummel flux.

pub mod conv;
pub mod diagnostics;
pub mod error;
pub mod harness;
pub mod kernel;
pub mod linsys;
pub mod mesh;
pub mod quadrature;
pub mod scheme;
pub mod weights;

pub use error::{Error, Result};

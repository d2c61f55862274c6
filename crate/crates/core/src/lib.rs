//! Randomized feature maps for the polynomial kernel `k(x, y) = (xᵀy)^p`.
//!
//! Real, complex and complex-to-real (CtR) variants of Gaussian, Rademacher
//! and ProductSRHT sketches, TensorSketch, closed-form variance formulas and
//! an evaluation harness.

pub mod error;
pub mod linalg;
pub mod randomness;
pub mod sketches;
pub mod theory;
pub mod eval;
pub mod cli;

pub use error::{Error, Result};

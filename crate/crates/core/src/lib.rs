//! FFT-based homogenization of periodic scalar-elliptic media.
//!
//! The cell problem is discretized by trigonometric polynomials with
//! trapezoidal quadrature (GaNi), solved matrix-free by projected conjugate
//! gradients, and post-processed into guaranteed upper and lower bounds on
//! the homogenized matrix using exact double-grid quadrature.

pub mod bounds;
pub mod driver;
pub mod error;
pub mod grid;
pub mod material;
pub mod projections;
pub mod solver;
pub mod spectral;

pub use error::{Error, Result};

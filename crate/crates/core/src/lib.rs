//! Adaptive mixed finite elements for the Hodge Laplacian on two-dimensional triangle meshes.
//!
//! The crate is generic over the floating point type; `f64` aliases are provided for the
//! common case.

pub mod adaptivity;
pub mod diagnostics;
pub mod error;
pub mod estimators;
pub mod forms;
pub mod linalg;
pub mod mesh;
pub mod problems;
pub mod quadrature;
pub mod report;
pub mod scalar;
pub mod solver;
pub mod sparse;

pub use error::{HodgeError, Result};
pub use scalar::Real;

pub type Mesh64 = mesh::Mesh<f64>;
pub type Mesh32 = mesh::Mesh<f32>;
pub type FormSpace64 = forms::FormSpace<f64>;
pub type AnalyticForm64 = forms::AnalyticForm<f64>;

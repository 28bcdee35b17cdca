//! Numerical homogenization of elliptic coefficients through parabolic cell
//! problems on a finite sampling box, with filtered averaging and elliptic
//! baselines for comparison.

pub mod coeffs;
pub mod error;
pub mod fem;
pub mod filters;
pub mod linsolve;
pub mod mesh;
mod par;
pub mod parabolic;
pub mod quadrature;
pub mod sparse;
pub mod tensor;
pub mod upscale;

pub use coeffs::{CoefficientField, Profile};
pub use error::{HomogError, Result};
pub use fem::FemSystem;
pub use filters::{averaging_error_probe, filter_normalization, FilterSpec};
pub use linsolve::{cg_solve, cg_solve_projected, CgOptions, SolveReport};
pub use mesh::StructuredMesh;
pub use sparse::CsrMatrix;
pub use tensor::Tensor;
pub use parabolic::{TimeMode, TimeOptions};
pub use upscale::{Method, ParameterChoice, UpscaleResult};

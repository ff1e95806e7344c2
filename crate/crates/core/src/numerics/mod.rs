//! Dense complex kernels shared by every other module.
//!
//! The kernels are generic over [`Scalar`] so they also run in single
//! precision; the optimizer layers above use `f64` through the crate-root
//! aliases.

mod dense;
mod eigen;
mod lse;
mod scalar;

pub use dense::{CMatrix, CVector};
pub use eigen::{lambda_max_hermitian, HERMITIAN_TOL, POWER_ITER_CAP};
pub use lse::{logsumexp_stable, softmin_weights};
pub use scalar::{approx_eq, Scalar};

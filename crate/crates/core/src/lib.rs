//! Joint base-station precoding and IRS phase design for multigroup multicast
//! MISO downlinks.
//!
//! The objective is the sum over groups of the worst member rate. Two
//! alternating majorization–minimization solvers are provided:
//!
//! * [`alg1`] maximizes a concave rate bound per block with an embedded
//!   interior-point QCQP solver ([`subsolver`]) and projects the relaxed
//!   reflection vector back to unit modulus.
//! * [`alg2`] smooths the inner minimum with a log-sum-exp, minorizes each
//!   block by an isotropic quadratic with a closed-form maximizer, and
//!   accelerates the resulting fixed-point maps with safeguarded SQUAREM.
//!
//! [`channel`] draws the three-link geometry-based channels, [`baselines`]
//! covers the no-IRS and quantized-phase comparisons plus energy efficiency,
//! and [`harness`] runs Monte-Carlo sweeps and writes CSV tables.
//!
//! Optimizer code works in `f64` through the aliases below; the dense kernels
//! in [`numerics`] are generic over [`numerics::Scalar`].

pub mod alg1;
pub mod alg2;
pub mod baselines;
pub mod channel;
pub mod error;
pub mod harness;
pub mod kkt;
pub mod model;
pub mod numerics;
pub mod subsolver;
pub mod surrogate;

pub use error::{Error, Result};

pub type Real = f64;
pub type Cplx = num_complex::Complex<f64>;
pub type CMat = numerics::CMatrix<f64>;
pub type CVec = numerics::CVector<f64>;

pub(crate) const LN2: f64 = std::f64::consts::LN_2;

use std::fmt::Debug;
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};

/// Real floating-point type the dense kernels are generic over: `f32` or `f64`.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + NumAssign + Sum + Default + Debug + Send + Sync + 'static
{
    /// Absolute fallback used when a relative comparison involves a value near zero.
    fn abs_floor() -> Self;

    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }
}

impl Scalar for f32 {
    fn abs_floor() -> Self {
        1e-6
    }
}

impl Scalar for f64 {
    fn abs_floor() -> Self {
        1e-12
    }
}

/// Relative/absolute closeness used across the crate: `|a - b| <= tol * max(|a|, |b|)`,
/// falling back to `tol` itself when both values sit below the absolute floor.
pub fn approx_eq<T: Scalar>(a: T, b: T, tol: T) -> bool {
    let scale = a.abs().max(b.abs());
    let diff = (a - b).abs();
    if scale <= T::abs_floor() {
        diff <= tol.max(T::abs_floor())
    } else {
        diff <= tol * scale
    }
}

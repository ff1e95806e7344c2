use num_complex::Complex;

use super::dense::{CMatrix, CVector};
use super::scalar::Scalar;
use crate::error::NumericsError;

/// Iteration cap for the power method.
pub const POWER_ITER_CAP: usize = 10_000;

/// Hermitian tolerance on `max |X - X^H| / max |X|` accepted by the eigen kernels.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Largest eigenvalue of a Hermitian matrix by shifted power iteration.
///
/// The matrix is shifted by a Gershgorin bound so the iterated operator is
/// positive semidefinite and the dominant eigenvalue is the algebraically
/// largest one. Iteration stops when the eigen-residual `‖Xv − ρv‖` falls below
/// `tol · max(|ρ|, floor)`, which bounds the eigenvalue error by the same
/// quantity. The start vector is a fixed deterministic sequence, so identical
/// inputs give bit-identical outputs.
pub fn lambda_max_hermitian<T: Scalar>(x: &CMatrix<T>, tol: T) -> Result<T, NumericsError> {
    let n = x.rows();
    if n == 0 || x.cols() != n {
        return Err(NumericsError::Shape {
            op: "lambda_max_hermitian",
            rows: x.rows(),
            cols: x.cols(),
        });
    }
    if !(tol > T::zero()) {
        return Err(NumericsError::InvalidArgument("tolerance must be positive"));
    }
    if !x.is_finite() {
        return Err(NumericsError::NonFinite("lambda_max_hermitian"));
    }
    let dev = x.hermitian_deviation();
    if dev > T::lit(HERMITIAN_TOL) {
        return Err(NumericsError::NotHermitian {
            deviation: dev.to_f64().unwrap_or(f64::INFINITY),
        });
    }
    if n == 1 {
        return Ok(x[(0, 0)].re);
    }

    let mut lower = T::infinity();
    let mut scale = T::zero();
    for i in 0..n {
        let radius: T = (0..n).filter(|&j| j != i).map(|j| x[(i, j)].norm()).sum();
        lower = lower.min(x[(i, i)].re - radius);
        scale = scale.max(x[(i, i)].re.abs() + radius);
    }
    if scale == T::zero() {
        return Ok(T::zero());
    }
    let shift = T::zero().max(-lower);
    let floor = scale * T::lit(1e-14);

    let mut v = start_vector::<T>(n);
    let mut best = T::neg_infinity();
    for _ in 0..POWER_ITER_CAP {
        let xv = x.mul_vec(&v);
        let rho = v.dot(&xv).re;
        best = best.max(rho);
        let mut resid = xv.clone();
        resid.axpy(Complex::new(-rho, T::zero()), &v);
        if resid.norm() <= tol * rho.abs().max(floor) {
            return Ok(rho);
        }
        let mut w = xv;
        w.axpy(Complex::new(shift, T::zero()), &v);
        let nw = w.norm();
        if nw == T::zero() {
            // Shifted operator annihilated v: v lies in the eigenspace of -shift.
            return Ok(rho);
        }
        v = w.scale_real(T::one() / nw);
    }
    Err(NumericsError::NoConvergence {
        iterations: POWER_ITER_CAP,
        best_estimate: best.to_f64().unwrap_or(f64::NAN),
    })
}

/// Deterministic, non-degenerate unit start vector. Derived from a fixed
/// integer hash so it has a component along every eigenvector with probability
/// one for generic inputs.
fn start_vector<T: Scalar>(n: usize) -> CVector<T> {
    let mut state: u64 = 0x9E37_79B9_7F4A_7C15;
    let mut next = || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        T::lit((state >> 11) as f64 / (1u64 << 53) as f64 + 0.5)
    };
    let v = CVector::from_fn(n, |_| {
        let re = next();
        let im = next() - T::lit(1.0);
        Complex::new(re, im)
    });
    let nv = v.norm();
    v.scale_real(T::one() / nv)
}

#[cfg(test)]
mod tests {
    use super::*;

    type C = Complex<f64>;

    #[test]
    fn identity_gives_one() {
        let x = CMatrix::<f64>::identity(3);
        assert!((lambda_max_hermitian(&x, 1e-10).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn diagonal_gives_largest_entry() {
        let d = CVector::from_vec(vec![C::new(1.0, 0.0), C::new(3.0, 0.0), C::new(2.0, 0.0)]);
        let x = CMatrix::from_diag(&d);
        assert!((lambda_max_hermitian(&x, 1e-10).unwrap() - 3.0).abs() < 1e-8);
    }

    #[test]
    fn negative_definite_picks_algebraic_max() {
        let d = CVector::from_vec(vec![C::new(-5.0, 0.0), C::new(-1.0, 0.0)]);
        let x = CMatrix::from_diag(&d);
        assert!((lambda_max_hermitian(&x, 1e-10).unwrap() + 1.0).abs() < 1e-8);
    }

    #[test]
    fn rejects_non_hermitian() {
        let x = CMatrix::from_fn(2, 2, |i, j| C::new((i + 2 * j) as f64, 0.0));
        assert!(matches!(
            lambda_max_hermitian(&x, 1e-10),
            Err(NumericsError::NotHermitian { .. })
        ));
    }

    #[test]
    fn zero_matrix_is_zero() {
        let x = CMatrix::<f64>::zeros(4, 4);
        assert_eq!(lambda_max_hermitian(&x, 1e-10).unwrap(), 0.0);
    }

    #[test]
    fn works_in_single_precision() {
        let d = CVector::from_vec(vec![Complex::new(2.0f32, 0.0), Complex::new(0.5, 0.0)]);
        let x = CMatrix::from_diag(&d);
        assert!((lambda_max_hermitian(&x, 1e-5f32).unwrap() - 2.0).abs() < 1e-4);
    }
}

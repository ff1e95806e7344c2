//! Row-major dense complex matrices and vectors.
//!
//! Entries are `Complex<T>`, which is `#[repr(C)]` so storage is interleaved
//! real/imaginary pairs. Serialized form is `{"rows", "cols", "data"}` with
//! `data` a row-major list of `[re, im]` pairs.

use std::ops::{Add, AddAssign, Deref, DerefMut, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use super::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct CVector<T> {
    data: Vec<Complex<T>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct CMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<Complex<T>>,
}

impl<T: Scalar> CVector<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            data: vec![Complex::new(T::zero(), T::zero()); n],
        }
    }

    pub fn from_vec(data: Vec<Complex<T>>) -> Self {
        Self { data }
    }

    pub fn from_fn(n: usize, f: impl FnMut(usize) -> Complex<T>) -> Self {
        Self {
            data: (0..n).map(f).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[Complex<T>] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<Complex<T>> {
        self.data
    }

    /// Hermitian inner product `self^H other`.
    pub fn dot(&self, other: &Self) -> Complex<T> {
        assert_eq!(self.len(), other.len(), "dot: length mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .fold(Complex::new(T::zero(), T::zero()), |acc, (a, b)| acc + a.conj() * b)
    }

    pub fn norm_sqr(&self) -> T {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> T {
        self.norm_sqr().sqrt()
    }

    pub fn norm_l1(&self) -> T {
        self.data.iter().map(|z| z.norm()).sum()
    }

    pub fn scale(&self, s: Complex<T>) -> Self {
        Self::from_vec(self.data.iter().map(|z| z * s).collect())
    }

    pub fn scale_real(&self, s: T) -> Self {
        Self::from_vec(self.data.iter().map(|z| z * s).collect())
    }

    pub fn conj(&self) -> Self {
        Self::from_vec(self.data.iter().map(|z| z.conj()).collect())
    }

    pub fn map(&self, f: impl FnMut(&Complex<T>) -> Complex<T>) -> Self {
        Self::from_vec(self.data.iter().map(f).collect())
    }

    /// `self += s * other`
    pub fn axpy(&mut self, s: Complex<T>, other: &Self) {
        assert_eq!(self.len(), other.len(), "axpy: length mismatch");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    /// Outer product `self * other^H`.
    pub fn outer(&self, other: &Self) -> CMatrix<T> {
        CMatrix::from_fn(self.len(), other.len(), |i, j| self.data[i] * other.data[j].conj())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

impl<T: Scalar> CMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex::new(T::zero(), T::zero()); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| {
            if i == j {
                Complex::new(T::one(), T::zero())
            } else {
                Complex::new(T::zero(), T::zero())
            }
        })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex<T>) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<Complex<T>>) -> Self {
        assert_eq!(data.len(), rows * cols, "from_row_major: size mismatch");
        Self { rows, cols, data }
    }

    pub fn from_diag(d: &CVector<T>) -> Self {
        let n = d.len();
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = d[i];
        }
        m
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_columns(cols: &[CVector<T>]) -> Self {
        let ncols = cols.len();
        let nrows = cols.first().map_or(0, |c| c.len());
        Self::from_fn(nrows, ncols, |i, j| cols[j][i])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[Complex<T>] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[Complex<T>] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> CVector<T> {
        CVector::from_fn(self.rows, |i| self[(i, j)])
    }

    pub fn set_column(&mut self, j: usize, v: &CVector<T>) {
        assert_eq!(v.len(), self.rows, "set_column: length mismatch");
        for i in 0..self.rows {
            self[(i, j)] = v[i];
        }
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn conj(&self) -> Self {
        Self::from_row_major(self.rows, self.cols, self.data.iter().map(|z| z.conj()).collect())
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.rows, "matmul: inner dimension mismatch");
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a.re == T::zero() && a.im == T::zero() {
                    continue;
                }
                let rhs_row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                for (o, b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &CVector<T>) -> CVector<T> {
        assert_eq!(self.cols, v.len(), "mul_vec: dimension mismatch");
        CVector::from_fn(self.rows, |i| {
            self.row(i)
                .iter()
                .zip(v.as_slice())
                .fold(Complex::new(T::zero(), T::zero()), |acc, (a, b)| acc + a * b)
        })
    }

    /// `self^H v` without materializing the adjoint.
    pub fn adjoint_mul_vec(&self, v: &CVector<T>) -> CVector<T> {
        assert_eq!(self.rows, v.len(), "adjoint_mul_vec: dimension mismatch");
        let mut out = CVector::zeros(self.cols);
        for i in 0..self.rows {
            let vi = v[i];
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a.conj() * vi;
            }
        }
        out
    }

    pub fn scale(&self, s: Complex<T>) -> Self {
        Self::from_row_major(self.rows, self.cols, self.data.iter().map(|z| z * s).collect())
    }

    pub fn scale_real(&self, s: T) -> Self {
        Self::from_row_major(self.rows, self.cols, self.data.iter().map(|z| z * s).collect())
    }

    /// `self += s * other`
    pub fn axpy(&mut self, s: Complex<T>, other: &Self) {
        assert_eq!(self.shape(), other.shape(), "axpy: shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    pub fn frobenius_sqr(&self) -> T {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn frobenius(&self) -> T {
        self.frobenius_sqr().sqrt()
    }

    pub fn trace(&self) -> Complex<T> {
        (0..self.rows.min(self.cols))
            .map(|i| self[(i, i)])
            .fold(Complex::new(T::zero(), T::zero()), |a, b| a + b)
    }

    /// Frobenius inner product `Tr[self^H other]`.
    pub fn inner(&self, other: &Self) -> Complex<T> {
        assert_eq!(self.shape(), other.shape(), "inner: shape mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .fold(Complex::new(T::zero(), T::zero()), |acc, (a, b)| acc + a.conj() * b)
    }

    /// Largest element-wise deviation `|X - X^H|`, relative to the largest entry.
    pub fn hermitian_deviation(&self) -> T {
        if self.rows != self.cols {
            return T::infinity();
        }
        let mut dev = T::zero();
        let mut scale = T::zero();
        for i in 0..self.rows {
            for j in 0..self.cols {
                let a = self[(i, j)];
                scale = scale.max(a.norm());
                dev = dev.max((a - self[(j, i)].conj()).norm());
            }
        }
        if scale <= T::abs_floor() {
            dev
        } else {
            dev / scale
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Column-stacked vectorization `vec(X)`.
    pub fn vectorize(&self) -> CVector<T> {
        CVector::from_fn(self.rows * self.cols, |idx| self[(idx % self.rows, idx / self.rows)])
    }

    pub fn from_vectorized(rows: usize, cols: usize, v: &CVector<T>) -> Self {
        assert_eq!(v.len(), rows * cols, "from_vectorized: size mismatch");
        Self::from_fn(rows, cols, |i, j| v[j * rows + i])
    }
}

impl<T> Deref for CVector<T> {
    type Target = [Complex<T>];
    fn deref(&self) -> &[Complex<T>] {
        &self.data
    }
}

impl<T> DerefMut for CVector<T> {
    fn deref_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.data
    }
}

impl<T> Index<(usize, usize)> for CMatrix<T> {
    type Output = Complex<T>;
    fn index(&self, (i, j): (usize, usize)) -> &Complex<T> {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for CMatrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex<T> {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

macro_rules! elementwise_ops {
    ($ty:ident, $check:expr) => {
        impl<T: Scalar> Add for &$ty<T> {
            type Output = $ty<T>;
            fn add(self, rhs: Self) -> $ty<T> {
                let mut out = self.clone();
                out += rhs;
                out
            }
        }

        impl<T: Scalar> Sub for &$ty<T> {
            type Output = $ty<T>;
            fn sub(self, rhs: Self) -> $ty<T> {
                let mut out = self.clone();
                out -= rhs;
                out
            }
        }

        impl<T: Scalar> AddAssign<&$ty<T>> for $ty<T> {
            fn add_assign(&mut self, rhs: &$ty<T>) {
                $check(&*self, rhs);
                for (a, b) in self.data.iter_mut().zip(&rhs.data) {
                    *a += b;
                }
            }
        }

        impl<T: Scalar> SubAssign<&$ty<T>> for $ty<T> {
            fn sub_assign(&mut self, rhs: &$ty<T>) {
                $check(&*self, rhs);
                for (a, b) in self.data.iter_mut().zip(&rhs.data) {
                    *a -= b;
                }
            }
        }

        impl<T: Scalar> Mul<T> for &$ty<T> {
            type Output = $ty<T>;
            fn mul(self, rhs: T) -> $ty<T> {
                self.scale_real(rhs)
            }
        }

        impl<T: Scalar> Neg for &$ty<T> {
            type Output = $ty<T>;
            fn neg(self) -> $ty<T> {
                self.scale_real(-T::one())
            }
        }
    };
}

elementwise_ops!(CVector, |a: &CVector<T>, b: &CVector<T>| assert_eq!(
    a.len(),
    b.len(),
    "vector length mismatch"
));
elementwise_ops!(CMatrix, |a: &CMatrix<T>, b: &CMatrix<T>| assert_eq!(
    a.shape(),
    b.shape(),
    "matrix shape mismatch"
));

#[cfg(test)]
mod tests {
    use super::*;

    type C = Complex<f64>;

    #[test]
    fn matmul_and_adjoint_agree() {
        let a = CMatrix::from_fn(2, 3, |i, j| C::new(i as f64 + 1.0, j as f64 - 1.0));
        let b = CMatrix::from_fn(3, 2, |i, j| C::new(j as f64, 0.5 * i as f64));
        let ab = a.matmul(&b);
        let bh_ah = b.adjoint().matmul(&a.adjoint());
        assert!((&ab.adjoint() - &bh_ah).frobenius() < 1e-14);
    }

    #[test]
    fn vectorize_is_column_stacked() {
        let a = CMatrix::from_fn(2, 2, |i, j| C::new((i + 2 * j) as f64, 0.0));
        let v = a.vectorize();
        let re: Vec<f64> = v.iter().map(|z| z.re).collect();
        assert_eq!(re, vec![0.0, 1.0, 2.0, 3.0]);
        assert_eq!(CMatrix::from_vectorized(2, 2, &v), a);
    }

    #[test]
    fn adjoint_mul_vec_matches_explicit() {
        let a = CMatrix::from_fn(3, 2, |i, j| C::new(i as f64 - j as f64, (i * j) as f64));
        let v = CVector::from_fn(3, |i| C::new(1.0, i as f64));
        let lhs = a.adjoint_mul_vec(&v);
        let rhs = a.adjoint().mul_vec(&v);
        assert!((&lhs - &rhs).norm() < 1e-14);
    }

    #[test]
    fn serde_roundtrip_is_row_major_pairs() {
        let a = CMatrix::from_fn(1, 2, |_, j| C::new(j as f64, -1.0));
        let s = serde_json::to_string(&a).unwrap();
        assert_eq!(s, r#"{"rows":1,"cols":2,"data":[[0.0,-1.0],[1.0,-1.0]]}"#);
        let back: CMatrix<f64> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, a);
    }
}

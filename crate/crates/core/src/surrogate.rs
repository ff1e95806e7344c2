//! Concave minorizer of the per-user rate around an expansion point.
//!
//! For user `k` in group `g`, with `t = e^H H_k f_g`, interference-plus-noise
//! `r₋ = Σ_{i≠g}|e^H H_k f_i|² + σ²` and total `r = r₋ + |t|²`, the rate in
//! nats is bounded below by
//!
//! ```text
//! R̃_k(F, e) = c_k + 2·Re{a_k · e^H H_k f_g} − b_k · Σ_i |e^H H_k f_i|²
//! a_k = conj(t)/r₋,   b_k = |t|²/(r₋·r),   c_k = R_k − b_k σ² − b_k r
//! ```
//!
//! with equality at the expansion point. For fixed `e` this is
//! `c_k + 2 Re Tr[C_k^H F] − Tr[F^H B_k F]`; for fixed `F` it is
//! `c_k + 2 Re{a_k^H e} − e^H A_k e`.

use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::numerics::lambda_max_hermitian;
use crate::model::{all_rates_nats, Precoder, ReflectVector, Scenario};
use crate::{CMat, CVec, Cplx, LN2};

/// Surrogate coefficients of one user.
#[derive(Clone, Debug, PartialEq)]
pub struct UserCoeffs {
    pub group: usize,
    pub a: Cplx,
    pub b: f64,
    /// Constant term, in nats.
    pub constant: f64,
    /// `H_k^H e^n`.
    pub h: CVec,
    /// `H_k f_i^n` for every group `i`.
    pub w: Vec<CVec>,
    /// Exact rate at the expansion point, in nats.
    pub rate: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SurrogateCoeffs {
    pub users: Vec<UserCoeffs>,
    pub f_n: CMat,
    pub e_n: CVec,
    h_eq: Vec<CMat>,
    groups: Vec<Vec<usize>>,
}

/// Which representation of the bound to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Form {
    Joint,
    /// Quadratic in `F`, valid at the expansion `e`.
    FQuadratic,
    /// Quadratic in `e`, valid at the expansion `F`.
    EQuadratic,
}

const FORM_MATCH_TOL: f64 = 1e-12;

pub fn lemma1_coeffs(sc: &Scenario, ch: &ChannelSet, f: &Precoder, e: &ReflectVector) -> SurrogateCoeffs {
    coeffs_raw(sc, ch, &f.0, e.as_vec())
}

/// Coefficients at an arbitrary `(F, e)`; `e` need not be unit modulus.
pub fn coeffs_raw(sc: &Scenario, ch: &ChannelSet, f: &CMat, e: &CVec) -> SurrogateCoeffs {
    let rates = all_rates_nats(sc, ch, f, e);
    let users = (0..sc.n_users())
        .map(|k| {
            let hk = &ch.h_eq[k];
            let g = sc.group_of(k);
            let h = hk.adjoint_mul_vec(e);
            let w: Vec<CVec> = (0..f.cols()).map(|i| hk.mul_vec(&f.column(i))).collect();
            let mut t = Cplx::new(0.0, 0.0);
            let mut r_minus = ch.noise[k];
            for (i, wi) in w.iter().enumerate() {
                let y = e.dot(wi);
                if i == g {
                    t = y;
                } else {
                    r_minus += y.norm_sqr();
                }
            }
            let r = r_minus + t.norm_sqr();
            let a = t.conj() / r_minus;
            let b = t.norm_sqr() / (r_minus * r);
            let constant = rates[k] - b * ch.noise[k] - b * r;
            UserCoeffs {
                group: g,
                a,
                b,
                constant,
                h,
                w,
                rate: rates[k],
            }
        })
        .collect();
    SurrogateCoeffs {
        users,
        f_n: f.clone(),
        e_n: e.clone(),
        h_eq: ch.h_eq.clone(),
        groups: sc.groups().to_vec(),
    }
}

impl SurrogateCoeffs {
    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    /// `B_k = b_k h h^H` with `h = H_k^H e^n`.
    pub fn b_mat(&self, k: usize) -> CMat {
        let u = &self.users[k];
        u.h.outer(&u.h).scale_real(u.b)
    }

    /// `C_k`: column `g` is `conj(a_k)·h`, other columns zero.
    pub fn c_mat(&self, k: usize) -> CMat {
        let u = &self.users[k];
        let mut c = CMat::zeros(u.h.len(), u.w.len());
        c.set_column(u.group, &u.h.scale(u.a.conj()));
        c
    }

    /// `A_k = b_k Σ_i (H_k f_i)(H_k f_i)^H`.
    pub fn a_mat(&self, k: usize) -> CMat {
        let u = &self.users[k];
        let d = u.w[0].len();
        let mut a = CMat::zeros(d, d);
        for wi in &u.w {
            a += &wi.outer(wi);
        }
        a.scale_real(u.b)
    }

    /// `λ_max(A_k)` through the `G×G` Gram matrix `b·[w_i^H w_j]`, which has
    /// the same nonzero spectrum as `A_k = b Σ w_i w_i^H`.
    pub fn a_lambda_max(&self, k: usize, tol: f64) -> Result<f64> {
        let u = &self.users[k];
        let gram = CMat::from_fn(u.w.len(), u.w.len(), |i, j| u.w[i].dot(&u.w[j]) * u.b);
        Ok(lambda_max_hermitian(&gram, tol)?)
    }

    /// `a_k H_k f_g`.
    pub fn a_vec(&self, k: usize) -> CVec {
        let u = &self.users[k];
        u.w[u.group].scale(u.a)
    }

    /// Bound in nats for fixed expansion `e`, as a function of `F`.
    pub fn eval_f_nats(&self, k: usize, f: &CMat) -> f64 {
        let u = &self.users[k];
        let mut quad = 0.0;
        let mut lin = Cplx::new(0.0, 0.0);
        for i in 0..f.cols() {
            let y: Cplx = (0..f.rows()).map(|n| u.h[n].conj() * f[(n, i)]).sum();
            quad += y.norm_sqr();
            if i == u.group {
                lin = u.a * y;
            }
        }
        u.constant + 2.0 * lin.re - u.b * quad
    }

    /// Bound in nats for fixed expansion `F`, as a function of `e`.
    pub fn eval_e_nats(&self, k: usize, e: &CVec) -> f64 {
        let u = &self.users[k];
        let mut quad = 0.0;
        let mut lin = Cplx::new(0.0, 0.0);
        for (i, wi) in u.w.iter().enumerate() {
            let y = e.dot(wi);
            quad += y.norm_sqr();
            if i == u.group {
                lin = u.a * y;
            }
        }
        u.constant + 2.0 * lin.re - u.b * quad
    }

    /// Bound in nats at an arbitrary `(F, e)`.
    pub fn eval_joint_nats(&self, k: usize, f: &CMat, e: &CVec) -> f64 {
        let u = &self.users[k];
        let h = self.h_eq[k].adjoint_mul_vec(e);
        let mut quad = 0.0;
        let mut lin = Cplx::new(0.0, 0.0);
        for i in 0..f.cols() {
            let y: Cplx = (0..f.rows()).map(|n| h[n].conj() * f[(n, i)]).sum();
            quad += y.norm_sqr();
            if i == u.group {
                lin = u.a * y;
            }
        }
        u.constant + 2.0 * lin.re - u.b * quad
    }

    /// `Σ_g min_{k∈g} R̃_k(F)` in nats at fixed expansion `e`.
    pub fn objective_f_nats(&self, f: &CMat) -> f64 {
        self.group_min_sum(|k| self.eval_f_nats(k, f))
    }

    /// `Σ_g min_{k∈g} R̃_k(e)` in nats at fixed expansion `F`.
    pub fn objective_e_nats(&self, e: &CVec) -> f64 {
        self.group_min_sum(|k| self.eval_e_nats(k, e))
    }

    fn group_min_sum(&self, eval: impl Fn(usize) -> f64) -> f64 {
        self.groups
            .iter()
            .map(|g| g.iter().map(|&k| eval(k)).fold(f64::INFINITY, f64::min))
            .sum()
    }
}

fn max_abs_diff_mat(a: &CMat, b: &CMat) -> f64 {
    a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn max_abs_diff_vec(a: &CVec, b: &CVec) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// `R̃_k(F, e | F^n, e^n)` in bps/Hz using the requested representation.
///
/// The quadratic forms only apply when the other block equals the expansion
/// point; a mismatch is an error.
pub fn surrogate_rate(
    coeffs: &SurrogateCoeffs,
    f: &Precoder,
    e: &ReflectVector,
    k: usize,
    form: Form,
) -> Result<f64> {
    if k >= coeffs.n_users() {
        return Err(Error::Index {
            index: k,
            len: coeffs.n_users(),
        });
    }
    let nats = match form {
        Form::Joint => coeffs.eval_joint_nats(k, &f.0, e.as_vec()),
        Form::FQuadratic => {
            if e.as_vec().len() != coeffs.e_n.len() || max_abs_diff_vec(e.as_vec(), &coeffs.e_n) > FORM_MATCH_TOL {
                return Err(Error::FormMismatch("F-quadratic form needs e at the expansion point"));
            }
            coeffs.eval_f_nats(k, &f.0)
        }
        Form::EQuadratic => {
            if f.0.shape() != coeffs.f_n.shape() || max_abs_diff_mat(&f.0, &coeffs.f_n) > FORM_MATCH_TOL {
                return Err(Error::FormMismatch("e-quadratic form needs F at the expansion point"));
            }
            coeffs.eval_e_nats(k, e.as_vec())
        }
    };
    Ok(nats / LN2)
}

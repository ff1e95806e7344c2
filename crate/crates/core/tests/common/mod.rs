//! Test-only oracles: explicit curvature matrices, grid searches and dense
//! eigensolvers built on nalgebra.
#![allow(dead_code)]

use irs_multicast::alg2::MinorizerF;
use irs_multicast::channel::{gen_channels, ChannelConfig, ChannelSet};
use irs_multicast::model::{Precoder, ReflectVector, Scenario};
use irs_multicast::numerics::{logsumexp_stable, softmin_weights};
use irs_multicast::subsolver::{
    lift_vec, solve_maxmin_qcqp, unlift_vec, BallConstraint, MaxMinQcqp, QcqpOptions, QuadConstraint,
};
use irs_multicast::surrogate::SurrogateCoeffs;
use irs_multicast::{CMat, CVec, Cplx};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

pub type NaMat = DMatrix<Cplx>;

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// N=4, M=16, G=2, K=4 at 20 dBm.
pub fn desk_scenario() -> Scenario {
    Scenario::uniform_groups(4, 16, 2, 2, 0.1).unwrap()
}

pub fn desk_instance(seed: u64) -> (Scenario, ChannelSet) {
    let sc = desk_scenario();
    let ch = gen_channels(&ChannelConfig::default(), &sc, seed).unwrap();
    (sc, ch)
}

pub fn cgauss(r: &mut impl Rng) -> Cplx {
    let re: f64 = r.sample(StandardNormal);
    let im: f64 = r.sample(StandardNormal);
    Cplx::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Random precoder with `‖F‖_F² = P_T · u`, `u` uniform on `[0, 1]`.
pub fn random_precoder(sc: &Scenario, r: &mut impl Rng) -> CMat {
    let f = CMat::from_fn(sc.n_antennas, sc.n_groups(), |_, _| cgauss(r));
    let u: f64 = r.random();
    f.scale_real((sc.p_t * u).sqrt() / f.frobenius())
}

pub fn random_reflect(m: usize, r: &mut impl Rng) -> ReflectVector {
    let phases: Vec<f64> = (0..m).map(|_| r.random_range(0.0..std::f64::consts::TAU)).collect();
    ReflectVector::from_phases(&phases)
}

pub fn random_point(sc: &Scenario, r: &mut impl Rng) -> (Precoder, ReflectVector) {
    (Precoder(random_precoder(sc, r)), random_reflect(sc.n_elements, r))
}

pub fn to_na(a: &CMat) -> NaMat {
    DMatrix::from_fn(a.rows(), a.cols(), |i, j| a[(i, j)])
}

pub fn hermitian_eigs(a: &NaMat) -> Vec<f64> {
    let mut v: Vec<f64> = a.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

pub fn lambda_min(a: &NaMat) -> f64 {
    hermitian_eigs(a)[0]
}

pub fn lambda_max(a: &NaMat) -> f64 {
    *hermitian_eigs(a).last().unwrap()
}

/// `[v; v*]`.
fn stacked(v: &CVec) -> DVector<Cplx> {
    let n = v.len();
    DVector::from_fn(2 * n, |i, _| if i < n { v[i] } else { v[i - n].conj() })
}

fn block_diag(a: &NaMat, b: &NaMat) -> NaMat {
    let (n, m) = (a.nrows(), b.nrows());
    let mut out = DMatrix::zeros(n + m, n + m);
    out.view_mut((0, 0), (n, n)).copy_from(a);
    out.view_mut((n, n), (m, m)).copy_from(b);
    out
}

fn kron_identity(blocks: usize, b: &NaMat) -> NaMat {
    let n = b.nrows();
    let mut out = DMatrix::zeros(blocks * n, blocks * n);
    for i in 0..blocks {
        out.view_mut((i * n, i * n), (n, n)).copy_from(b);
    }
    out
}

/// Assembles `Σ g_k·blockdiag(−X_k, −X_kᵀ) − μ Σ g_k ŝ_k ŝ_kᴴ + μ (Σ g_k ŝ_k)(Σ g_k ŝ_k)ᴴ`
/// with `ŝ_k = [q_k; q_k*]`.
fn curvature(xs: &[NaMat], qs: &[CVec], weights: &[f64], mu: f64) -> NaMat {
    let n = 2 * qs[0].len();
    let mut out = DMatrix::<Cplx>::zeros(n, n);
    let mut mean = DVector::<Cplx>::zeros(n);
    for ((x, q), &w) in xs.iter().zip(qs).zip(weights) {
        let neg = -x.clone();
        let negt = -x.transpose();
        out += block_diag(&neg, &negt) * Cplx::new(w, 0.0);
        let s = stacked(q);
        out -= (&s * s.adjoint()) * Cplx::new(mu * w, 0.0);
        mean += s * Cplx::new(w, 0.0);
    }
    out += (&mean * mean.adjoint()) * Cplx::new(mu, 0.0);
    out
}

/// Second-derivative matrix of the smoothed F-block bound of group `g`
/// along `F(γ) = F^n + γ(F̃ − F^n)`.
pub fn phi_matrix(coeffs: &SurrogateCoeffs, g: usize, f_tilde: &CMat, gamma: f64, mu: f64) -> NaMat {
    let f_n = &coeffs.f_n;
    let mut f = f_n.clone();
    f.axpy(Cplx::new(gamma, 0.0), &(f_tilde - f_n));
    let members = &coeffs.groups()[g];
    let l: Vec<f64> = members.iter().map(|&k| coeffs.eval_f_nats(k, &f)).collect();
    let w = softmin_weights(&l, mu).unwrap();
    let cols = f.cols();
    let xs: Vec<NaMat> = members
        .iter()
        .map(|&k| kron_identity(cols, &to_na(&coeffs.b_mat(k))))
        .collect();
    let qs: Vec<CVec> = members
        .iter()
        .map(|&k| (&coeffs.c_mat(k) - &coeffs.b_mat(k).matmul(&f)).vectorize())
        .collect();
    curvature(&xs, &qs, &w, mu)
}

/// Second-derivative matrix of the smoothed e-block bound of group `g`
/// along `e(γ) = e^n + γ(ẽ − e^n)`.
pub fn psi_matrix(coeffs: &SurrogateCoeffs, g: usize, e_tilde: &CVec, gamma: f64, mu: f64) -> NaMat {
    let e_n = &coeffs.e_n;
    let mut e = e_n.clone();
    e.axpy(Cplx::new(gamma, 0.0), &(e_tilde - e_n));
    let members = &coeffs.groups()[g];
    let l: Vec<f64> = members.iter().map(|&k| coeffs.eval_e_nats(k, &e)).collect();
    let w = softmin_weights(&l, mu).unwrap();
    let xs: Vec<NaMat> = members.iter().map(|&k| to_na(&coeffs.a_mat(k))).collect();
    let qs: Vec<CVec> = members
        .iter()
        .map(|&k| &coeffs.a_vec(k) - &coeffs.a_mat(k).mul_vec(&e))
        .collect();
    curvature(&xs, &qs, &w, mu)
}

/// `[vᴴ vᵀ] X [v; v*]`, real for Hermitian `X`.
pub fn lifted_quad(x: &NaMat, v: &CVec) -> f64 {
    let s = stacked(v);
    (s.adjoint() * x * &s)[(0, 0)].re
}

/// Smoothed bound of group `g` in nats as a function of `F` at fixed `e^n`.
pub fn smoothed_f(coeffs: &SurrogateCoeffs, g: usize, f: &CMat, mu: f64) -> f64 {
    let l: Vec<f64> = coeffs.groups()[g].iter().map(|&k| coeffs.eval_f_nats(k, f)).collect();
    logsumexp_stable(&l, mu).unwrap()
}

pub fn smoothed_e(coeffs: &SurrogateCoeffs, g: usize, e: &CVec, mu: f64) -> f64 {
    let l: Vec<f64> = coeffs.groups()[g].iter().map(|&k| coeffs.eval_e_nats(k, e)).collect();
    logsumexp_stable(&l, mu).unwrap()
}

/// Maximizes `obj` over the box `lo..hi` by a uniform grid followed by
/// repeated zooming around the incumbent. Points where `obj` returns `None`
/// are infeasible.
pub fn grid_max(
    lo: &[f64],
    hi: &[f64],
    per_dim: usize,
    zooms: usize,
    obj: impl Fn(&[f64]) -> Option<f64>,
) -> (Vec<f64>, f64) {
    let d = lo.len();
    let mut lo = lo.to_vec();
    let mut hi = hi.to_vec();
    let mut best = (vec![0.0; d], f64::NEG_INFINITY);
    for _ in 0..=zooms {
        let total = per_dim.pow(d as u32);
        let mut x = vec![0.0; d];
        for idx in 0..total {
            let mut r = idx;
            for i in 0..d {
                let c = r % per_dim;
                r /= per_dim;
                x[i] = lo[i] + (hi[i] - lo[i]) * c as f64 / (per_dim - 1) as f64;
            }
            if let Some(v) = obj(&x) {
                if v > best.1 {
                    best = (x.clone(), v);
                }
            }
        }
        for i in 0..d {
            let w = 2.0 * (hi[i] - lo[i]) / (per_dim - 1) as f64;
            lo[i] = best.0[i] - w;
            hi[i] = best.0[i] + w;
        }
    }
    best
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Solves the F-block quadratic bound `max Σ_g [2Re⟨U_g,F⟩ + α_g‖F‖² + c_g]`
/// with the embedded solver.
pub fn solve_f_quadratic(sc: &Scenario, mf: &MinorizerF, f_n: &CMat) -> f64 {
    let (n, g) = f_n.shape();
    let s = sc.p_t.sqrt();
    let mut su = CMat::zeros(n, g);
    for u in &mf.u {
        su += u;
    }
    let sa: f64 = mf.alpha.iter().sum();
    let sc_cons: f64 = mf.cons.iter().sum();
    let dim = 2 * n * g;
    // In scaled variables F = s·X: c + 2s⟨ΣU, X⟩ + P·Σα ‖X‖².
    let mut hess = vec![0.0; dim * dim];
    for i in 0..dim {
        hess[i * dim + i] = -sa * sc.p_t;
    }
    let problem = MaxMinQcqp {
        dim,
        n_groups: 1,
        constraints: vec![QuadConstraint {
            group: 0,
            constant: sc_cons,
            linear: lift_vec(&su.vectorize().scale_real(s)),
            hessian: hess,
        }],
        balls: vec![BallConstraint {
            indices: (0..dim).collect(),
            radius_sq: 1.0,
        }],
    };
    let opts = QcqpOptions {
        tol: 1e-8,
        ..QcqpOptions::default()
    };
    let sol = solve_maxmin_qcqp(&problem, &vec![0.0; dim], &opts).unwrap();
    let x = CMat::from_vectorized(n, g, &unlift_vec(&sol.x)).scale_real(s);
    mf.eval(&x)
}

pub fn tiny_qcqp(r: &mut impl Rng) -> MaxMinQcqp {
    // One complex variable, two groups of two users each.
    let constraints = (0..4)
        .map(|j| {
            let a: f64 = r.random_range(0.1..2.0);
            let b: f64 = r.random_range(0.1..2.0);
            let c: f64 = r.random_range(-0.5..0.5);
            QuadConstraint {
                group: j / 2,
                constant: r.random_range(-1.0..1.0),
                linear: vec![r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)],
                hessian: vec![a, c, c, b + c * c / a],
            }
        })
        .collect();
    MaxMinQcqp {
        dim: 2,
        n_groups: 2,
        constraints,
        balls: vec![BallConstraint {
            indices: vec![0, 1],
            radius_sq: 1.0,
        }],
    }
}

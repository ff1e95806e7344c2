//! Low-complexity MM: log-sum-exp smoothing, isotropic quadratic minorizers
//! with closed-form maximizers, and safeguarded SQUAREM.
//!
//! The inner minimum of each group is replaced by
//! `f_g = −(1/μ) ln Σ_{k∈g} exp(−μ R̃_k)`, evaluated in nats. Around the
//! current block value, `f_g` is minorized by
//!
//! ```text
//! F-block:  consF_g + 2 Re Tr[U_g^H F] + α_g ‖F‖_F²
//! e-block:  consE_g + 2 Re{u_g^H e}               (using ‖e‖² = M+1)
//! ```
//!
//! whose maximizers are available in closed form. The block maps rebuild the
//! rate bound at their input, so every map application is an MM step on the
//! smoothed true objective `Φ(F, e) = Σ_g −(1/μ) ln Σ_k exp(−μ R_k)`, and the
//! SQUAREM safeguard compares `Φ` directly.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::channel::ChannelSet;
use crate::error::Result;
use crate::kkt::{alg2_kkt, smoothed_true_objective, Alg2Kkt};
use crate::model::{sum_rate_raw, ConvergenceTrace, IterRecord, Precoder, ReflectVector, Scenario};
use crate::numerics::{logsumexp_stable, softmin_weights};
use crate::surrogate::{coeffs_raw, SurrogateCoeffs};
use crate::{CMat, CVec, Cplx, LN2};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Alg2Config {
    /// Stop when the true objective changes by at most this much (bps/Hz).
    pub tol: f64,
    pub max_iters: usize,
    /// Smoothing parameter, applied to rates in nats.
    pub mu: f64,
    pub accelerate: bool,
    /// Backtracking halvings before falling back to the plain double map.
    pub backtrack_cap: usize,
    /// Relative tolerance of the largest-eigenvalue computations.
    pub eig_tol: f64,
}

impl Default for Alg2Config {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iters: 5000,
            mu: 100.0,
            accelerate: true,
            backtrack_cap: 60,
            eig_tol: 1e-10,
        }
    }
}

/// F-block minorizer around `coeffs.f_n`.
#[derive(Clone, Debug, PartialEq)]
pub struct MinorizerF {
    /// Softmin weight of each user within its group.
    pub weights: Vec<f64>,
    /// `D_g = Σ_k g_k (C_k − B_k F^n)`, the gradient of `f_g` at `F^n`.
    pub d: Vec<CMat>,
    pub u: Vec<CMat>,
    pub alpha: Vec<f64>,
    pub tp: Vec<f64>,
    pub cons: Vec<f64>,
}

/// e-block minorizer around `coeffs.e_n`.
#[derive(Clone, Debug, PartialEq)]
pub struct MinorizerE {
    pub weights: Vec<f64>,
    /// `d_g = Σ_k g_k (a_k − A_k e^n)`.
    pub d: Vec<CVec>,
    pub u: Vec<CVec>,
    pub beta: Vec<f64>,
    pub tp2: Vec<f64>,
    pub lambda_a: Vec<f64>,
    pub cons: Vec<f64>,
}

/// Extrapolation bookkeeping of one SQUAREM step.
#[derive(Clone, Debug, PartialEq)]
pub struct SquaremState {
    /// Extrapolation factor of the accepted candidate.
    pub omega: f64,
    pub backtracks: usize,
    /// The two plain map applications `x₁`, `x₂`.
    pub x1: CVec,
    pub x2: CVec,
    /// True when the backtracking cap was hit and `x₂` was taken.
    pub fell_back: bool,
}

#[derive(Clone, Debug)]
pub struct Alg2Output {
    pub precoder: Precoder,
    pub reflect: ReflectVector,
    pub trace: ConvergenceTrace,
    pub iterations: usize,
    pub kkt: Alg2Kkt,
}

/// Per-group `f_g = −(1/μ) ln Σ exp(−μ R̃_k(F, e))`, in nats.
pub fn smoothed_group_objective(coeffs: &SurrogateCoeffs, f: &CMat, e: &CVec, mu: f64) -> Vec<f64> {
    coeffs
        .groups()
        .iter()
        .map(|g| {
            let vals: Vec<f64> = g.iter().map(|&k| coeffs.eval_joint_nats(k, f, e)).collect();
            logsumexp_stable(&vals, mu).expect("groups are nonempty and mu > 0")
        })
        .collect()
}

fn group_weights(coeffs: &SurrogateCoeffs, mu: f64) -> Vec<f64> {
    let mut w = vec![0.0; coeffs.n_users()];
    for g in coeffs.groups() {
        let vals: Vec<f64> = g.iter().map(|&k| coeffs.users[k].rate).collect();
        let gw = softmin_weights(&vals, mu).expect("groups are nonempty and mu > 0");
        for (&k, v) in g.iter().zip(gw) {
            w[k] = v;
        }
    }
    w
}

fn group_lse(coeffs: &SurrogateCoeffs, g: &[usize], mu: f64) -> f64 {
    let vals: Vec<f64> = g.iter().map(|&k| coeffs.users[k].rate).collect();
    logsumexp_stable(&vals, mu).expect("groups are nonempty and mu > 0")
}

pub fn minorizer_f(sc: &Scenario, coeffs: &SurrogateCoeffs, mu: f64) -> MinorizerF {
    let f_n = &coeffs.f_n;
    let weights = group_weights(coeffs, mu);
    let sp = sc.p_t.sqrt();
    let tp: Vec<f64> = coeffs
        .users
        .iter()
        .map(|u| {
            // P b²‖h‖⁴ + ‖C‖² + 2√P ‖B C‖ with ‖C‖ = |a|‖h‖ and ‖BC‖ = b|a|‖h‖³.
            let h2 = u.h.norm_sqr();
            let an = u.a.norm();
            sc.p_t * u.b * u.b * h2 * h2 + an * an * h2 + 2.0 * sp * u.b * an * h2 * h2.sqrt()
        })
        .collect();
    let mut d_all = Vec::new();
    let mut u_all = Vec::new();
    let mut alpha = Vec::new();
    let mut cons = Vec::new();
    for g in coeffs.groups() {
        let mut d = CMat::zeros(f_n.rows(), f_n.cols());
        let mut lam_b: f64 = 0.0;
        let mut tp_max: f64 = 0.0;
        for &k in g {
            let grad = &coeffs.c_mat(k) - &coeffs.b_mat(k).matmul(f_n);
            d.axpy(Cplx::new(weights[k], 0.0), &grad);
            let u = &coeffs.users[k];
            lam_b = lam_b.max(u.b * u.h.norm_sqr());
            tp_max = tp_max.max(tp[k]);
        }
        let a = -lam_b - 2.0 * mu * tp_max;
        let mut ug = d.clone();
        ug.axpy(Cplx::new(-a, 0.0), f_n);
        let c = group_lse(coeffs, g, mu) + a * f_n.frobenius_sqr() - 2.0 * d.inner(f_n).re;
        d_all.push(d);
        u_all.push(ug);
        alpha.push(a);
        cons.push(c);
    }
    MinorizerF {
        weights,
        d: d_all,
        u: u_all,
        alpha,
        tp,
        cons,
    }
}

impl MinorizerF {
    /// Minorizer of group `g` at `F`, in nats.
    pub fn eval_group(&self, g: usize, f: &CMat) -> f64 {
        self.cons[g] + 2.0 * self.u[g].inner(f).re + self.alpha[g] * f.frobenius_sqr()
    }

    pub fn eval(&self, f: &CMat) -> f64 {
        (0..self.u.len()).map(|g| self.eval_group(g, f)).sum()
    }

    /// Closed-form maximizer over `‖F‖_F² ≤ P_T`. Returns the point and
    /// whether the power constraint is active.
    pub fn maximize(&self, p_t: f64, fallback: &CMat) -> (CMat, bool) {
        let mut su = CMat::zeros(fallback.rows(), fallback.cols());
        for u in &self.u {
            su += u;
        }
        let sa: f64 = self.alpha.iter().sum();
        let nsu2 = su.frobenius_sqr();
        if nsu2 == 0.0 || !nsu2.is_finite() {
            return (fallback.clone(), fallback.frobenius_sqr() >= p_t * (1.0 - 1e-9));
        }
        if nsu2 / (sa * sa) <= p_t {
            (su.scale_real(-1.0 / sa), false)
        } else {
            (su.scale_real(p_t.sqrt() / nsu2.sqrt()), true)
        }
    }
}

/// `λ_max(A_k)`, or the trace bound `b Σ‖w_i‖²` if the power iteration
/// fails. The trace bounds `λ_max` from above for PSD input, which keeps the
/// minorizer valid at the cost of a shorter step.
fn a_lambda_max_or_trace(coeffs: &SurrogateCoeffs, k: usize, tol: f64) -> f64 {
    coeffs.a_lambda_max(k, tol).unwrap_or_else(|err| {
        log::warn!("falling back to the trace bound: {err}");
        let u = &coeffs.users[k];
        u.b * u.w.iter().map(|w| w.norm_sqr()).sum::<f64>()
    })
}

pub fn minorizer_e(sc: &Scenario, coeffs: &SurrogateCoeffs, mu: f64, eig_tol: f64) -> MinorizerE {
    let e_n = &coeffs.e_n;
    let m1 = (sc.n_elements + 1) as f64;
    let weights = group_weights(coeffs, mu);
    let k_users = coeffs.n_users();
    let mut lambda_a = Vec::with_capacity(k_users);
    let mut tp2 = Vec::with_capacity(k_users);
    let mut grads = Vec::with_capacity(k_users);
    for k in 0..k_users {
        let a = coeffs.a_mat(k);
        let av = coeffs.a_vec(k);
        // A_k is Hermitian PSD, so λ_max(A_k A_k^H) = λ_max(A_k)².
        let la = a_lambda_max_or_trace(coeffs, k, eig_tol);
        tp2.push(av.norm_sqr() + m1 * la * la + 2.0 * a.mul_vec(&av).norm_l1());
        lambda_a.push(la);
        grads.push(&av - &a.mul_vec(e_n));
    }
    let mut d_all = Vec::new();
    let mut u_all = Vec::new();
    let mut beta = Vec::new();
    let mut cons = Vec::new();
    for g in coeffs.groups() {
        let mut d = CVec::zeros(e_n.len());
        let mut la_max: f64 = 0.0;
        let mut tp_max: f64 = 0.0;
        for &k in g {
            d.axpy(Cplx::new(weights[k], 0.0), &grads[k]);
            la_max = la_max.max(lambda_a[k]);
            tp_max = tp_max.max(tp2[k]);
        }
        let b = -la_max - 2.0 * mu * tp_max;
        let mut ug = d.clone();
        ug.axpy(Cplx::new(-b, 0.0), e_n);
        let c = group_lse(coeffs, g, mu) + 2.0 * m1 * b - 2.0 * d.dot(e_n).re;
        d_all.push(d);
        u_all.push(ug);
        beta.push(b);
        cons.push(c);
    }
    MinorizerE {
        weights,
        d: d_all,
        u: u_all,
        beta,
        tp2,
        lambda_a,
        cons,
    }
}

impl MinorizerE {
    /// Minorizer of group `g` at a unit-modulus `e`, in nats.
    pub fn eval_group(&self, g: usize, e: &CVec) -> f64 {
        self.cons[g] + 2.0 * self.u[g].dot(e).re
    }

    pub fn eval(&self, e: &CVec) -> f64 {
        (0..self.u.len()).map(|g| self.eval_group(g, e)).sum()
    }

    pub fn sum_u(&self) -> CVec {
        let mut s = CVec::zeros(self.u[0].len());
        for u in &self.u {
            s += u;
        }
        s
    }

    /// `exp(j∠(Σu / [Σu]_{M+1}))`: the maximizer of `2 Re{Σu^H e}` on the
    /// full torus, rotated so the last entry is 1. Rates do not depend on a
    /// global phase of `e`, so the rotation is free.
    pub fn maximize(&self) -> Option<ReflectVector> {
        ReflectVector::project(&self.sum_u())
    }
}

/// One closed-form MM step in `F` at fixed `e`, with the bound built at
/// `coeffs.f_n`. Returns the new precoder and whether the power constraint is
/// active.
pub fn mm_map_f(sc: &Scenario, coeffs: &SurrogateCoeffs, mu: f64) -> (CMat, bool) {
    minorizer_f(sc, coeffs, mu).maximize(sc.p_t, &coeffs.f_n)
}

/// One closed-form MM step in `e` at fixed `F`, with the bound built at
/// `coeffs.e_n`.
pub fn mm_map_e(sc: &Scenario, coeffs: &SurrogateCoeffs, mu: f64, eig_tol: f64) -> CVec {
    match minorizer_e(sc, coeffs, mu, eig_tol).maximize() {
        Some(e) => e.into_vec(),
        None => {
            log::warn!("last entry of the e-map direction is zero; keeping the previous iterate");
            coeffs.e_n.clone()
        }
    }
}

/// Safeguarded squared extrapolation around a monotone fixed-point map.
///
/// `projector(candidate, x2)` maps an extrapolated point back into the
/// feasible set. Candidates that lower `objective` below its value at `x_n`
/// are pulled back by `ω ← (ω − 1)/2`; `ω = −1` reproduces `x₂` exactly.
/// Returns the accepted point, its objective value and the step state.
pub fn squarem_accelerate(
    x_n: &CVec,
    mut map: impl FnMut(&CVec) -> CVec,
    mut objective: impl FnMut(&CVec) -> f64,
    projector: impl Fn(&CVec, &CVec) -> CVec,
    backtrack_cap: usize,
) -> (CVec, f64, SquaremState) {
    let x1 = map(x_n);
    let x2 = map(&x1);
    let j1 = &x1 - x_n;
    let j2 = &(&x2 - &x1) - &j1;
    let nj2 = j2.norm();
    if nj2 == 0.0 {
        let obj = objective(&x2);
        return (
            x2.clone(),
            obj,
            SquaremState {
                omega: -1.0,
                backtracks: 0,
                x1,
                x2,
                fell_back: false,
            },
        );
    }
    let base = objective(x_n);
    let mut omega = -j1.norm() / nj2;
    let mut backtracks = 0;
    loop {
        let mut cand = x_n.clone();
        cand.axpy(Cplx::new(-2.0 * omega, 0.0), &j1);
        cand.axpy(Cplx::new(omega * omega, 0.0), &j2);
        let cand = projector(&cand, &x2);
        let obj = objective(&cand);
        if obj >= base && cand.is_finite() {
            return (
                cand,
                obj,
                SquaremState {
                    omega,
                    backtracks,
                    x1,
                    x2,
                    fell_back: false,
                },
            );
        }
        if backtracks == backtrack_cap {
            let obj = objective(&x2);
            return (
                x2.clone(),
                obj,
                SquaremState {
                    omega: -1.0,
                    backtracks,
                    x1,
                    x2,
                    fell_back: true,
                },
            );
        }
        omega = (omega - 1.0) / 2.0;
        backtracks += 1;
    }
}

/// Rescales to the Frobenius radius of `x2`.
fn project_f(cand: &CVec, x2: &CVec) -> CVec {
    let n = cand.norm();
    if n == 0.0 {
        return x2.clone();
    }
    cand.scale_real(x2.norm() / n)
}

fn project_e(cand: &CVec, x2: &CVec) -> CVec {
    ReflectVector::project(cand).map_or_else(|| x2.clone(), ReflectVector::into_vec)
}

struct BlockStep {
    value: CVec,
    omega: f64,
    backtracks: usize,
    tau_active: bool,
}

fn f_step(sc: &Scenario, ch: &ChannelSet, f: &CMat, e: &CVec, cfg: &Alg2Config) -> BlockStep {
    let (n, g) = f.shape();
    let mut tau = false;
    let mut map = |x: &CVec| {
        let fm = CMat::from_vectorized(n, g, x);
        let (out, active) = mm_map_f(sc, &coeffs_raw(sc, ch, &fm, e), cfg.mu);
        tau = active;
        out.vectorize()
    };
    if !cfg.accelerate {
        let v = map(&f.vectorize());
        return BlockStep {
            value: v,
            omega: -1.0,
            backtracks: 0,
            tau_active: tau,
        };
    }
    let objective = |x: &CVec| smoothed_true_objective(sc, ch, &CMat::from_vectorized(n, g, x), e, cfg.mu).0;
    let (v, _, st) = squarem_accelerate(&f.vectorize(), &mut map, objective, project_f, cfg.backtrack_cap);
    let tau_active = CMat::from_vectorized(n, g, &v).frobenius_sqr() >= sc.p_t * (1.0 - 1e-9);
    BlockStep {
        value: v,
        omega: st.omega,
        backtracks: st.backtracks,
        tau_active,
    }
}

fn e_step(sc: &Scenario, ch: &ChannelSet, f: &CMat, e: &CVec, cfg: &Alg2Config) -> BlockStep {
    let map = |x: &CVec| mm_map_e(sc, &coeffs_raw(sc, ch, f, x), cfg.mu, cfg.eig_tol);
    if !cfg.accelerate {
        return BlockStep {
            value: map(e),
            omega: -1.0,
            backtracks: 0,
            tau_active: false,
        };
    }
    let objective = |x: &CVec| smoothed_true_objective(sc, ch, f, x, cfg.mu).0;
    let (v, _, st) = squarem_accelerate(e, map, objective, project_e, cfg.backtrack_cap);
    BlockStep {
        value: v,
        omega: st.omega,
        backtracks: st.backtracks,
        tau_active: false,
    }
}

pub fn run_algorithm2(
    sc: &Scenario,
    channels: &ChannelSet,
    init: (&Precoder, &ReflectVector),
    cfg: &Alg2Config,
) -> Result<Alg2Output> {
    sc.check_channels(channels)?;
    if !(cfg.mu > 0.0) {
        return Err(crate::Error::Config("smoothing parameter must be positive".into()));
    }
    let ch = channels.whitened();
    let start = Instant::now();
    let mut f = init.0 .0.clone();
    let mut e = init.1.as_vec().clone();
    let (n, g) = f.shape();
    let mut trace = ConvergenceTrace::default();
    let mut rate = sum_rate_raw(sc, &ch, &f, &e);
    trace.push(IterRecord {
        iter: 0,
        objective: smoothed_true_objective(sc, &ch, &f, &e, cfg.mu).0 / LN2,
        sum_rate: rate,
        wall_ms: 0.0,
        omega: None,
        tau_active: None,
        backtracks: 0,
    });
    let mut iterations = 0;
    for it in 1..=cfg.max_iters {
        iterations = it;
        let fs = f_step(sc, &ch, &f, &e, cfg);
        f = CMat::from_vectorized(n, g, &fs.value);
        let es = e_step(sc, &ch, &f, &e, cfg);
        e = es.value;

        let new_rate = sum_rate_raw(sc, &ch, &f, &e);
        trace.push(IterRecord {
            iter: it,
            objective: smoothed_true_objective(sc, &ch, &f, &e, cfg.mu).0 / LN2,
            sum_rate: new_rate,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
            omega: Some((fs.omega, es.omega)),
            tau_active: Some(fs.tau_active),
            backtracks: fs.backtracks + es.backtracks,
        });
        let delta = (new_rate - rate).abs();
        rate = new_rate;
        if delta <= cfg.tol {
            break;
        }
    }
    let kkt = alg2_kkt(sc, &ch, &f, &e, cfg.mu);
    log::debug!(
        "alg2 finished after {iterations} iterations at {rate:.6} bps/Hz (KKT {:.2e})",
        kkt.residual
    );
    let reflect = ReflectVector::new(e)?;
    Ok(Alg2Output {
        precoder: Precoder(f),
        reflect,
        trace,
        iterations,
        kkt,
    })
}

//! Alternating MM with convex QCQP block updates.
//!
//! Each outer iteration maximizes the concave rate bound over `F` at fixed
//! `e`, rebuilds the bound at the new `F`, maximizes it over the relaxed set
//! `|e_m| ≤ 1`, `e_{M+1} = 1`, and finally projects the relaxed solution back
//! to unit modulus. The projection is kept only if it does not lower the
//! bound, so the true objective never decreases.

use std::time::Instant;

use crate::channel::ChannelSet;
use crate::error::Result;
use crate::kkt::{alg1_kkt, Alg1Kkt};
use crate::model::{sum_rate_raw, ConvergenceTrace, IterRecord, Precoder, ReflectVector, Scenario};
use crate::subsolver::{
    lift_hermitian, lift_vec, solve_maxmin_qcqp, unlift_vec, BallConstraint, MaxMinQcqp, QcqpOptions,
    QcqpSolution, QuadConstraint,
};
use crate::surrogate::{coeffs_raw, SurrogateCoeffs};
use crate::{CMat, CVec, Cplx, LN2};

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Alg1Config {
    /// Stop when the true objective changes by at most this much (bps/Hz).
    pub tol: f64,
    pub max_iters: usize,
    pub sub_tol: f64,
    pub acceptance: Acceptance,
}

/// Test used to decide whether the projected reflection vector replaces the
/// previous one. Both keep the true objective nondecreasing.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Acceptance {
    /// Compare e-bound values at the projected and previous points.
    #[default]
    Bound,
    /// Compare the true sum of group minimum rates directly.
    TrueObjective,
}

impl Default for Alg1Config {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iters: 200,
            sub_tol: 1e-7,
            acceptance: Acceptance::Bound,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Alg1Output {
    pub precoder: Precoder,
    pub reflect: ReflectVector,
    pub trace: ConvergenceTrace,
    pub iterations: usize,
    /// How many phase projections passed the acceptance test.
    pub accepted_projections: usize,
    pub kkt: Alg1Kkt,
}

/// Shrink factors applied to warm starts so they sit strictly inside the ball
/// constraints.
const F_WARM_SHRINK: f64 = 1.0 - 1e-3;
const E_WARM_SHRINK: f64 = 0.999;

/// The F-block QCQP in scaled variables `F = √P_T · F̂`, `‖F̂‖_F ≤ 1`.
pub fn f_problem(sc: &Scenario, coeffs: &SurrogateCoeffs) -> MaxMinQcqp {
    let n = sc.n_antennas;
    let g_count = sc.n_groups();
    let nz = n * g_count;
    let s = sc.p_t.sqrt();
    let constraints = (0..coeffs.n_users())
        .map(|k| {
            let u = &coeffs.users[k];
            let b = coeffs.b_mat(k);
            // vec(F)^H (I_G ⊗ B_k) vec(F), column-stacked.
            let mut q = CMat::zeros(nz, nz);
            for blk in 0..g_count {
                for i in 0..n {
                    for j in 0..n {
                        q[(blk * n + i, blk * n + j)] = b[(i, j)] * sc.p_t;
                    }
                }
            }
            let lin = coeffs.c_mat(k).vectorize().scale_real(s);
            QuadConstraint {
                group: u.group,
                constant: u.constant,
                linear: lift_vec(&lin),
                hessian: lift_hermitian(&q),
            }
        })
        .collect();
    MaxMinQcqp {
        dim: 2 * nz,
        n_groups: g_count,
        constraints,
        balls: vec![BallConstraint {
            indices: (0..2 * nz).collect(),
            radius_sq: 1.0,
        }],
    }
}

/// The relaxed e-block QCQP over the free entries `e_1..e_M`, with the last
/// entry substituted by 1 and one modulus ball per element.
pub fn e_problem(sc: &Scenario, coeffs: &SurrogateCoeffs) -> MaxMinQcqp {
    let m = sc.n_elements;
    let constraints = (0..coeffs.n_users())
        .map(|k| {
            let u = &coeffs.users[k];
            let a = coeffs.a_mat(k);
            let av = coeffs.a_vec(k);
            let a11 = CMat::from_fn(m, m, |i, j| a[(i, j)]);
            let lin = CVec::from_fn(m, |i| av[i] - a[(i, m)]);
            let constant = u.constant + 2.0 * av[m].re - a[(m, m)].re;
            QuadConstraint {
                group: u.group,
                constant,
                linear: lift_vec(&lin),
                hessian: lift_hermitian(&a11),
            }
        })
        .collect();
    MaxMinQcqp {
        dim: 2 * m,
        n_groups: sc.n_groups(),
        constraints,
        balls: (0..m)
            .map(|i| BallConstraint {
                indices: vec![i, m + i],
                radius_sq: 1.0,
            })
            .collect(),
    }
}

fn sub_opts(tol: f64) -> QcqpOptions {
    QcqpOptions {
        tol,
        check_psd: false,
        ..QcqpOptions::default()
    }
}

/// Maximizes the F-quadratic bound. Never returns a point with a lower bound
/// value than `f_n`.
pub fn f_subproblem(
    sc: &Scenario,
    coeffs: &SurrogateCoeffs,
    f_n: &CMat,
    sub_tol: f64,
) -> Result<(CMat, QcqpSolution)> {
    let problem = f_problem(sc, coeffs);
    let scale = 1.0 / sc.p_t.sqrt();
    let warm = lift_vec(&f_n.vectorize().scale_real(scale * F_WARM_SHRINK));
    let sol = solve_maxmin_qcqp(&problem, &warm, &sub_opts(sub_tol))?;
    let f = CMat::from_vectorized(sc.n_antennas, sc.n_groups(), &unlift_vec(&sol.x)).scale_real(sc.p_t.sqrt());
    if coeffs.objective_f_nats(&f) >= coeffs.objective_f_nats(f_n) {
        Ok((f, sol))
    } else {
        Ok((f_n.clone(), sol))
    }
}

/// Maximizes the e-quadratic bound over the relaxed set; returns the full
/// `(M+1)`-vector `ê₁` with last entry 1.
pub fn e_subproblem(
    sc: &Scenario,
    coeffs: &SurrogateCoeffs,
    e_n: &CVec,
    sub_tol: f64,
) -> Result<(CVec, QcqpSolution)> {
    let m = sc.n_elements;
    let problem = e_problem(sc, coeffs);
    let free = CVec::from_fn(m, |i| e_n[i] * E_WARM_SHRINK);
    let sol = solve_maxmin_qcqp(&problem, &lift_vec(&free), &sub_opts(sub_tol))?;
    let mut v = unlift_vec(&sol.x).into_vec();
    v.push(Cplx::new(1.0, 0.0));
    Ok((CVec::from_vec(v), sol))
}

/// Projects `ê₁` to unit modulus and keeps the result only if the e-bound
/// (built at `(F_next, e_n)`) does not decrease. Returns the chosen point and
/// whether the projection was accepted.
pub fn project_and_accept(e_hat: &CVec, e_n: &ReflectVector, coeffs: &SurrogateCoeffs) -> (ReflectVector, bool) {
    let Some(e2) = ReflectVector::project(e_hat) else {
        log::warn!("relaxed reflection vector has a zero last entry; keeping the previous iterate");
        return (e_n.clone(), false);
    };
    let new = coeffs.objective_e_nats(e2.as_vec());
    let old = coeffs.objective_e_nats(e_n.as_vec());
    log::trace!(
        "projection: bound {:.9} -> {:.9} (relaxed {:.9})",
        old,
        new,
        coeffs.objective_e_nats(e_hat)
    );
    if new >= old {
        (e2, true)
    } else {
        (e_n.clone(), false)
    }
}

/// Like [`project_and_accept`] but compares the true objective at `(f, ·)`.
pub fn project_and_accept_true(
    sc: &Scenario,
    ch: &ChannelSet,
    f: &CMat,
    e_hat: &CVec,
    e_n: &ReflectVector,
) -> (ReflectVector, bool) {
    let Some(e2) = ReflectVector::project(e_hat) else {
        return (e_n.clone(), false);
    };
    if sum_rate_raw(sc, ch, f, e2.as_vec()) >= sum_rate_raw(sc, ch, f, e_n.as_vec()) {
        (e2, true)
    } else {
        (e_n.clone(), false)
    }
}

pub fn run_algorithm1(
    sc: &Scenario,
    channels: &ChannelSet,
    init: (&Precoder, &ReflectVector),
    cfg: &Alg1Config,
) -> Result<Alg1Output> {
    sc.check_channels(channels)?;
    let ch = channels.whitened();
    let start = Instant::now();
    let mut f = init.0 .0.clone();
    let mut e = init.1.clone();
    let mut trace = ConvergenceTrace::default();
    let mut obj = sum_rate_raw(sc, &ch, &f, e.as_vec());
    trace.push(IterRecord {
        iter: 0,
        objective: obj,
        sum_rate: obj,
        wall_ms: 0.0,
        omega: None,
        tau_active: None,
        backtracks: 0,
    });
    let mut accepted = 0;
    let mut iterations = 0;
    for it in 1..=cfg.max_iters {
        iterations = it;
        let coeffs = coeffs_raw(sc, &ch, &f, e.as_vec());
        let (f_next, _) = f_subproblem(sc, &coeffs, &f, cfg.sub_tol)?;
        f = f_next;

        let coeffs = coeffs_raw(sc, &ch, &f, e.as_vec());
        let (e_hat, _) = e_subproblem(sc, &coeffs, e.as_vec(), cfg.sub_tol)?;
        let (e_next, ok) = match cfg.acceptance {
            Acceptance::Bound => project_and_accept(&e_hat, &e, &coeffs),
            Acceptance::TrueObjective => project_and_accept_true(sc, &ch, &f, &e_hat, &e),
        };
        accepted += ok as usize;
        e = e_next;

        let new_obj = sum_rate_raw(sc, &ch, &f, e.as_vec());
        trace.push(IterRecord {
            iter: it,
            objective: new_obj,
            sum_rate: new_obj,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
            omega: None,
            tau_active: Some(f.frobenius_sqr() >= sc.p_t * (1.0 - 1e-6)),
            backtracks: 0,
        });
        let delta = (new_obj - obj).abs();
        obj = new_obj;
        if delta <= cfg.tol {
            break;
        }
    }
    let kkt = alg1_kkt(sc, &ch, &f, e.as_vec());
    log::debug!(
        "alg1 finished after {iterations} iterations at {:.6} bps/Hz (KKT {:.2e})",
        obj,
        kkt.residual
    );
    debug_assert!((obj - sum_rate_raw(sc, &ch, &f, e.as_vec())).abs() < 1e-9 / LN2);
    Ok(Alg1Output {
        precoder: Precoder(f),
        reflect: e,
        trace,
        iterations,
        accepted_projections: accepted,
        kkt,
    })
}

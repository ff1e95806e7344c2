//! First-order optimality residuals at a final iterate.
//!
//! Gradients are Wirtinger gradients with respect to the conjugate variable,
//! so the directional derivative of a real function `φ` along `dz` is
//! `2·Re⟨∇φ, dz⟩`. Rates are in nats here.
//!
//! For the exact max-min problem the residual searches for multipliers
//! `λ_k ≥ 0` with `Σ_{k∈g} λ_k = 1` such that `Σ λ_k ∇_F R_k` is a nonnegative
//! multiple of `F` (power constraint) and `Σ λ_k ∇_e R_k` is normal to the
//! unit-modulus torus, while penalizing weight on users that are not at the
//! group minimum. The problem is a tiny nonnegative least-squares problem,
//! solved exactly by enumerating supports.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::channel::ChannelSet;
use crate::model::{all_rates_nats, Scenario};
use crate::numerics::softmin_weights;
use crate::{CMat, CVec, Cplx};

/// `∇_{F*} R_k` as an `N×G` matrix.
pub fn grad_f_rate(sc: &Scenario, ch: &ChannelSet, f: &CMat, e: &CVec, k: usize) -> CMat {
    let h = ch.h_eq[k].adjoint_mul_vec(e);
    let g = sc.group_of(k);
    let y: Vec<Cplx> = (0..f.cols()).map(|i| h.dot(&f.column(i))).collect();
    let r_minus = ch.noise[k] + (0..f.cols()).filter(|&i| i != g).map(|i| y[i].norm_sqr()).sum::<f64>();
    let r = r_minus + y[g].norm_sqr();
    let mut out = CMat::zeros(f.rows(), f.cols());
    for i in 0..f.cols() {
        let coef = if i == g { y[i] / r } else { y[i] / r - y[i] / r_minus };
        out.set_column(i, &h.scale(coef));
    }
    out
}

/// `∇_{e*} R_k` as an `(M+1)`-vector.
pub fn grad_e_rate(sc: &Scenario, ch: &ChannelSet, f: &CMat, e: &CVec, k: usize) -> CVec {
    let g = sc.group_of(k);
    let w: Vec<CVec> = (0..f.cols()).map(|i| ch.h_eq[k].mul_vec(&f.column(i))).collect();
    let y: Vec<Cplx> = w.iter().map(|wi| e.dot(wi)).collect();
    let r_minus = ch.noise[k] + (0..f.cols()).filter(|&i| i != g).map(|i| y[i].norm_sqr()).sum::<f64>();
    let r = r_minus + y[g].norm_sqr();
    let mut out = CVec::zeros(e.len());
    for i in 0..f.cols() {
        let coef = if i == g {
            y[i].conj() / r
        } else {
            y[i].conj() / r - y[i].conj() / r_minus
        };
        out.axpy(coef, &w[i]);
    }
    out
}

/// Tangential components `Im(conj(e_m)·v_m)` for the free entries.
pub fn tangential(e: &CVec, v: &CVec) -> Vec<f64> {
    (0..e.len() - 1).map(|m| (e[m].conj() * v[m]).im).collect()
}

fn lift_mat(m: &CMat) -> Vec<f64> {
    m.as_slice().iter().map(|z| z.re).chain(m.as_slice().iter().map(|z| z.im)).collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Alg1Kkt {
    /// Residual of the precoder block, with its own multipliers.
    pub f_block: f64,
    /// Residual of the reflection block, with its own multipliers.
    pub e_block: f64,
    /// `max(f_block, e_block)`.
    pub residual: f64,
    /// Residual when a single set of multipliers must serve both blocks.
    pub joint: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Alg2Kkt {
    pub f_block: f64,
    pub e_block: f64,
    pub residual: f64,
    /// Multiplier of the power constraint.
    pub tau: f64,
}

/// Minimizes `‖Σ_k λ_k v_k − ν w‖² + Σ_k (λ_k c_k)²` over per-group simplices
/// for `λ` and `ν ≥ 0` (when `w` is given). Returns the optimal value.
fn simplex_nnls(cols: &[Vec<f64>], penalty: &[f64], groups: &[Vec<usize>], w: Option<&[f64]>) -> f64 {
    let k_users = cols.len();
    let dim = cols[0].len();
    let subsets: Vec<Vec<Vec<usize>>> = groups
        .iter()
        .map(|g| {
            (1u32..(1 << g.len()))
                .map(|mask| g.iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, &k)| k).collect())
                .collect()
        })
        .collect();
    let mut best = f64::INFINITY;
    let mut choice = vec![0usize; groups.len()];
    loop {
        for use_w in [false, true] {
            if use_w && w.is_none() {
                continue;
            }
            let support: Vec<usize> = choice.iter().enumerate().flat_map(|(g, &c)| subsets[g][c].clone()).collect();
            let nv = support.len() + use_w as usize;
            let ng = groups.len();
            // Stationarity of ½‖Aθ‖² + ½‖Dθ‖² subject to Eθ = 1.
            let mut a = DMatrix::zeros(dim + k_users, nv);
            for (c, &k) in support.iter().enumerate() {
                for r in 0..dim {
                    a[(r, c)] = cols[k][r];
                }
                a[(dim + k, c)] = penalty[k];
            }
            if use_w {
                let wv = w.unwrap();
                for r in 0..dim {
                    a[(r, nv - 1)] = -wv[r];
                }
            }
            let mut kkt = DMatrix::zeros(nv + ng, nv + ng);
            let ata = a.transpose() * &a;
            kkt.view_mut((0, 0), (nv, nv)).copy_from(&ata);
            let mut rhs = DVector::zeros(nv + ng);
            for (c, &k) in support.iter().enumerate() {
                let g = groups.iter().position(|gr| gr.contains(&k)).unwrap();
                kkt[(nv + g, c)] = 1.0;
                kkt[(c, nv + g)] = 1.0;
            }
            for g in 0..ng {
                rhs[nv + g] = 1.0;
            }
            let Ok(sol) = kkt.clone().svd(true, true).solve(&rhs, 1e-13) else {
                continue;
            };
            let theta = sol.rows(0, nv);
            if theta.iter().any(|&v| v < -1e-12) {
                continue;
            }
            // Guard against a pseudo-inverse that misses the simplex constraints.
            let sums_ok = groups.iter().all(|gr| {
                let s: f64 = support
                    .iter()
                    .enumerate()
                    .filter(|(_, k)| gr.contains(k))
                    .map(|(c, _)| theta[c])
                    .sum();
                (s - 1.0).abs() < 1e-8
            });
            if !sums_ok {
                continue;
            }
            let val = (&a * theta).norm_squared();
            best = best.min(val);
        }
        // Advance the mixed-radix counter over per-group supports.
        let mut g = 0;
        loop {
            if g == groups.len() {
                return best;
            }
            choice[g] += 1;
            if choice[g] < subsets[g].len() {
                break;
            }
            choice[g] = 0;
            g += 1;
        }
    }
}

fn complementarity_weights(sc: &Scenario, rates: &[f64]) -> Vec<f64> {
    let mut c = vec![0.0; rates.len()];
    for g in sc.groups() {
        let rmin = g.iter().map(|&k| rates[k]).fold(f64::INFINITY, f64::min);
        let denom = rmin.abs().max(1e-12);
        for &k in g {
            c[k] = (rates[k] - rmin) / denom;
        }
    }
    c
}

/// Residuals of the exact max-min problem at `(F, e)`; see the module docs.
pub fn alg1_kkt(sc: &Scenario, ch: &ChannelSet, f: &CMat, e: &CVec) -> Alg1Kkt {
    let k_users = sc.n_users();
    let rates = all_rates_nats(sc, ch, f, e);
    let pen = complementarity_weights(sc, &rates);
    let gf: Vec<Vec<f64>> = (0..k_users).map(|k| lift_mat(&grad_f_rate(sc, ch, f, e, k))).collect();
    let ge_full: Vec<CVec> = (0..k_users).map(|k| grad_e_rate(sc, ch, f, e, k)).collect();
    let ge: Vec<Vec<f64>> = ge_full.iter().map(|g| tangential(e, g)).collect();

    let scale_f = gf.iter().map(|v| norm(v)).fold(0.0, f64::max).max(1e-300);
    let scale_e = ge_full.iter().map(|v| v.norm()).fold(0.0, f64::max).max(1e-300);

    let on_boundary = f.frobenius_sqr() >= sc.p_t * (1.0 - 1e-6);
    let wf = lift_mat(f);
    let w = on_boundary.then_some(wf.as_slice());

    let pen_f: Vec<f64> = pen.iter().map(|c| c * scale_f).collect();
    let pen_e: Vec<f64> = pen.iter().map(|c| c * scale_e).collect();
    let f_block = simplex_nnls(&gf, &pen_f, sc.groups(), w).sqrt() / scale_f;
    let e_block = if e.len() > 1 {
        simplex_nnls(&ge, &pen_e, sc.groups(), None).sqrt() / scale_e
    } else {
        0.0
    };

    let joint_cols: Vec<Vec<f64>> = (0..k_users)
        .map(|k| {
            let mut v: Vec<f64> = gf[k].iter().map(|x| x / scale_f).collect();
            v.extend(ge[k].iter().map(|x| x / scale_e));
            v
        })
        .collect();
    let mut wj: Vec<f64> = wf.iter().map(|x| x / scale_f).collect();
    wj.extend(std::iter::repeat(0.0).take(ge[0].len()));
    let joint = simplex_nnls(&joint_cols, &pen, sc.groups(), on_boundary.then_some(wj.as_slice())).sqrt();

    Alg1Kkt {
        f_block,
        e_block,
        residual: f_block.max(e_block),
        joint,
    }
}

/// Smoothed objective `Φ = Σ_g −(1/μ) ln Σ_{k∈g} exp(−μ R_k)` in nats and its
/// softmin weights.
pub fn smoothed_true_objective(sc: &Scenario, ch: &ChannelSet, f: &CMat, e: &CVec, mu: f64) -> (f64, Vec<f64>) {
    let rates = all_rates_nats(sc, ch, f, e);
    let mut weights = vec![0.0; rates.len()];
    let mut total = 0.0;
    for g in sc.groups() {
        let vals: Vec<f64> = g.iter().map(|&k| rates[k]).collect();
        total += crate::numerics::logsumexp_stable(&vals, mu).expect("groups are nonempty");
        let w = softmin_weights(&vals, mu).expect("groups are nonempty");
        for (&k, wk) in g.iter().zip(w) {
            weights[k] = wk;
        }
    }
    (total, weights)
}

/// Stationarity of the smoothed problem at `(F, e)`.
pub fn alg2_kkt(sc: &Scenario, ch: &ChannelSet, f: &CMat, e: &CVec, mu: f64) -> Alg2Kkt {
    let (_, weights) = smoothed_true_objective(sc, ch, f, e, mu);
    let mut gf = CMat::zeros(f.rows(), f.cols());
    let mut ge = CVec::zeros(e.len());
    for k in 0..sc.n_users() {
        gf.axpy(Cplx::new(weights[k], 0.0), &grad_f_rate(sc, ch, f, e, k));
        ge.axpy(Cplx::new(weights[k], 0.0), &grad_e_rate(sc, ch, f, e, k));
    }
    let fnorm2 = f.frobenius_sqr();
    let tau = if fnorm2 > 0.0 {
        (f.inner(&gf).re / fnorm2).max(0.0)
    } else {
        0.0
    };
    let gnorm = gf.frobenius().max(1e-300);
    let mut r = gf.clone();
    r.axpy(Cplx::new(-tau, 0.0), f);
    let comp = tau * (sc.p_t - fnorm2).max(0.0) / (gnorm * sc.p_t.sqrt());
    let f_block = (r.frobenius() / gnorm).max(comp);
    let e_block = if e.len() > 1 {
        norm(&tangential(e, &ge)) / ge.norm().max(1e-300)
    } else {
        0.0
    };
    Alg2Kkt {
        f_block,
        e_block,
        residual: f_block.max(e_block),
        tau,
    }
}

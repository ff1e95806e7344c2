//! Dense log-barrier interior-point solver for max-min concave QCQPs.
//!
//! The problem, in real variables `x ∈ R^d` and epigraph variables `γ ∈ R^G`:
//!
//! ```text
//! maximize   Σ_g γ_g
//! subject to q_j(x) = c_j + 2⟨l_j, x⟩ − xᵀQ_j x ≥ γ_{g(j)}   (Q_j ⪰ 0)
//!            Σ_{i∈I_b} x_i² ≤ r_b                          (balls)
//! ```
//!
//! Each centering step minimizes `−tΣγ − Σ ln s` by damped Newton with an
//! Armijo backtracking search (0.3 / 0.8); `t` grows tenfold between centerings
//! until `(#constraints)/t ≤ tol`. Newton systems are solved by Cholesky.
//!
//! Complex problems are lifted with `x = [Re z; Im z]`, under which a Hermitian
//! `Q` becomes `[[Re Q, −Im Q], [Im Q, Re Q]]`.
//!
//! # JSON dump
//!
//! [`MaxMinQcqp`] serializes as
//! `{"dim", "n_groups", "constraints": [{"group", "constant", "linear",
//! "hessian"}], "balls": [{"indices", "radius_sq"}]}` with `hessian` stored
//! row-major, which is enough to rebuild the problem in any external solver.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::SolverError;
use crate::{CMat, CVec, Cplx};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadConstraint {
    pub group: usize,
    pub constant: f64,
    pub linear: Vec<f64>,
    /// Row-major `dim × dim`, symmetric positive semidefinite.
    pub hessian: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallConstraint {
    pub indices: Vec<usize>,
    pub radius_sq: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaxMinQcqp {
    pub dim: usize,
    pub n_groups: usize,
    pub constraints: Vec<QuadConstraint>,
    pub balls: Vec<BallConstraint>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QcqpOptions {
    /// Target duality-gap proxy `(#constraints)/t`.
    pub tol: f64,
    pub t0: f64,
    pub t_factor: f64,
    pub max_newton_per_centering: usize,
    /// Reject problems whose Hessians have an eigenvalue below `−1e-10`.
    pub check_psd: bool,
}

impl Default for QcqpOptions {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            t0: 1.0,
            t_factor: 10.0,
            max_newton_per_centering: 400,
            check_psd: true,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct KktResiduals {
    /// `‖∇L‖_∞` normalized by `max(1, largest multiplier-weighted gradient)`.
    pub stationarity: f64,
    /// Largest constraint violation (zero for interior points).
    pub primal: f64,
    /// Largest negative multiplier magnitude.
    pub dual: f64,
    /// Largest `λ_j · s_j`.
    pub complementarity: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity.max(self.primal).max(self.dual).max(self.complementarity)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QcqpSolution {
    pub x: Vec<f64>,
    pub gamma: Vec<f64>,
    pub objective: f64,
    pub residuals: KktResiduals,
    /// Total Newton steps.
    pub iterations: usize,
    pub centerings: usize,
    /// `Σγ` after each centering step.
    pub path_objectives: Vec<f64>,
    pub multipliers: Vec<f64>,
    pub ball_multipliers: Vec<f64>,
}

/// Problem data converted once to dense nalgebra storage.
struct Prepared<'a> {
    p: &'a MaxMinQcqp,
    q: Vec<DMatrix<f64>>,
    l: Vec<DVector<f64>>,
}

struct Point {
    x: DVector<f64>,
    gamma: DVector<f64>,
    s_quad: Vec<f64>,
    s_ball: Vec<f64>,
    qx: Vec<DVector<f64>>,
}

impl MaxMinQcqp {
    pub fn n_constraints(&self) -> usize {
        self.constraints.len() + self.balls.len()
    }

    pub fn validate(&self, check_psd: bool) -> Result<(), SolverError> {
        let bad = |m: String| Err(SolverError::Malformed(m));
        if self.dim == 0 || self.n_groups == 0 {
            return bad("empty problem".into());
        }
        let mut seen = vec![false; self.n_groups];
        for (j, c) in self.constraints.iter().enumerate() {
            if c.group >= self.n_groups {
                return bad(format!("constraint {j} refers to group {}", c.group));
            }
            seen[c.group] = true;
            if c.linear.len() != self.dim || c.hessian.len() != self.dim * self.dim {
                return bad(format!("constraint {j} has wrong dimensions"));
            }
            if !c.constant.is_finite() || c.linear.iter().chain(&c.hessian).any(|v| !v.is_finite()) {
                return bad(format!("constraint {j} has non-finite data"));
            }
        }
        if let Some(g) = seen.iter().position(|s| !s) {
            return bad(format!("group {g} has no constraint, so its epigraph variable is unbounded"));
        }
        for (b, ball) in self.balls.iter().enumerate() {
            if ball.indices.iter().any(|&i| i >= self.dim) || !(ball.radius_sq > 0.0) {
                return bad(format!("ball {b} is malformed"));
            }
        }
        if check_psd {
            for (j, c) in self.constraints.iter().enumerate() {
                let q = DMatrix::from_row_slice(self.dim, self.dim, &c.hessian);
                let asym = (&q - q.transpose()).amax();
                if asym > 1e-10 * q.amax().max(1.0) {
                    return bad(format!("constraint {j} Hessian is not symmetric"));
                }
                let min_eig = q.symmetric_eigenvalues().min();
                if min_eig < -1e-10 * q.amax().max(1.0) {
                    return bad(format!("constraint {j} Hessian has eigenvalue {min_eig:e}"));
                }
            }
        }
        Ok(())
    }

    /// `q_j(x)`.
    pub fn eval_constraint(&self, j: usize, x: &[f64]) -> f64 {
        let c = &self.constraints[j];
        let d = self.dim;
        let mut quad = 0.0;
        for r in 0..d {
            let row = &c.hessian[r * d..(r + 1) * d];
            let qx: f64 = row.iter().zip(x).map(|(a, b)| a * b).sum();
            quad += x[r] * qx;
        }
        let lin: f64 = c.linear.iter().zip(x).map(|(a, b)| a * b).sum();
        c.constant + 2.0 * lin - quad
    }

    /// `Σ_g min_{j∈g} q_j(x)`, the objective once `γ` is eliminated.
    pub fn eval_objective(&self, x: &[f64]) -> f64 {
        let mut mins = vec![f64::INFINITY; self.n_groups];
        for (j, c) in self.constraints.iter().enumerate() {
            mins[c.group] = mins[c.group].min(self.eval_constraint(j, x));
        }
        mins.iter().sum()
    }

    /// Smallest ball slack `r_b − Σ x_i²`.
    pub fn min_ball_slack(&self, x: &[f64]) -> f64 {
        self.balls
            .iter()
            .map(|b| b.radius_sq - b.indices.iter().map(|&i| x[i] * x[i]).sum::<f64>())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("problem data is always serializable")
    }

    pub fn from_json(s: &str) -> Result<Self, SolverError> {
        serde_json::from_str(s).map_err(|e| SolverError::Malformed(e.to_string()))
    }
}

impl<'a> Prepared<'a> {
    fn new(p: &'a MaxMinQcqp) -> Self {
        let q = p
            .constraints
            .iter()
            .map(|c| DMatrix::from_row_slice(p.dim, p.dim, &c.hessian))
            .collect();
        let l = p.constraints.iter().map(|c| DVector::from_column_slice(&c.linear)).collect();
        Self { p, q, l }
    }

    fn point(&self, x: DVector<f64>, gamma: DVector<f64>) -> Option<Point> {
        let mut s_quad = Vec::with_capacity(self.q.len());
        let mut qx = Vec::with_capacity(self.q.len());
        for (j, c) in self.p.constraints.iter().enumerate() {
            let qxj = &self.q[j] * &x;
            let s = c.constant + 2.0 * self.l[j].dot(&x) - x.dot(&qxj) - gamma[c.group];
            if !(s > 0.0) {
                return None;
            }
            s_quad.push(s);
            qx.push(qxj);
        }
        let mut s_ball = Vec::with_capacity(self.p.balls.len());
        for b in &self.p.balls {
            let s = b.radius_sq - b.indices.iter().map(|&i| x[i] * x[i]).sum::<f64>();
            if !(s > 0.0) {
                return None;
            }
            s_ball.push(s);
        }
        Some(Point {
            x,
            gamma,
            s_quad,
            s_ball,
            qx,
        })
    }

    /// Barrier gradient and Hessian at `pt` for parameter `t`, in the stacked
    /// variable `[x; γ]`.
    fn grad_hess(&self, pt: &Point, t: f64) -> (DVector<f64>, DMatrix<f64>) {
        let d = self.p.dim;
        let n = d + self.p.n_groups;
        let mut g = DVector::zeros(n);
        let mut h = DMatrix::zeros(n, n);
        for gi in 0..self.p.n_groups {
            g[d + gi] = -t;
        }
        let mut ds = DVector::zeros(n);
        for (j, c) in self.p.constraints.iter().enumerate() {
            let s = pt.s_quad[j];
            ds.fill(0.0);
            {
                let mut dx = ds.rows_mut(0, d);
                dx.copy_from(&(2.0 * (&self.l[j] - &pt.qx[j])));
            }
            ds[d + c.group] = -1.0;
            g.axpy(-1.0 / s, &ds, 1.0);
            h.ger(1.0 / (s * s), &ds, &ds, 1.0);
            let mut hx = h.view_mut((0, 0), (d, d));
            hx += &self.q[j] * (2.0 / s);
        }
        for (b, ball) in self.p.balls.iter().enumerate() {
            let s = pt.s_ball[b];
            ds.fill(0.0);
            for &i in &ball.indices {
                ds[i] = -2.0 * pt.x[i];
            }
            g.axpy(-1.0 / s, &ds, 1.0);
            h.ger(1.0 / (s * s), &ds, &ds, 1.0);
            for &i in &ball.indices {
                h[(i, i)] += 2.0 / s;
            }
        }
        (g, h)
    }

    /// `φ(new) − φ(old)` for the barrier `−tΣγ − Σ ln s`, computed from slack
    /// ratios so it stays accurate when `t` is large.
    fn phi_delta(&self, old: &Point, new: &Point, t: f64) -> f64 {
        let dg: f64 = (&new.gamma - &old.gamma).sum();
        let mut d = -t * dg;
        for (a, b) in old.s_quad.iter().zip(&new.s_quad) {
            d -= (b / a).ln();
        }
        for (a, b) in old.s_ball.iter().zip(&new.s_ball) {
            d -= (b / a).ln();
        }
        d
    }

    fn residuals(&self, pt: &Point, t: f64) -> (KktResiduals, Vec<f64>, Vec<f64>) {
        let d = self.p.dim;
        let lam: Vec<f64> = pt.s_quad.iter().map(|s| 1.0 / (t * s)).collect();
        let nu: Vec<f64> = pt.s_ball.iter().map(|s| 1.0 / (t * s)).collect();
        // ∇L for minimizing −Σγ with constraints s ≥ 0: −e_γ − Σ λ ∇s.
        let mut grad = DVector::zeros(d + self.p.n_groups);
        for gi in 0..self.p.n_groups {
            grad[d + gi] = -1.0;
        }
        let mut scale: f64 = 1.0;
        for (j, c) in self.p.constraints.iter().enumerate() {
            let gx = 2.0 * (&self.l[j] - &pt.qx[j]);
            scale = scale.max(lam[j] * gx.amax());
            let mut top = grad.rows_mut(0, d);
            top.axpy(-lam[j], &gx, 1.0);
            grad[d + c.group] += lam[j];
        }
        for (b, ball) in self.p.balls.iter().enumerate() {
            for &i in &ball.indices {
                grad[i] += nu[b] * 2.0 * pt.x[i];
                scale = scale.max(nu[b] * 2.0 * pt.x[i].abs());
            }
        }
        let comp = pt
            .s_quad
            .iter()
            .zip(&lam)
            .chain(pt.s_ball.iter().zip(&nu))
            .map(|(s, l)| s * l)
            .fold(0.0, f64::max);
        (
            KktResiduals {
                stationarity: grad.amax() / scale,
                primal: 0.0,
                dual: 0.0,
                complementarity: comp,
            },
            lam,
            nu,
        )
    }
}

/// Solves `H d = −g`, regularizing the diagonal if the factorization fails.
fn newton_direction(h: DMatrix<f64>, g: &DVector<f64>) -> Option<DVector<f64>> {
    let diag_max = h.diagonal().amax().max(1e-300);
    let mut reg = 0.0;
    for _ in 0..8 {
        let mut hr = h.clone();
        if reg > 0.0 {
            for i in 0..hr.nrows() {
                hr[(i, i)] += reg;
            }
        }
        if let Some(ch) = hr.cholesky() {
            let d = ch.solve(&(-g));
            if d.iter().all(|v| v.is_finite()) {
                return Some(d);
            }
        }
        reg = if reg == 0.0 { 1e-14 * diag_max } else { reg * 100.0 };
    }
    None
}

pub fn solve_maxmin_qcqp(
    problem: &MaxMinQcqp,
    warm_start: &[f64],
    opts: &QcqpOptions,
) -> Result<QcqpSolution, SolverError> {
    problem.validate(opts.check_psd)?;
    if warm_start.len() != problem.dim {
        return Err(SolverError::Malformed(format!(
            "warm start has length {}, problem dimension is {}",
            warm_start.len(),
            problem.dim
        )));
    }
    if !(opts.tol > 0.0 && opts.t0 > 0.0 && opts.t_factor > 1.0) {
        return Err(SolverError::Malformed("invalid solver options".into()));
    }
    let ball_slack = problem.min_ball_slack(warm_start);
    if !(ball_slack > 0.0) {
        return Err(SolverError::InfeasibleStart { min_slack: ball_slack });
    }

    let prep = Prepared::new(problem);
    let x0 = DVector::from_column_slice(warm_start);
    let mut gamma0 = DVector::from_element(problem.n_groups, f64::INFINITY);
    for (j, c) in problem.constraints.iter().enumerate() {
        gamma0[c.group] = gamma0[c.group].min(problem.eval_constraint(j, warm_start));
    }
    gamma0.apply(|g| *g -= 1e-9);
    let mut pt = prep.point(x0, gamma0).ok_or(SolverError::InfeasibleStart { min_slack: 0.0 })?;

    let m = problem.n_constraints() as f64;
    let n = problem.dim + problem.n_groups;
    // The first centering has to close a barrier gap of order t·|Σγ|, and
    // damped Newton steps shrink it by O(1) each, so t starts relative to the
    // objective scale.
    let mut t = opts.t0 / pt.gamma.abs().sum().max(1.0);
    let mut total = 0usize;
    let mut centerings = 0usize;
    let mut path = Vec::new();
    loop {
        center(&prep, &mut pt, t, opts, &mut total)?;
        centerings += 1;
        path.push(pt.gamma.sum());
        if m / t <= opts.tol {
            break;
        }
        t *= opts.t_factor;
    }
    debug_assert_eq!(pt.x.len() + pt.gamma.len(), n);

    let (residuals, multipliers, ball_multipliers) = prep.residuals(&pt, t);
    Ok(QcqpSolution {
        x: pt.x.as_slice().to_vec(),
        gamma: pt.gamma.as_slice().to_vec(),
        objective: pt.gamma.sum(),
        residuals,
        iterations: total,
        centerings,
        path_objectives: path,
        multipliers,
        ball_multipliers,
    })
}

/// Inside this Newton-decrement region a full step of a self-concordant
/// barrier is guaranteed feasible and decreasing, so it is taken without a
/// line search, whose Armijo test would be dominated by rounding there.
const QUADRATIC_REGION: f64 = 1e-2;

/// Below this decrement a stalled iteration is treated as converged: the
/// remaining error is rounding, not distance to the center. The barrier value
/// itself carries an absolute rounding error of order `t·ε·Σ|γ|`.
fn rounding_decrement(pt: &Point, t: f64) -> f64 {
    (10.0 * t * f64::EPSILON * (1.0 + pt.gamma.abs().sum())).max(1e-6)
}

fn center(prep: &Prepared, pt: &mut Point, t: f64, opts: &QcqpOptions, total: &mut usize) -> Result<(), SolverError> {
    let d = prep.p.dim;
    let mut prev_decrement = f64::INFINITY;
    for it in 0..opts.max_newton_per_centering {
        let (g, h) = prep.grad_hess(pt, t);
        let dir = newton_direction(h, &g).ok_or_else(|| SolverError::NewtonFailure {
            t,
            iterations: it,
            reason: "Newton system could not be factored".into(),
        })?;
        *total += 1;
        let decrement = -g.dot(&dir);
        if decrement / 2.0 <= 1e-16 {
            return Ok(());
        }
        // Inside the quadratic region the decrement should at least square
        // each step; when it fails to halve, the direction is at rounding level.
        let floor = rounding_decrement(pt, t);
        if decrement < QUADRATIC_REGION.max(floor) && decrement > 0.5 * prev_decrement {
            return Ok(());
        }
        prev_decrement = decrement;
        if decrement < QUADRATIC_REGION {
            let x = &pt.x + dir.rows(0, d);
            let gamma = &pt.gamma + dir.rows(d, prep.p.n_groups);
            if let Some(cand) = prep.point(x, gamma) {
                *pt = cand;
                continue;
            }
        }
        let mut step = 1.0;
        loop {
            let x = &pt.x + step * dir.rows(0, d);
            let gamma = &pt.gamma + step * dir.rows(d, prep.p.n_groups);
            if let Some(cand) = prep.point(x, gamma) {
                if prep.phi_delta(pt, &cand, t) <= -0.3 * step * decrement {
                    *pt = cand;
                    break;
                }
            }
            step *= 0.8;
            if step < 1e-14 {
                // Line search stalls only when rounding dominates the model
                // decrease, i.e. the point is already centered to precision.
                if decrement < floor {
                    return Ok(());
                }
                return Err(SolverError::NewtonFailure {
                    t,
                    iterations: it,
                    reason: format!("line search stalled with Newton decrement {decrement:e}"),
                });
            }
        }
    }
    Err(SolverError::NewtonFailure {
        t,
        iterations: opts.max_newton_per_centering,
        reason: "centering step did not converge".into(),
    })
}

/// `[Re z; Im z]`.
pub fn lift_vec(z: &CVec) -> Vec<f64> {
    z.iter().map(|c| c.re).chain(z.iter().map(|c| c.im)).collect()
}

pub fn unlift_vec(x: &[f64]) -> CVec {
    let n = x.len() / 2;
    CVec::from_fn(n, |i| Cplx::new(x[i], x[n + i]))
}

/// Row-major `[[Re Q, −Im Q], [Im Q, Re Q]]`, so `z^H Q z = xᵀ Q_r x` for
/// Hermitian `Q` and `x = [Re z; Im z]`.
pub fn lift_hermitian(q: &CMat) -> Vec<f64> {
    let n = q.rows();
    let d = 2 * n;
    let mut out = vec![0.0; d * d];
    for i in 0..n {
        for j in 0..n {
            let v = q[(i, j)];
            out[i * d + j] = v.re;
            out[i * d + n + j] = -v.im;
            out[(n + i) * d + j] = v.im;
            out[(n + i) * d + n + j] = v.re;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity(d: usize) -> Vec<f64> {
        let mut v = vec![0.0; d * d];
        for i in 0..d {
            v[i * d + i] = 1.0;
        }
        v
    }

    fn ball_problem(c0: &[f64], radius_sq: f64) -> MaxMinQcqp {
        let d = c0.len();
        MaxMinQcqp {
            dim: d,
            n_groups: 1,
            constraints: vec![QuadConstraint {
                group: 0,
                constant: 0.0,
                linear: c0.to_vec(),
                hessian: identity(d),
            }],
            balls: vec![BallConstraint {
                indices: (0..d).collect(),
                radius_sq,
            }],
        }
    }

    #[test]
    fn unconstrained_optimum_inside_ball() {
        let c0 = [0.3, -0.2, 0.1];
        let sol = solve_maxmin_qcqp(&ball_problem(&c0, 1.0), &[0.0; 3], &QcqpOptions::default()).unwrap();
        for (a, b) in sol.x.iter().zip(&c0) {
            assert!((a - b).abs() < 1e-5, "{:?}", sol.x);
        }
        let opt: f64 = c0.iter().map(|v| v * v).sum();
        assert!((sol.objective - opt).abs() < 1e-6);
    }

    #[test]
    fn optimum_projected_onto_ball() {
        let c0 = [3.0, 4.0];
        let sol = solve_maxmin_qcqp(&ball_problem(&c0, 1.0), &[0.0; 2], &QcqpOptions::default()).unwrap();
        assert!((sol.x[0] - 0.6).abs() < 1e-4 && (sol.x[1] - 0.8).abs() < 1e-4, "{:?}", sol.x);
        assert!(sol.residuals.max() <= 1e-7, "{:?}", sol.residuals);
    }

    #[test]
    fn infeasible_start_is_rejected() {
        let p = ball_problem(&[1.0, 0.0], 1.0);
        assert!(matches!(
            solve_maxmin_qcqp(&p, &[2.0, 0.0], &QcqpOptions::default()),
            Err(SolverError::InfeasibleStart { .. })
        ));
    }

    #[test]
    fn malformed_problems_are_rejected() {
        let mut p = ball_problem(&[1.0, 0.0], 1.0);
        p.constraints[0].hessian = vec![-1.0, 0.0, 0.0, 1.0];
        assert!(matches!(p.validate(true), Err(SolverError::Malformed(_))));
        let mut p = ball_problem(&[1.0, 0.0], 1.0);
        p.n_groups = 2;
        assert!(p.validate(false).is_err());
    }

    #[test]
    fn path_objective_is_monotone() {
        let p = MaxMinQcqp {
            dim: 2,
            n_groups: 1,
            constraints: vec![
                QuadConstraint {
                    group: 0,
                    constant: 0.0,
                    linear: vec![1.0, 0.0],
                    hessian: identity(2),
                },
                QuadConstraint {
                    group: 0,
                    constant: 0.1,
                    linear: vec![0.0, 1.0],
                    hessian: vec![2.0, 0.0, 0.0, 0.5],
                },
            ],
            balls: vec![BallConstraint {
                indices: vec![0, 1],
                radius_sq: 0.5,
            }],
        };
        let sol = solve_maxmin_qcqp(&p, &[0.0, 0.0], &QcqpOptions::default()).unwrap();
        for w in sol.path_objectives.windows(2) {
            assert!(w[1] >= w[0] - 1e-12, "{:?}", sol.path_objectives);
        }
    }

    #[test]
    fn lifting_preserves_quadratic_forms() {
        let q = CMat::from_fn(2, 2, |i, j| {
            if i == j {
                Cplx::new(2.0 + i as f64, 0.0)
            } else if i < j {
                Cplx::new(0.5, -0.3)
            } else {
                Cplx::new(0.5, 0.3)
            }
        });
        let z = CVec::from_vec(vec![Cplx::new(0.7, -1.1), Cplx::new(0.2, 0.4)]);
        let complex = z.dot(&q.mul_vec(&z)).re;
        let x = lift_vec(&z);
        let qr = lift_hermitian(&q);
        let mut real = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                real += x[i] * qr[i * 4 + j] * x[j];
            }
        }
        assert!((complex - real).abs() < 1e-12);
        assert_eq!(unlift_vec(&x), z);
    }

    #[test]
    fn json_dump_round_trips() {
        let p = ball_problem(&[0.5, 0.25], 2.0);
        let json = p.to_json();
        assert!(json.contains("\"radius_sq\":2.0"));
        assert_eq!(MaxMinQcqp::from_json(&json).unwrap(), p);
    }
}

//! Problem instance, rate evaluation, feasibility and initial points.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::{CMat, CVec, Cplx, LN2};

/// Slack allowed on the power budget and on unit moduli.
pub const POWER_SLACK: f64 = 1e-9;
pub const MODULUS_SLACK: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub n_antennas: usize,
    pub n_elements: usize,
    /// `groups[g]` lists the users of group `g`.
    groups: Vec<Vec<usize>>,
    user_group: Vec<usize>,
    /// Transmit power budget in watts.
    pub p_t: f64,
}

impl Scenario {
    pub fn new(n_antennas: usize, n_elements: usize, groups: Vec<Vec<usize>>, p_t: f64) -> Result<Self> {
        if n_antennas == 0 {
            return Err(Error::Config("need at least one antenna".into()));
        }
        if groups.is_empty() || groups.iter().any(|g| g.is_empty()) {
            return Err(Error::Config("groups must be nonempty".into()));
        }
        if !(p_t > 0.0) || !p_t.is_finite() {
            return Err(Error::Config(format!("power budget must be positive, got {p_t}")));
        }
        let k: usize = groups.iter().map(Vec::len).sum();
        let mut user_group = vec![usize::MAX; k];
        for (g, members) in groups.iter().enumerate() {
            for &u in members {
                if u >= k || user_group[u] != usize::MAX {
                    return Err(Error::Config(format!(
                        "user {u} is out of range or assigned twice; groups must partition 0..{k}"
                    )));
                }
                user_group[u] = g;
            }
        }
        Ok(Self {
            n_antennas,
            n_elements,
            groups,
            user_group,
            p_t,
        })
    }

    /// `n_groups` groups of `per_group` consecutive users each.
    pub fn uniform_groups(
        n_antennas: usize,
        n_elements: usize,
        n_groups: usize,
        per_group: usize,
        p_t: f64,
    ) -> Result<Self> {
        let groups = (0..n_groups)
            .map(|g| (g * per_group..(g + 1) * per_group).collect())
            .collect();
        Self::new(n_antennas, n_elements, groups, p_t)
    }

    pub fn n_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn n_users(&self) -> usize {
        self.user_group.len()
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn group_of(&self, k: usize) -> usize {
        self.user_group[k]
    }

    pub fn check_channels(&self, ch: &ChannelSet) -> Result<()> {
        if ch.n_antennas != self.n_antennas || ch.n_elements != self.n_elements || ch.n_users() != self.n_users() {
            return Err(Error::Config(format!(
                "channel set is {}x{} with {} users, scenario expects {}x{} with {}",
                ch.n_antennas,
                ch.n_elements,
                ch.n_users(),
                self.n_antennas,
                self.n_elements,
                self.n_users()
            )));
        }
        Ok(())
    }
}

/// Precoding matrix `F = [f_1, …, f_G]`, one column per group, in √W.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Precoder(pub CMat);

impl Precoder {
    pub fn power(&self) -> f64 {
        self.0.frobenius_sqr()
    }

    pub fn is_feasible(&self, p_t: f64) -> bool {
        self.power() <= p_t + POWER_SLACK
    }

    pub fn mat(&self) -> &CMat {
        &self.0
    }
}

/// Reflection vector `e = [e_1, …, e_M, 1]` with unit-modulus entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReflectVector(CVec);

impl ReflectVector {
    /// Validates unit moduli and the pinned last entry.
    pub fn new(e: CVec) -> Result<Self> {
        let Some(last) = e.last() else {
            return Err(Error::Config("reflection vector is empty".into()));
        };
        if *last != Cplx::new(1.0, 0.0) {
            return Err(Error::Config("last reflection entry must be exactly 1".into()));
        }
        if e.iter().any(|z| (z.norm() - 1.0).abs() > MODULUS_SLACK) {
            return Err(Error::Config("reflection entries must have unit modulus".into()));
        }
        Ok(Self(e))
    }

    /// `[exp(jθ_1), …, exp(jθ_M), 1]`.
    pub fn from_phases(phases: &[f64]) -> Self {
        let mut v: Vec<Cplx> = phases.iter().map(|&t| Cplx::from_polar(1.0, t)).collect();
        v.push(Cplx::new(1.0, 0.0));
        Self(CVec::from_vec(v))
    }

    /// Element-wise `exp(j∠(x / x_{M+1}))`: unit moduli and an exact 1 in the
    /// last slot. Zero entries map to phase zero. Returns `None` when the last
    /// entry is zero.
    pub fn project(x: &CVec) -> Option<Self> {
        let last = *x.last()?;
        if last.norm() == 0.0 || !x.is_finite() {
            return None;
        }
        let rot = last.conj() / last.norm();
        let m = x.len() - 1;
        let mut v: Vec<Cplx> = x[..m]
            .iter()
            .map(|z| {
                let w = z * rot;
                if w.norm() == 0.0 {
                    Cplx::new(1.0, 0.0)
                } else {
                    w / w.norm()
                }
            })
            .collect();
        v.push(Cplx::new(1.0, 0.0));
        Some(Self(CVec::from_vec(v)))
    }

    pub fn ones(m: usize) -> Self {
        Self(CVec::from_vec(vec![Cplx::new(1.0, 0.0); m + 1]))
    }

    pub fn as_vec(&self) -> &CVec {
        &self.0
    }

    pub fn into_vec(self) -> CVec {
        self.0
    }

    pub fn n_elements(&self) -> usize {
        self.0.len() - 1
    }

    pub fn phases(&self) -> Vec<f64> {
        self.0[..self.n_elements()].iter().map(|z| z.arg()).collect()
    }
}

/// One record per outer iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub iter: usize,
    /// The quantity the algorithm guarantees not to decrease, in bps/Hz.
    pub objective: f64,
    /// True sum of group minimum rates at the iterate, in bps/Hz.
    pub sum_rate: f64,
    pub wall_ms: f64,
    /// SQUAREM extrapolation factors of the F and e steps.
    pub omega: Option<(f64, f64)>,
    /// Whether the power constraint was active in the F step.
    pub tau_active: Option<bool>,
    pub backtracks: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTrace {
    pub records: Vec<IterRecord>,
}

impl ConvergenceTrace {
    pub fn push(&mut self, r: IterRecord) {
        self.records.push(r);
    }

    pub fn objectives(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.objective).collect()
    }

    /// Largest single-step decrease of the guaranteed objective (zero if none).
    pub fn max_decrease(&self) -> f64 {
        self.records
            .windows(2)
            .map(|w| w[0].objective - w[1].objective)
            .fold(0.0, f64::max)
    }

    pub fn is_monotone(&self, slack: f64) -> bool {
        self.max_decrease() <= slack
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Signal and interference-plus-noise powers of user `k`.
pub(crate) fn user_powers(sc: &Scenario, ch: &ChannelSet, f: &CMat, e: &CVec, k: usize) -> (f64, f64) {
    let h = ch.h_eq[k].adjoint_mul_vec(e);
    let g = sc.group_of(k);
    let mut sig = 0.0;
    let mut interf = ch.noise[k];
    for i in 0..f.cols() {
        let y: Cplx = (0..f.rows()).map(|n| h[n].conj() * f[(n, i)]).sum();
        if i == g {
            sig = y.norm_sqr();
        } else {
            interf += y.norm_sqr();
        }
    }
    (sig, interf)
}

pub(crate) fn rate_nats(sc: &Scenario, ch: &ChannelSet, f: &CMat, e: &CVec, k: usize) -> f64 {
    let (s, i) = user_powers(sc, ch, f, e, k);
    (s / i).ln_1p()
}

/// Rate of user `k` in bps/Hz.
pub fn rate_k(sc: &Scenario, ch: &ChannelSet, f: &Precoder, e: &ReflectVector, k: usize) -> f64 {
    rate_nats(sc, ch, &f.0, &e.0, k) / LN2
}

pub(crate) fn all_rates_nats(sc: &Scenario, ch: &ChannelSet, f: &CMat, e: &CVec) -> Vec<f64> {
    (0..sc.n_users()).map(|k| rate_nats(sc, ch, f, e, k)).collect()
}

pub(crate) fn sum_rate_raw(sc: &Scenario, ch: &ChannelSet, f: &CMat, e: &CVec) -> f64 {
    let r = all_rates_nats(sc, ch, f, e);
    sc.groups()
        .iter()
        .map(|g| g.iter().map(|&k| r[k]).fold(f64::INFINITY, f64::min))
        .sum::<f64>()
        / LN2
}

/// Sum over groups of the minimum member rate, in bps/Hz.
pub fn sum_rate(sc: &Scenario, ch: &ChannelSet, f: &Precoder, e: &ReflectVector) -> f64 {
    sum_rate_raw(sc, ch, &f.0, &e.0)
}

/// Full power split evenly across groups along the normalized all-ones
/// direction, and all-ones reflection.
pub fn init_point(sc: &Scenario) -> (Precoder, ReflectVector) {
    let n = sc.n_antennas;
    let g = sc.n_groups();
    let amp = (sc.p_t / g as f64).sqrt() / (n as f64).sqrt();
    let f = CMat::from_fn(n, g, |_, _| Cplx::new(amp, 0.0));
    (Precoder(f), ReflectVector::ones(sc.n_elements))
}

/// Same per-column power as [`init_point`] with Gaussian column directions;
/// reflection phases uniform on `[0, 2π)`.
pub fn init_point_random(sc: &Scenario, seed: u64) -> (Precoder, ReflectVector) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let n = sc.n_antennas;
    let g = sc.n_groups();
    let mut f = CMat::zeros(n, g);
    for col in 0..g {
        let v = CVec::from_fn(n, |_| {
            Cplx::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng))
        });
        let s = (sc.p_t / g as f64).sqrt() / v.norm();
        f.set_column(col, &v.scale_real(s));
    }
    let phases: Vec<f64> = (0..sc.n_elements)
        .map(|_| rand::Rng::random_range(&mut rng, 0.0..std::f64::consts::TAU))
        .collect();
    (Precoder(f), ReflectVector::from_phases(&phases))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_user(p_t: f64) -> (Scenario, ChannelSet) {
        let sc = Scenario::new(2, 1, vec![vec![0]], p_t).unwrap();
        let hd = CVec::from_vec(vec![Cplx::new(1.0, 0.0), Cplx::new(0.0, 0.0)]);
        let ch = ChannelSet::from_parts(vec![hd], vec![CVec::zeros(1)], CMat::zeros(1, 2), vec![1.0]).unwrap();
        (sc, ch)
    }

    #[test]
    fn zero_precoder_gives_zero_rate() {
        let (sc, ch) = single_user(1.0);
        let f = Precoder(CMat::zeros(2, 1));
        let e = ReflectVector::ones(1);
        assert_eq!(rate_k(&sc, &ch, &f, &e, 0), 0.0);
        assert_eq!(sum_rate(&sc, &ch, &f, &e), 0.0);
    }

    #[test]
    fn matched_single_user_rate() {
        let p_t = 3.0;
        let (sc, ch) = single_user(p_t);
        let f = Precoder(CMat::from_fn(2, 1, |i, _| Cplx::new(if i == 0 { p_t.sqrt() } else { 0.0 }, 0.0)));
        let e = ReflectVector::from_phases(&[0.4]);
        assert!((rate_k(&sc, &ch, &f, &e, 0) - (1.0 + p_t).log2()).abs() < 1e-12);
    }

    #[test]
    fn init_uses_full_power_evenly() {
        let sc = Scenario::uniform_groups(4, 8, 2, 2, 0.7).unwrap();
        let (f, e) = init_point(&sc);
        assert!((f.power() - 0.7).abs() < 1e-12);
        for g in 0..2 {
            assert!((f.0.column(g).norm_sqr() - 0.35).abs() < 1e-12);
        }
        assert!(ReflectVector::new(e.as_vec().clone()).is_ok());
        let (fr, er) = init_point_random(&sc, 3);
        assert!((fr.power() - 0.7).abs() < 1e-12);
        assert!(ReflectVector::new(er.into_vec()).is_ok());
    }

    #[test]
    fn scenario_rejects_bad_partitions() {
        assert!(Scenario::new(2, 4, vec![vec![0, 1], vec![1]], 1.0).is_err());
        assert!(Scenario::new(2, 4, vec![vec![0], vec![]], 1.0).is_err());
        assert!(Scenario::new(2, 4, vec![vec![0, 2]], 1.0).is_err());
        assert!(Scenario::new(2, 4, vec![vec![0]], 0.0).is_err());
    }

    #[test]
    fn projection_pins_last_entry() {
        let x = CVec::from_vec(vec![Cplx::new(0.0, 3.0), Cplx::new(-1.0, 1.0), Cplx::new(2.0, 0.0)]);
        let e = ReflectVector::project(&x).unwrap();
        assert_eq!(*e.as_vec().last().unwrap(), Cplx::new(1.0, 0.0));
        assert!((e.as_vec()[0] - Cplx::new(0.0, 1.0)).norm() < 1e-15);
        let zero_last = CVec::from_vec(vec![Cplx::new(1.0, 0.0), Cplx::new(0.0, 0.0)]);
        assert!(ReflectVector::project(&zero_last).is_none());
    }

    #[test]
    fn trace_monotonicity() {
        let rec = |i: usize, o: f64| IterRecord {
            iter: i,
            objective: o,
            sum_rate: o,
            wall_ms: 0.0,
            omega: None,
            tau_active: None,
            backtracks: 0,
        };
        let mut t = ConvergenceTrace::default();
        t.push(rec(0, 1.0));
        t.push(rec(1, 2.0));
        assert!(t.is_monotone(1e-9));
        t.push(rec(2, 1.5));
        assert!(!t.is_monotone(1e-9));
        assert!((t.max_decrease() - 0.5).abs() < 1e-15);
    }
}

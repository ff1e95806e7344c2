//! Geometry-based channel generation for the BS→user, BS→IRS and IRS→user links.
//!
//! # Draw order
//!
//! A trial's channels come from one `ChaCha20Rng::seed_from_u64(seed)` stream,
//! consumed in this order so any run can be replayed exactly:
//!
//! 1. for each user `k = 0..K`: two uniforms `(u_r, u_θ)` placing the user at
//!    radius `R·√u_r`, angle `2π·u_θ` inside the disk;
//! 2. `H_dr`, row-major, one complex Gaussian per entry;
//! 3. for each user: `h_d,k` (N entries), then the NLoS part of `h_r,k`
//!    (M entries).
//!
//! A complex Gaussian is two consecutive standard normals `(x, y)` mapped to
//! `(x + jy)/√2`. LoS components are deterministic given positions and consume
//! no randomness.
//!
//! # Steering model
//!
//! The BS carries a half-wavelength ULA along the y axis. The IRS is a
//! half-wavelength UPA with `irs_rows` rows and `M / irs_rows` columns; columns
//! run along the y axis and rows along z. With elevation fixed at zero
//! (planar geometry), element `(r, c)` of the IRS response towards a point at
//! offset `(dx, dy)` has phase `π·(c·sinφ·cosε + r·sinε)` with `sinφ = dy/d`
//! and `ε = 0`. Carrier frequency never enters because spacing is expressed in
//! wavelengths.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Scenario;
use crate::{CMat, CVec, Cplx};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    pub bs_position: [f64; 2],
    pub irs_position: [f64; 2],
    pub user_center: [f64; 2],
    pub user_radius: f64,
    pub alpha_bi: f64,
    pub alpha_iu: f64,
    pub alpha_bu: f64,
    /// Rician factor of the IRS→user links (linear).
    pub kappa_iu: f64,
    /// Rician factor of the BS→IRS link (linear). Zero gives pure Rayleigh.
    pub kappa_bi: f64,
    pub bandwidth_hz: f64,
    pub noise_dbm_per_hz: f64,
    /// Number of UPA rows; `M` must be a multiple of it.
    pub irs_rows: usize,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            bs_position: [0.0, 0.0],
            irs_position: [100.0, 0.0],
            user_center: [120.0, 20.0],
            user_radius: 10.0,
            alpha_bi: 2.0,
            alpha_iu: 2.0,
            alpha_bu: 4.0,
            kappa_iu: 10.0,
            kappa_bi: 0.0,
            bandwidth_hz: 10e6,
            noise_dbm_per_hz: -174.0,
            irs_rows: 4,
        }
    }
}

impl ChannelConfig {
    pub fn validate(&self, n_elements: usize) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if !(self.alpha_bi > 0.0 && self.alpha_iu > 0.0 && self.alpha_bu > 0.0) {
            return bad("path-loss exponents must be positive");
        }
        if !(self.kappa_iu >= 0.0 && self.kappa_bi >= 0.0) {
            return bad("Rician factors must be nonnegative");
        }
        if !(self.bandwidth_hz > 0.0) {
            return bad("bandwidth must be positive");
        }
        if !(self.user_radius >= 0.0) {
            return bad("user radius must be nonnegative");
        }
        if !self.noise_dbm_per_hz.is_finite() {
            return bad("noise density must be finite");
        }
        if self.irs_rows == 0 || n_elements % self.irs_rows != 0 {
            return Err(Error::Config(format!(
                "IRS size {n_elements} is not a multiple of the UPA row count {}",
                self.irs_rows
            )));
        }
        Ok(())
    }

    /// Noise power `σ²` in watts over the configured bandwidth.
    pub fn noise_power_w(&self) -> f64 {
        dbm_to_watts(self.noise_dbm_per_hz + 10.0 * self.bandwidth_hz.log10())
    }
}

pub fn path_loss_db(distance_m: f64, exponent: f64) -> Result<f64> {
    if !(distance_m > 0.0) {
        return Err(Error::Config(format!("distance must be positive, got {distance_m}")));
    }
    Ok(-30.0 - 10.0 * exponent * distance_m.log10())
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_linear(dbm) * 1e-3
}

/// All per-trial channel realizations.
///
/// `h_eq[k]` is the `(M+1)×N` stack `[diag(h_r,k^H)·H_dr ; h_d,k^H]`, so the
/// received amplitude for precoder column `f` is `e^H H_k f`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelSet {
    pub n_antennas: usize,
    pub n_elements: usize,
    pub h_d: Vec<CVec>,
    pub h_r: Vec<CVec>,
    pub h_dr: CMat,
    pub noise: Vec<f64>,
    pub h_eq: Vec<CMat>,
    /// Sampled user coordinates in meters, empty for hand-built sets.
    pub user_positions: Vec<[f64; 2]>,
}

impl ChannelSet {
    /// Assembles equivalent channels from the raw links.
    pub fn from_parts(h_d: Vec<CVec>, h_r: Vec<CVec>, h_dr: CMat, noise: Vec<f64>) -> Result<Self> {
        let n = h_dr.cols();
        let m = h_dr.rows();
        let k = h_d.len();
        if h_r.len() != k || noise.len() != k {
            return Err(Error::Config("per-user channel lists have different lengths".into()));
        }
        if h_d.iter().any(|h| h.len() != n) || h_r.iter().any(|h| h.len() != m) {
            return Err(Error::Config("channel vector dimensions do not match H_dr".into()));
        }
        if noise.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::Config("noise power must be positive".into()));
        }
        let h_eq = h_d
            .iter()
            .zip(&h_r)
            .map(|(hd, hr)| assemble(hd, hr, &h_dr))
            .collect();
        Ok(Self {
            n_antennas: n,
            n_elements: m,
            h_d,
            h_r,
            h_dr,
            noise,
            h_eq,
            user_positions: Vec::new(),
        })
    }

    pub fn n_users(&self) -> usize {
        self.h_d.len()
    }

    pub fn equivalent_channel(&self, k: usize) -> Result<&CMat> {
        self.h_eq.get(k).ok_or(Error::Index {
            index: k,
            len: self.h_eq.len(),
        })
    }

    /// Copy with every IRS→user link zeroed, which removes the reflected path.
    pub fn without_irs(&self) -> Self {
        let h_r = vec![CVec::zeros(self.n_elements); self.n_users()];
        let mut out = Self::from_parts(self.h_d.clone(), h_r, self.h_dr.clone(), self.noise.clone())
            .expect("dimensions already validated");
        out.user_positions = self.user_positions.clone();
        out
    }

    /// Copy with user `k`'s channels divided by `σ_k` and unit noise. Rates
    /// are unchanged, and the optimizers see quantities of order one.
    pub fn whitened(&self) -> Self {
        let mut out = self.clone();
        for k in 0..self.n_users() {
            let s = 1.0 / self.noise[k].sqrt();
            out.h_d[k] = self.h_d[k].scale_real(s);
            out.h_r[k] = self.h_r[k].scale_real(s);
            out.h_eq[k] = self.h_eq[k].scale_real(s);
            out.noise[k] = 1.0;
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))
    }
}

fn assemble(h_d: &CVec, h_r: &CVec, h_dr: &CMat) -> CMat {
    let m = h_dr.rows();
    let n = h_dr.cols();
    CMat::from_fn(m + 1, n, |i, j| {
        if i < m {
            h_r[i].conj() * h_dr[(i, j)]
        } else {
            h_d[j].conj()
        }
    })
}

fn complex_gaussian(rng: &mut ChaCha20Rng) -> Cplx {
    let x: f64 = rng.sample(StandardNormal);
    let y: f64 = rng.sample(StandardNormal);
    Complex::new(x, y) * std::f64::consts::FRAC_1_SQRT_2
}

fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Half-wavelength ULA response along the y axis towards `to` seen from `from`.
pub fn ula_response(n: usize, from: [f64; 2], to: [f64; 2]) -> CVec {
    let d = distance(from, to);
    let sin_phi = if d > 0.0 { (to[1] - from[1]) / d } else { 0.0 };
    CVec::from_fn(n, |i| Cplx::from_polar(1.0, std::f64::consts::PI * i as f64 * sin_phi))
}

/// Half-wavelength UPA response (`rows × M/rows`, row-major element order)
/// towards `to` seen from `from`, at zero elevation.
pub fn upa_response(m: usize, rows: usize, from: [f64; 2], to: [f64; 2]) -> CVec {
    let cols = m / rows;
    let d = distance(from, to);
    let sin_phi = if d > 0.0 { (to[1] - from[1]) / d } else { 0.0 };
    let (sin_el, cos_el) = (0.0f64, 1.0f64);
    CVec::from_fn(m, |idx| {
        let r = (idx / cols) as f64;
        let c = (idx % cols) as f64;
        Cplx::from_polar(1.0, std::f64::consts::PI * (c * sin_phi * cos_el + r * sin_el))
    })
}

pub fn gen_channels(cfg: &ChannelConfig, scenario: &Scenario, seed: u64) -> Result<ChannelSet> {
    let n = scenario.n_antennas;
    let m = scenario.n_elements;
    let k_users = scenario.n_users();
    cfg.validate(m)?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);

    let positions: Vec<[f64; 2]> = (0..k_users)
        .map(|_| {
            let u_r: f64 = rng.random();
            let u_t: f64 = rng.random();
            let r = cfg.user_radius * u_r.sqrt();
            let th = 2.0 * std::f64::consts::PI * u_t;
            [cfg.user_center[0] + r * th.cos(), cfg.user_center[1] + r * th.sin()]
        })
        .collect();

    let gain_bi = db_to_linear(path_loss_db(distance(cfg.bs_position, cfg.irs_position), cfg.alpha_bi)?);
    let nlos_dr = CMat::from_fn(m, n, |_, _| complex_gaussian(&mut rng));
    let h_dr = if cfg.kappa_bi > 0.0 {
        let rx = upa_response(m, cfg.irs_rows, cfg.irs_position, cfg.bs_position);
        let tx = ula_response(n, cfg.bs_position, cfg.irs_position);
        let los = rx.outer(&tx);
        let wl = (cfg.kappa_bi / (1.0 + cfg.kappa_bi)).sqrt();
        let wn = (1.0 / (1.0 + cfg.kappa_bi)).sqrt();
        let mut h = los.scale_real(wl);
        h.axpy(Cplx::new(wn, 0.0), &nlos_dr);
        h.scale_real(gain_bi.sqrt())
    } else {
        nlos_dr.scale_real(gain_bi.sqrt())
    };

    let wl = (cfg.kappa_iu / (1.0 + cfg.kappa_iu)).sqrt();
    let wn = (1.0 / (1.0 + cfg.kappa_iu)).sqrt();
    let mut h_d = Vec::with_capacity(k_users);
    let mut h_r = Vec::with_capacity(k_users);
    for pos in &positions {
        let g_bu = db_to_linear(path_loss_db(distance(cfg.bs_position, *pos), cfg.alpha_bu)?);
        let hd = CVec::from_fn(n, |_| complex_gaussian(&mut rng)).scale_real(g_bu.sqrt());
        let nlos = CVec::from_fn(m, |_| complex_gaussian(&mut rng));
        let g_iu = db_to_linear(path_loss_db(distance(cfg.irs_position, *pos), cfg.alpha_iu)?);
        let los = upa_response(m, cfg.irs_rows, cfg.irs_position, *pos);
        let mut hr = los.scale_real(wl);
        hr.axpy(Cplx::new(wn, 0.0), &nlos);
        h_d.push(hd);
        h_r.push(hr.scale_real(g_iu.sqrt()));
    }

    let noise = vec![cfg.noise_power_w(); k_users];
    let mut set = ChannelSet::from_parts(h_d, h_r, h_dr, noise)?;
    set.user_positions = positions;
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scenario() -> Scenario {
        Scenario::uniform_groups(4, 16, 2, 2, 0.1).unwrap()
    }

    #[test]
    fn path_loss_examples() {
        assert!((path_loss_db(100.0, 2.0).unwrap() + 70.0).abs() < 1e-12);
        assert!((path_loss_db(1.0, 4.0).unwrap() + 30.0).abs() < 1e-12);
        let d = (120.0f64 * 120.0 + 20.0 * 20.0).sqrt();
        assert!((path_loss_db(d, 4.0).unwrap() + 113.405_234_307_899).abs() < 1e-9);
        assert!(path_loss_db(0.0, 2.0).is_err());
        assert!(path_loss_db(-1.0, 2.0).is_err());
    }

    #[test]
    fn noise_power_is_minus_104_dbm() {
        let p = ChannelConfig::default().noise_power_w();
        assert!((p - 10f64.powf(-13.4)).abs() < 1e-15);
    }

    #[test]
    fn db_round_trip() {
        for i in 0..=200 {
            let x = -(i as f64);
            assert!((linear_to_db(db_to_linear(x)) - x).abs() < 1e-12);
        }
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let cfg = ChannelConfig::default();
        let a = gen_channels(&cfg, &scenario(), 7).unwrap();
        let b = gen_channels(&cfg, &scenario(), 7).unwrap();
        assert_eq!(a, b);
        let c = gen_channels(&cfg, &scenario(), 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn stack_has_expected_shape() {
        let set = gen_channels(&ChannelConfig::default(), &scenario(), 1).unwrap();
        assert_eq!(set.equivalent_channel(0).unwrap().shape(), (17, 4));
        assert!(set.equivalent_channel(4).is_err());
    }

    #[test]
    fn rejects_bad_upa_shape() {
        let sc = Scenario::uniform_groups(4, 6, 2, 1, 0.1).unwrap();
        assert!(gen_channels(&ChannelConfig::default(), &sc, 0).is_err());
    }

    #[test]
    fn huge_kappa_gives_los() {
        let cfg = ChannelConfig {
            kappa_iu: 1e12,
            ..ChannelConfig::default()
        };
        let set = gen_channels(&cfg, &scenario(), 3).unwrap();
        for (k, pos) in set.user_positions.iter().enumerate() {
            let g = db_to_linear(path_loss_db(distance(cfg.irs_position, *pos), cfg.alpha_iu).unwrap());
            let los = upa_response(16, 4, cfg.irs_position, *pos).scale_real(g.sqrt());
            let diff = (&set.h_r[k] - &los).norm() / los.norm();
            assert!(diff < 1e-5, "user {k}: relative deviation {diff}");
        }
    }

    #[test]
    fn whitening_preserves_snr_ratios() {
        let set = gen_channels(&ChannelConfig::default(), &scenario(), 5).unwrap();
        let w = set.whitened();
        let ratio = set.h_eq[1].frobenius_sqr() / set.noise[1];
        assert!((w.h_eq[1].frobenius_sqr() - ratio).abs() < 1e-9 * ratio);
        assert_eq!(w.noise[1], 1.0);
    }

    #[test]
    fn json_round_trip() {
        let set = gen_channels(&ChannelConfig::default(), &scenario(), 9).unwrap();
        let back = ChannelSet::from_json(&set.to_json().unwrap()).unwrap();
        assert_eq!(back, set);
    }
}

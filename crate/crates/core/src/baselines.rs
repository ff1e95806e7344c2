//! No-IRS and quantized-phase baselines, and energy-efficiency accounting.
//!
//! The no-IRS baseline needs no code of its own: run either algorithm on
//! [`ChannelSet::without_irs`](crate::channel::ChannelSet::without_irs).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ReflectVector;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerModel {
    /// Reciprocal of the power-amplifier efficiency.
    pub eta: f64,
    /// Circuit power per active BS antenna, watts.
    pub p_antenna: f64,
    /// Circuit power per IRS element, watts.
    pub p_irs: f64,
    /// Radiated transmit power, watts.
    pub p_t: f64,
}

impl Default for PowerModel {
    fn default() -> Self {
        Self {
            eta: 1.2,
            p_antenna: 0.2,
            p_irs: 0.005,
            p_t: 0.1,
        }
    }
}

impl PowerModel {
    pub fn validate(&self) -> Result<()> {
        let fields = [self.eta, self.p_antenna, self.p_irs, self.p_t];
        if fields.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Config(format!("power model entries must be finite and nonnegative: {self:?}")));
        }
        if self.eta < 1.0 {
            return Err(Error::Config(format!("amplifier factor eta must be at least 1, got {}", self.eta)));
        }
        Ok(())
    }

    /// Total consumed power in watts.
    pub fn total(&self, mode: Mode, n_antennas: usize, n_elements: usize) -> f64 {
        let base = self.eta * self.p_t + n_antennas as f64 * self.p_antenna;
        match mode {
            Mode::Irs => base + n_elements as f64 * self.p_irs,
            Mode::NoIrs => base,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Irs,
    NoIrs,
}

/// Sum rate over consumed power, in bit/Hz/J.
pub fn energy_efficiency(
    sum_rate: f64,
    pm: &PowerModel,
    mode: Mode,
    n_antennas: usize,
    n_elements: usize,
) -> Result<f64> {
    pm.validate()?;
    let power = pm.total(mode, n_antennas, n_elements);
    if !(power > 0.0) {
        return Err(Error::Config("total consumed power is zero".into()));
    }
    Ok(sum_rate / power)
}

/// Distances closer than this count as ties and go to the lower index.
const TIE_TOL: f64 = 1e-12;

/// Snaps each reflection phase to the chordal-nearest of `2^bits` uniformly
/// spaced levels starting at 0. The reference entry stays 1.
pub fn quantize_phases(e: &ReflectVector, bits: u32) -> Result<ReflectVector> {
    if bits == 0 || bits > 16 {
        return Err(Error::Config(format!("phase resolution must be 1..=16 bits, got {bits}")));
    }
    let levels = 1usize << bits;
    let step = std::f64::consts::TAU / levels as f64;
    let grid: Vec<crate::Cplx> = (0..levels)
        .map(|i| crate::Cplx::from_polar(1.0, i as f64 * step))
        .collect();
    let phases: Vec<f64> = e.as_vec()[..e.n_elements()]
        .iter()
        .map(|z| {
            let mut best = 0;
            let mut best_d = (grid[0] - z).norm();
            for (i, g) in grid.iter().enumerate().skip(1) {
                let d = (g - z).norm();
                if d < best_d - TIE_TOL {
                    best = i;
                    best_d = d;
                }
            }
            best as f64 * step
        })
        .collect();
    Ok(ReflectVector::from_phases(&phases))
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;

    #[test]
    fn default_power_model_totals() {
        let pm = PowerModel::default();
        assert!((pm.total(Mode::Irs, 4, 16) - 1.0).abs() < 1e-12);
        assert!((pm.total(Mode::NoIrs, 4, 16) - 0.92).abs() < 1e-12);
        assert!((energy_efficiency(7.0, &pm, Mode::Irs, 4, 16).unwrap() - 7.0).abs() < 1e-12);
        let ee1 = energy_efficiency(3.0, &pm, Mode::NoIrs, 4, 0).unwrap();
        let ee2 = energy_efficiency(6.0, &pm, Mode::NoIrs, 4, 0).unwrap();
        assert!((ee2 - 2.0 * ee1).abs() < 1e-12);
    }

    #[test]
    fn zero_power_is_an_error() {
        let pm = PowerModel {
            eta: 1.0,
            p_antenna: 0.0,
            p_irs: 0.0,
            p_t: 0.0,
        };
        assert!(energy_efficiency(1.0, &pm, Mode::Irs, 4, 16).is_err());
        let bad = PowerModel { eta: 0.5, ..PowerModel::default() };
        assert!(energy_efficiency(1.0, &bad, Mode::Irs, 4, 16).is_err());
    }

    #[test]
    fn quantize_examples() {
        let e = ReflectVector::from_phases(&[0.0, PI / 3.0, PI / 4.0, 7.0 * PI / 4.0, 0.99 * PI]);
        let q = quantize_phases(&e, 2).unwrap();
        let p = q.phases();
        let expect = [0.0, PI / 2.0, 0.0, 0.0, PI];
        for (a, b) in p.iter().zip(expect) {
            let d = crate::Cplx::from_polar(1.0, *a) - crate::Cplx::from_polar(1.0, b);
            assert!(d.norm() < 1e-12, "{p:?}");
        }
        assert_eq!(q.as_vec()[5], crate::Cplx::new(1.0, 0.0));
        assert_eq!(quantize_phases(&q, 2).unwrap(), q);
        assert!(quantize_phases(&e, 0).is_err());
    }
}

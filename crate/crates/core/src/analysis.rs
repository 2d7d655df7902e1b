//! Frequency-domain evaluation: Bode data, bandwidth, resonance peak and
//! noise amplitude spectral densities.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::controllers::ClosedLoop;
use crate::error::{invalid, Error, Result};
use crate::lti::RationalTF;

/// -3 dB in the strict sense, `20 log10(1/sqrt 2)`.
pub const MINUS_3DB: f64 = -3.010_299_956_639_812;

/// Ascending, strictly positive frequencies in rad/s.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid {
    points: Vec<f64>,
}

impl FrequencyGrid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(invalid("grid", "empty"));
        }
        if points[0] <= 0.0 || points.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("grid", "must be positive and strictly increasing"));
        }
        Ok(Self { points })
    }

    /// Log-spaced grid in rad/s with `per_decade` points per decade,
    /// both ends included.
    pub fn log(lo: f64, hi: f64, per_decade: usize) -> Result<Self> {
        if !(lo > 0.0 && hi > lo) || per_decade == 0 {
            return Err(invalid("grid", "need 0 < lo < hi and per_decade > 0"));
        }
        let decades = (hi / lo).log10();
        let n = (decades * per_decade as f64).round().max(1.0) as usize + 1;
        let (a, b) = (lo.log10(), hi.log10());
        Self::new(
            (0..n)
                .map(|i| 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64))
                .collect(),
        )
    }

    pub fn log_hz(lo_hz: f64, hi_hz: f64, per_decade: usize) -> Result<Self> {
        Self::log(2.0 * PI * lo_hz, 2.0 * PI * hi_hz, per_decade)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn hz(&self) -> Vec<f64> {
        self.points.iter().map(|w| w / (2.0 * PI)).collect()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

impl Default for FrequencyGrid {
    /// 0.01 to 100 Hz, 60 points per decade.
    fn default() -> Self {
        Self::log_hz(0.01, 100.0, 60).unwrap()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bode {
    pub omega: Vec<f64>,
    pub mag_db: Vec<f64>,
    pub phase_deg: Vec<f64>,
}

/// Unwraps a phase sequence in degrees so consecutive samples differ by
/// less than 180 degrees.
pub fn unwrap_deg(phase: &mut [f64]) {
    for i in 1..phase.len() {
        let d = phase[i] - phase[i - 1];
        phase[i] -= 360.0 * (d / 360.0).round();
    }
}

pub fn bode(tf: &RationalTF, grid: &FrequencyGrid) -> Bode {
    let vals: Vec<_> = grid.points().iter().map(|&w| tf.eval(w)).collect();
    let mag_db = vals.iter().map(|v| 20.0 * v.norm().log10()).collect();
    let mut phase_deg: Vec<f64> = vals.iter().map(|v| v.arg().to_degrees()).collect();
    unwrap_deg(&mut phase_deg);
    Bode {
        omega: grid.points().to_vec(),
        mag_db,
        phase_deg,
    }
}

fn mag_db(tf: &RationalTF, w: f64) -> f64 {
    20.0 * tf.eval(w).norm().log10()
}

/// First downward crossing of -3.0103 dB relative to DC. Requires a DC gain
/// within 0.1 dB of unity; searches up to 1e5 rad/s.
pub fn find_bandwidth(tf: &RationalTF) -> Result<f64> {
    let dc_db = 20.0 * tf.dc_gain().abs().log10();
    if !(dc_db.abs() <= 0.1) {
        return Err(Error::NonUnityDcGain { dc_db });
    }
    let level = dc_db + MINUS_3DB;
    let limit = 1e5;
    let grid = FrequencyGrid::log(1e-4, limit, 200).unwrap();
    let pts = grid.points();
    let idx = pts
        .iter()
        .position(|&w| mag_db(tf, w) <= level)
        .ok_or(Error::NoBandwidthCrossing { limit })?;
    if idx == 0 {
        return Ok(pts[0]);
    }
    let (mut lo, mut hi) = (pts[idx - 1], pts[idx]);
    while (hi - lo) > 1e-9 * hi {
        let mid = (lo * hi).sqrt();
        if mag_db(tf, mid) <= level {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Height of the largest magnitude peak above the DC gain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Resonance {
    /// dB above DC; `<= 0` means no resonance.
    pub peak_db: f64,
    pub omega: f64,
}

pub fn resonance_peak(tf: &RationalTF) -> Resonance {
    let dc_db = 20.0 * tf.dc_gain().abs().log10();
    let grid = FrequencyGrid::log(1e-3, 1e5, 100).unwrap();
    let pts = grid.points();
    let (imax, vmax) = pts
        .iter()
        .map(|&w| mag_db(tf, w))
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
    let (mut a, mut b) = (pts[imax.saturating_sub(1)], pts[(imax + 1).min(pts.len() - 1)]);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..100 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if mag_db(tf, c) > mag_db(tf, d) {
            b = d;
        } else {
            a = c;
        }
    }
    let w = 0.5 * (a + b);
    let v = mag_db(tf, w).max(vmax);
    let w = if v == vmax { pts[imax] } else { w };
    Resonance {
        peak_db: v - dc_db,
        omega: w,
    }
}

/// White measurement-noise standard deviations per measured signal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    /// N m
    pub sigma_tau: f64,
    /// rad/s
    pub sigma_qdot: f64,
    /// rad/s^2
    pub sigma_acc: f64,
}

impl NoiseModel {
    /// Sensor noise levels of the nominal actuator.
    pub fn nominal() -> Self {
        Self {
            sigma_tau: 0.0262,
            sigma_qdot: 0.0018,
            sigma_acc: 0.2107,
        }
    }

    pub fn off() -> Self {
        Self {
            sigma_tau: 0.0,
            sigma_qdot: 0.0,
            sigma_acc: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (n, v) in [
            ("sigma_tau", self.sigma_tau),
            ("sigma_qdot", self.sigma_qdot),
            ("sigma_acc", self.sigma_acc),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid(n, "must be nonnegative"));
            }
        }
        Ok(())
    }
}

/// Per-source noise amplitude spectral density `|T_n(jw)| sigma_n` and
/// their root sum of squares.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseAsd {
    pub omega: Vec<f64>,
    pub tau: Vec<f64>,
    pub qdot: Vec<f64>,
    pub acc: Vec<f64>,
    pub total: Vec<f64>,
}

pub fn noise_asd(cl: &ClosedLoop, nm: &NoiseModel, grid: &FrequencyGrid) -> NoiseAsd {
    let series = |t: &RationalTF, s: f64| -> Vec<f64> {
        grid.points().iter().map(|&w| t.eval(w).norm() * s).collect()
    };
    let tau = series(&cl.t_tau, nm.sigma_tau);
    let qdot = series(&cl.t_qdot, nm.sigma_qdot);
    let acc = series(&cl.t_acc, nm.sigma_acc);
    let total = (0..grid.len())
        .map(|i| (tau[i].powi(2) + qdot[i].powi(2) + acc[i].powi(2)).sqrt())
        .collect();
    NoiseAsd {
        omega: grid.points().to_vec(),
        tau,
        qdot,
        acc,
        total,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::{plant_tfs, SeaParams};

    fn second_order(zeta: f64, wd: f64) -> RationalTF {
        RationalTF::from_coeffs(&[wd * wd], &[wd * wd, 2.0 * zeta * wd, 1.0]).unwrap()
    }

    #[test]
    fn first_order_bode_corner() {
        let g = RationalTF::from_coeffs(&[1.0], &[1.0, 1.0]).unwrap();
        let b = bode(&g, &FrequencyGrid::new(vec![1.0]).unwrap());
        assert!((b.mag_db[0] - MINUS_3DB).abs() < 1e-12);
        assert!((b.phase_deg[0] + 45.0).abs() < 1e-12);
    }

    #[test]
    fn phase_unwrapping() {
        let mut p = vec![170.0, -175.0, -160.0, 175.0];
        unwrap_deg(&mut p);
        assert_eq!(p, vec![170.0, 185.0, 200.0, 175.0]);
    }

    #[test]
    fn bandwidth_cases() {
        let bw = find_bandwidth(&second_order(1.0 / 2f64.sqrt(), 100.0)).unwrap();
        assert!((bw - 100.0).abs() < 0.01);
        let first = RationalTF::from_coeffs(&[1.0], &[1.0, 1.0 / 37.0]).unwrap();
        assert!((find_bandwidth(&first).unwrap() - 37.0).abs() < 1e-4);
        let off = RationalTF::constant(2.0);
        assert!(matches!(find_bandwidth(&off), Err(Error::NonUnityDcGain { .. })));
        assert!(matches!(
            find_bandwidth(&RationalTF::one()),
            Err(Error::NoBandwidthCrossing { .. })
        ));
    }

    #[test]
    fn resonance_closed_form() {
        let z: f64 = 0.7;
        let r = resonance_peak(&second_order(z, 50.0));
        let want = 20.0 * (1.0 / (2.0 * z * (1.0 - z * z).sqrt())).log10();
        assert!((r.peak_db - want).abs() < 1e-6, "{} {}", r.peak_db, want);
        assert!(resonance_peak(&second_order(1.0, 50.0)).peak_db <= 1e-9);
        let p = SeaParams::nominal();
        let rp = resonance_peak(&plant_tfs(&p).h);
        let zn = p.zeta_n();
        let want = 20.0 * (1.0 / (2.0 * zn * (1.0 - zn * zn).sqrt())).log10();
        assert!((rp.peak_db - want).abs() < 1e-6);
        assert!((rp.peak_db - 26.0).abs() < 0.1);
        assert!((rp.omega - p.omega_n()).abs() < 0.1);
    }

    #[test]
    fn default_grid() {
        let g = FrequencyGrid::default();
        assert_eq!(g.len(), 241);
        let hz = g.hz();
        assert!((hz[0] - 0.01).abs() < 1e-12 && (hz[240] - 100.0).abs() < 1e-9);
    }
}

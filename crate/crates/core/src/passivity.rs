//! Positive-real tests for rational impedances.
//!
//! `Z` is positive real when it has no poles in the open right half plane,
//! its imaginary-axis poles are simple with positive real residues, and
//! `Re Z(jw) >= 0` for all `w`. With `num(jw) = A_N(w^2) + jw B_N(w^2)` and
//! likewise for `den`, `Re Z(jw) |den(jw)|^2 = E(w^2)` where
//! `E(x) = A_N A_D + x B_N B_D`, so the sign of `Re Z` only changes at the
//! nonnegative real roots of `E`.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lti::{Polynomial, RationalTF};

pub const DEFAULT_TOL: f64 = 1e-9;
pub const BOUNDARY_TOL: f64 = 1e-6;
const GRID_LO: f64 = 1e-4;
const GRID_HI: f64 = 1e5;
const GRID_POINTS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Polynomial,
    Grid,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PassivityReport {
    pub is_passive: bool,
    pub is_stable: bool,
    /// Passive with an interior minimum of `Re Z` within
    /// `1e-6 |Z(0)|` of zero.
    pub boundary: bool,
    pub min_real_part: f64,
    pub min_real_omega: f64,
    pub max_abs_phase_deg: f64,
    pub max_phase_omega: f64,
    /// Absolute tolerance used for the verdict.
    pub tol: f64,
    pub method: Method,
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

fn re_z(z: &RationalTF, w: f64) -> f64 {
    z.eval(w).re
}

/// Golden-section minimisation of `f` on `[a, b]`.
fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Stability in the positive-real sense: open-LHP poles plus simple
/// imaginary-axis poles with positive real residues.
fn pr_stable(z: &RationalTF) -> bool {
    let den = z.den();
    let poles = den.roots();
    let dden = den.derivative();
    let scale_of = |p: &Complex64| p.norm().max(1.0);
    let mut axis = Vec::new();
    for p in &poles {
        if p.re > 1e-9 * scale_of(p) {
            return false;
        }
        if p.re.abs() <= 1e-9 * scale_of(p) {
            axis.push(*p);
        }
    }
    for (i, p) in axis.iter().enumerate() {
        if axis
            .iter()
            .enumerate()
            .any(|(j, q)| j != i && (p - q).norm() <= 1e-6 * scale_of(p))
        {
            return false;
        }
        let s = Complex64::new(0.0, p.im);
        let res = z.num().eval_complex(s) / dden.eval_complex(s);
        if !(res.re > 0.0 && res.im.abs() <= 1e-6 * res.norm()) {
            return false;
        }
    }
    // improper by one: the pole at infinity needs a positive residue too
    if z.relative_degree() == -1 && z.num().leading() / den.leading() <= 0.0 {
        return false;
    }
    true
}

/// `E(x) = A_N A_D + x B_N B_D`
pub fn even_part_poly(z: &RationalTF) -> Polynomial {
    let (an, bn) = z.num().jw_parts();
    let (ad, bd) = z.den().jw_parts();
    &(&an * &ad) + &(&Polynomial::s() * &(&bn * &bd))
}

fn scale_of(z: &RationalTF, grid: &[f64]) -> f64 {
    let z0 = z.dc_gain().abs();
    if z0.is_finite() && z0 > 0.0 {
        z0
    } else {
        grid.iter()
            .map(|&w| z.eval(w).norm())
            .filter(|m| m.is_finite())
            .fold(0.0, f64::max)
            .max(f64::MIN_POSITIVE)
    }
}

fn check_degree(z: &RationalTF) -> Result<()> {
    let rd = z.relative_degree();
    if !(-1..=1).contains(&rd) && !z.is_zero() {
        return Err(Error::RelativeDegree(rd));
    }
    Ok(())
}

/// Positive-real test via real-root isolation of `E`, cross-checked on a
/// dense grid (10^4 log points, 1e-4 to 1e5 rad/s).
pub fn is_positive_real(z: &RationalTF, rel_tol: f64) -> Result<PassivityReport> {
    check_degree(z)?;
    let grid = log_grid(GRID_LO, GRID_HI, GRID_POINTS);
    let e = even_part_poly(z);
    let mut crit: Vec<f64> = Vec::new();
    let method = if e.is_zero() {
        Method::Grid
    } else {
        let roots = e.roots();
        if roots.iter().all(|r| r.is_finite()) {
            for r in roots {
                if r.re > 0.0 && r.im.abs() <= 1e-6 * r.norm() {
                    crit.push(r.re.sqrt());
                }
            }
            Method::Polynomial
        } else {
            Method::Grid
        }
    };
    crit.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut points = grid.clone();
    if method == Method::Polynomial {
        // midpoints between sign changes and one point past the last root
        let mut last = 0.0;
        for &c in &crit {
            points.push(c);
            if last > 0.0 {
                points.push((last * c).sqrt());
            } else {
                points.push(0.5 * c);
            }
            last = c;
        }
        if last > 0.0 {
            points.push(2.0 * last);
            points.push(10.0 * last);
        }
    }
    report_from_points(z, points, rel_tol, method, &grid)
}

/// Grid-only variant used as a cross-check.
pub fn is_positive_real_grid(z: &RationalTF, rel_tol: f64) -> Result<PassivityReport> {
    check_degree(z)?;
    let grid = log_grid(GRID_LO, GRID_HI, GRID_POINTS);
    report_from_points(z, grid.clone(), rel_tol, Method::Grid, &grid)
}

fn report_from_points(
    z: &RationalTF,
    mut points: Vec<f64>,
    rel_tol: f64,
    method: Method,
    grid: &[f64],
) -> Result<PassivityReport> {
    points.retain(|w| w.is_finite() && *w > 0.0);
    points.sort_by(|a, b| a.partial_cmp(b).unwrap());
    points.dedup();
    let vals: Vec<f64> = points.iter().map(|&w| re_z(z, w)).collect();

    let mut best = (f64::NAN, f64::INFINITY);
    let mut interior = f64::INFINITY;
    for i in 0..points.len() {
        let v = vals[i];
        if !v.is_finite() {
            continue;
        }
        let local_min = i > 0
            && i + 1 < points.len()
            && v <= vals[i - 1]
            && v <= vals[i + 1];
        let candidate = if local_min {
            let (w, fv) = golden_min(|w| re_z(z, w), points[i - 1], points[i + 1], 80);
            let (w, fv) = if fv < v { (w, fv) } else { (points[i], v) };
            interior = interior.min(fv);
            (w, fv)
        } else {
            (points[i], v)
        };
        if candidate.1 < best.1 {
            best = candidate;
        }
    }
    let dc = re_z(z, 0.0);
    if dc.is_finite() && dc < best.1 {
        best = (0.0, dc);
    }

    let (mut max_phase, mut max_phase_w) = (0.0f64, f64::NAN);
    for &w in grid {
        let ph = z.eval(w).arg().to_degrees().abs();
        if ph.is_finite() && ph > max_phase {
            max_phase = ph;
            max_phase_w = w;
        }
    }

    let scale = scale_of(z, grid);
    let tol = rel_tol * scale;
    let is_stable = pr_stable(z);
    let is_passive = is_stable && best.1 >= -tol;
    Ok(PassivityReport {
        is_passive,
        is_stable,
        boundary: is_passive && interior.abs() < BOUNDARY_TOL * scale,
        min_real_part: best.1,
        min_real_omega: best.0,
        max_abs_phase_deg: max_phase,
        max_phase_omega: max_phase_w,
        tol,
        method,
    })
}

/// Phase and distance to the +-90 degree passivity limit at one frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhasePoint {
    pub omega: f64,
    pub phase_deg: f64,
    pub margin_deg: f64,
}

pub fn phase_margin_to_passivity(z: &RationalTF, grid: &[f64]) -> Vec<PhasePoint> {
    grid.iter()
        .map(|&w| {
            let ph = z.eval(w).arg().to_degrees();
            PhasePoint {
                omega: w,
                phase_deg: ph,
                margin_deg: 90.0 - ph.abs(),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::{plant_tfs, SeaParams};

    fn tf(n: &[f64], d: &[f64]) -> RationalTF {
        RationalTF::from_coeffs(n, d).unwrap()
    }

    #[test]
    fn constant_is_passive() {
        let r = is_positive_real(&RationalTF::one(), DEFAULT_TOL).unwrap();
        assert!(r.is_passive && r.is_stable);
    }

    #[test]
    fn allpass_like_is_not() {
        let r = is_positive_real(&tf(&[-1.0, 1.0], &[1.0, 1.0]), DEFAULT_TOL).unwrap();
        assert!(!r.is_passive);
        assert!(r.min_real_part < -0.9);
        assert!(r.min_real_omega < 0.1);
    }

    #[test]
    fn plant_is_passive() {
        let z = plant_tfs(&SeaParams::nominal()).z;
        let r = is_positive_real(&z, DEFAULT_TOL).unwrap();
        assert!(r.is_passive);
        assert_eq!(r.method, Method::Polynomial);
        let g = is_positive_real_grid(&z, DEFAULT_TOL).unwrap();
        assert!(g.is_passive);
    }

    #[test]
    fn integrator_pole_on_axis() {
        let r = is_positive_real(&tf(&[1.0], &[0.0, 1.0]), DEFAULT_TOL).unwrap();
        assert!(r.is_passive && r.is_stable);
        let neg = is_positive_real(&tf(&[-1.0], &[0.0, 1.0]), DEFAULT_TOL).unwrap();
        assert!(!neg.is_stable && !neg.is_passive);
        let double = is_positive_real(&tf(&[1.0], &[0.0, 0.0, 1.0]), DEFAULT_TOL);
        assert!(matches!(double, Err(Error::RelativeDegree(2))));
        let double = is_positive_real(&tf(&[1.0, 1.0], &[0.0, 0.0, 1.0]), DEFAULT_TOL).unwrap();
        assert!(!double.is_stable);
    }

    #[test]
    fn narrow_dip_found_by_polynomial_method() {
        // lightly damped zero pair pushes Re Z negative in a narrow band
        let z = tf(&[1.0, 0.0, 1.0], &[1.0, 2.0, 1.0]);
        let r = is_positive_real(&z, DEFAULT_TOL).unwrap();
        let g = is_positive_real_grid(&z, DEFAULT_TOL).unwrap();
        assert!(r.min_real_part <= g.min_real_part);
        assert!(r.is_passive);
        assert!(r.boundary);
    }

    #[test]
    fn relative_degree_two_rejected() {
        let z = tf(&[1.0], &[1.0, 1.0, 1.0]);
        assert_eq!(is_positive_real(&z, DEFAULT_TOL).unwrap_err(), Error::RelativeDegree(2));
    }

    #[test]
    fn phase_margins() {
        let grid = [0.1, 1.0, 10.0];
        for p in phase_margin_to_passivity(&RationalTF::s(), &grid) {
            assert!((p.phase_deg - 90.0).abs() < 1e-12 && p.margin_deg.abs() < 1e-12);
        }
        for p in phase_margin_to_passivity(&RationalTF::constant(2.0), &grid) {
            assert!(p.phase_deg == 0.0 && p.margin_deg == 90.0);
        }
    }
}

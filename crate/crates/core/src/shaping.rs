//! Impedance shaping add-ons: an outer-loop disturbance observer (DOB) and
//! load-side acceleration feedback (AF), with passivity-preserving gain
//! bounds.

use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use crate::controllers::{butterworth2_den, ClosedLoop, Family, FeedbackStructure};
use crate::error::{invalid, Error, Result};
use crate::lti::{Polynomial, RationalTF};
use crate::passivity::{is_positive_real, DEFAULT_TOL};
use crate::plant::SeaParams;

/// Disturbance observer with nominal model equal to the inner closed loop,
/// Butterworth filter `Q` at `omega_q` rad/s and gain `alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DobConfig {
    pub omega_q: f64,
    pub alpha: f64,
}

/// Acceleration feedback `alpha j_m Q theta''`; `omega_q = None` is unfiltered.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccFbConfig {
    pub omega_q: Option<f64>,
    pub alpha: f64,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(invalid("alpha", format!("must lie in [0, 1], got {alpha}")));
    }
    Ok(())
}

fn check_omega(w: f64) -> Result<()> {
    if !(w.is_finite() && w > 0.0) {
        return Err(invalid("omega_q", "must be positive"));
    }
    Ok(())
}

impl DobConfig {
    pub fn validate(&self) -> Result<()> {
        check_omega(self.omega_q)?;
        check_alpha(self.alpha)
    }
}

impl AccFbConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(w) = self.omega_q {
            check_omega(w)?;
        }
        check_alpha(self.alpha)
    }
}

/// `Q = w^2 / (s^2 + sqrt(2) w s + w^2)`
pub fn butterworth_q(omega_q: f64) -> RationalTF {
    crate::controllers::butterworth2(omega_q)
}

/// `dQ - alpha w_q^2`, the numerator of `1 - alpha Q`.
fn one_minus_alpha_q(omega_q: f64, alpha: f64) -> Polynomial {
    &butterworth2_den(omega_q) - &Polynomial::constant(alpha * omega_q * omega_q)
}

/// Wraps a closed loop with the DOB in closed form:
/// `H_c` unchanged, `Z_c <- (1 - aQ) Z_c`, `T_tau <- aQ + (1 - aQ) T_tau`,
/// other sensitivities scaled by `(1 - aQ)`.
pub fn wrap_dob(inner: &ClosedLoop, cfg: &DobConfig) -> Result<ClosedLoop> {
    cfg.validate()?;
    if cfg.alpha == 0.0 {
        return Ok(ClosedLoop {
            label: format!("{}-dob", inner.label),
            ..inner.clone()
        });
    }
    let dq = butterworth2_den(cfg.omega_q);
    let om = one_minus_alpha_q(cfg.omega_q, cfg.alpha);
    let aw2 = cfg.alpha * cfg.omega_q * cfg.omega_q;
    let scale = |t: &RationalTF| RationalTF::new(t.num() * &om, t.den() * &dq).unwrap();
    let t = &inner.t_tau;
    let t_tau = RationalTF::new(
        &t.den().scale(aw2) + &(t.num() * &om),
        t.den() * &dq,
    )?;
    Ok(ClosedLoop {
        label: format!("{}-dob", inner.label),
        h_c: inner.h_c.clone(),
        z_c: scale(&inner.z_c),
        t_tau,
        t_qdot: scale(&inner.t_qdot),
        t_acc: scale(&inner.t_acc),
    })
}

/// The DOB folded into the four-block form, for simulation:
///
/// ```text
/// d'     = d (dQ - a w^2)          n_f'  = n_f dQ
/// n_tau' = n_tau (dQ - a w^2) + a w^2 P / k
/// n_qdot', n_acc' scaled by (dQ - a w^2)
/// ```
///
/// where `P` is the inner characteristic polynomial. The wrapped loop has
/// characteristic polynomial `P dQ`.
pub fn dob_structure(
    inner: &FeedbackStructure,
    p: &SeaParams,
    cfg: &DobConfig,
) -> Result<FeedbackStructure> {
    cfg.validate()?;
    let om = one_minus_alpha_q(cfg.omega_q, cfg.alpha);
    let aw2 = cfg.alpha * cfg.omega_q * cfg.omega_q;
    let pc = inner.char_poly(p);
    let mut info = inner.info.clone();
    if !inner.n_acc.is_zero() {
        info.warnings
            .push("DOB applied on top of acceleration feedback; choose one method".into());
    }
    info.gains.insert("alpha_dob".into(), cfg.alpha);
    info.gains.insert("omega_q_dob".into(), cfg.omega_q);
    Ok(FeedbackStructure {
        label: format!("{}-dob", inner.label),
        family: inner.family,
        realization: inner.realization,
        den: &inner.den * &om,
        n_f: &inner.n_f * &butterworth2_den(cfg.omega_q),
        n_tau: &(&inner.n_tau * &om) + &pc.scale(aw2 / p.k),
        n_qdot: &inner.n_qdot * &om,
        n_acc: &inner.n_acc * &om,
        info,
    })
}

/// Adds `C_acc = alpha j_m Q` to a structure.
pub fn accfb_structure(
    inner: &FeedbackStructure,
    p: &SeaParams,
    cfg: &AccFbConfig,
) -> Result<FeedbackStructure> {
    cfg.validate()?;
    let mut info = inner.info.clone();
    if !matches!(inner.family, Family::Pd | Family::Fsft) {
        info.warnings.push(format!(
            "acceleration feedback bounds are derived for pd and fsft, not {}",
            inner.family
        ));
    }
    if !inner.n_acc.is_zero() {
        info.warnings
            .push("acceleration feedback applied twice; the gains add".into());
    }
    info.gains.insert("alpha_fa".into(), cfg.alpha);
    if let Some(w) = cfg.omega_q {
        info.gains.insert("omega_q_fa".into(), w);
    }
    let label = format!("{}-af", inner.label);
    Ok(match cfg.omega_q {
        None => FeedbackStructure {
            label,
            n_acc: &inner.n_acc + &inner.den.scale(cfg.alpha * p.j_m),
            info,
            ..inner.clone()
        },
        Some(w) => {
            let dq = butterworth2_den(w);
            FeedbackStructure {
                label,
                family: inner.family,
                realization: inner.realization,
                den: &inner.den * &dq,
                n_f: &inner.n_f * &dq,
                n_tau: &inner.n_tau * &dq,
                n_qdot: &inner.n_qdot * &dq,
                n_acc: &(&inner.n_acc * &dq) + &inner.den.scale(cfg.alpha * p.j_m * w * w),
                info,
            }
        }
    })
}

/// Acceleration feedback wrap, reassembled through the block solver.
pub fn wrap_accfb(
    inner: &FeedbackStructure,
    p: &SeaParams,
    cfg: &AccFbConfig,
) -> Result<ClosedLoop> {
    let s = accfb_structure(inner, p, cfg)?;
    crate::controllers::assemble_closed_loop(p, &s)
}

/// Passivity limit of the DOB gain as a function of frequency, for an inner
/// loop whose apparent impedance has the PD form.
pub fn alpha_dob_at(omega: f64, delta_zeta: f64, zeta_d: f64, omega_d: f64, omega_q: f64) -> f64 {
    let w2 = omega * omega;
    let m = 1.0 - delta_zeta + w2 / (omega_d * omega_d) * delta_zeta;
    let num = (1.0 + w2 * w2 / omega_q.powi(4)) * m;
    let den = (1.0 - w2 / (omega_q * omega_q)) * m
        + 2.0 * SQRT_2 * zeta_d * w2 / (omega_d * omega_q)
            * ((1.0 - w2 / (omega_d * omega_d)) / (4.0 * zeta_d * zeta_d) - 1.0 + delta_zeta);
    num / den
}

/// Minimum over `omega` of the positive branch of [`alpha_dob_at`]: dense
/// log-grid scan on `[1e-3, 1e5]` rad/s, then golden-section refinement.
pub fn alpha_max_dob_analytic(
    delta_zeta: f64,
    zeta_d: f64,
    omega_d: f64,
    omega_q: f64,
) -> Result<f64> {
    for (name, v) in [("zeta_d", zeta_d), ("omega_d", omega_d), ("omega_q", omega_q)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(invalid(name, "must be positive"));
        }
    }
    if !(delta_zeta > 0.0 && delta_zeta <= 1.0) {
        return Err(invalid("delta_zeta", "must lie in (0, 1]"));
    }
    let f = |w: f64| {
        let a = alpha_dob_at(w, delta_zeta, zeta_d, omega_d, omega_q);
        if a > 0.0 && a.is_finite() {
            a
        } else {
            f64::INFINITY
        }
    };
    let n = 10_000;
    let (lo, hi) = (1e-3f64.ln(), 1e5f64.ln());
    let grid: Vec<f64> = (0..n)
        .map(|i| (lo + (hi - lo) * i as f64 / (n - 1) as f64).exp())
        .collect();
    let vals: Vec<f64> = grid.iter().map(|&w| f(w)).collect();
    let (imin, &vmin) = vals
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .unwrap();
    if !vmin.is_finite() {
        return Err(Error::NoPositiveBound);
    }
    let a = grid[imin.saturating_sub(1)];
    let b = grid[(imin + 1).min(n - 1)];
    let (_, refined) = golden(&f, a, b);
    Ok(refined.min(vmin))
}

fn golden(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    for _ in 0..100 {
        if f(c) < f(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - g * (b - a);
        d = a + g * (b - a);
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Largest `alpha` in `[0, 1]` for which `make_z(alpha)` is positive real,
/// by bisection to `1e-4`.
pub fn alpha_max_numeric<F>(make_z: F) -> Result<f64>
where
    F: Fn(f64) -> Result<RationalTF>,
{
    let passive = |a: f64| -> Result<bool> {
        match is_positive_real(&make_z(a)?, DEFAULT_TOL) {
            Ok(r) => Ok(r.is_passive),
            Err(Error::RelativeDegree(_)) => Ok(false),
            Err(e) => Err(e),
        }
    };
    let r0 = is_positive_real(&make_z(0.0)?, DEFAULT_TOL)?;
    if !r0.is_stable {
        return Err(Error::UnstableInner);
    }
    if !r0.is_passive {
        return Err(Error::InnerNonPassive {
            min_real: r0.min_real_part,
            omega: r0.min_real_omega,
        });
    }
    if passive(1.0)? {
        return Ok(1.0);
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while hi - lo > 1e-4 {
        let mid = 0.5 * (lo + hi);
        if passive(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

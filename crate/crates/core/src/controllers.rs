//! Gain synthesis for the five torque controller families and closed-loop
//! assembly.
//!
//! Every controller is expressed as four blocks over one common denominator
//! `d`:
//!
//! ```text
//! tau_m = F tau_d - C_tau tau_k~ - C_qdot q'~ + C_acc theta''~
//! F = n_f / d,  C_tau = n_tau / d,  C_qdot = n_qdot / d,  C_acc = n_acc / d
//! ```
//!
//! With `D = j_m s^2 + b_m s + k` the closed loop has the characteristic
//! polynomial `P = D d + k n_tau + s n_qdot` and
//!
//! ```text
//! H_c = k n_f / P                      T_tau  = k n_tau / P
//! Z_c = k ((j_m s + b_m) d + n_qdot - s n_acc) / P
//! T_qdot = k n_qdot / P                T_acc  = k n_acc / P
//! ```
//!
//! `Z_c` is reported as `tau_k / (-theta')`, the sign under which passive
//! tunings are positive real.

use std::collections::BTreeMap;
use std::f64::consts::{PI, SQRT_2};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lti::{Polynomial, RationalTF};
use crate::plant::SeaParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Pd,
    Fsft,
    Fsfm,
    CascadedPid,
    Mrac,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::Pd,
        Family::Fsft,
        Family::Fsfm,
        Family::CascadedPid,
        Family::Mrac,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Family::Pd => "pd",
            Family::Fsft => "fsft",
            Family::Fsfm => "fsfm",
            Family::CascadedPid => "cascaded_pid",
            Family::Mrac => "mrac",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Bandwidth (-3 dB crossing of the torque transfer) and damping target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TuningTarget {
    pub omega_bw: f64,
    pub zeta_d: f64,
}

impl TuningTarget {
    pub fn new(omega_bw: f64, zeta_d: f64) -> Result<Self> {
        let t = Self { omega_bw, zeta_d };
        t.validate()?;
        Ok(t)
    }

    pub fn from_hz(bw_hz: f64, zeta_d: f64) -> Result<Self> {
        Self::new(2.0 * PI * bw_hz, zeta_d)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega_bw.is_finite() && self.omega_bw > 0.0) {
            return Err(invalid("omega_bw", "must be positive"));
        }
        if !(self.zeta_d > 0.0 && self.zeta_d <= 2.0) {
            return Err(invalid("zeta_d", "must lie in (0, 2]"));
        }
        Ok(())
    }
}

/// How derivative and integral terms are realized.
///
/// `derivative_cutoff`: a pure `K s` becomes `K s B(s)` with `B` the
/// second-order Butterworth low-pass at this cutoff (rad/s); `None` keeps the
/// ideal derivative. `integrator_leak`: `1/s` becomes `1/(s + eps)`; `None`
/// keeps the ideal integrator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Realization {
    pub derivative_cutoff: Option<f64>,
    pub integrator_leak: Option<f64>,
}

pub const DERIVATIVE_CUTOFF_HZ: f64 = 160.0;
pub const DEFAULT_LEAK: f64 = 0.999;

impl Realization {
    pub fn ideal() -> Self {
        Self {
            derivative_cutoff: None,
            integrator_leak: None,
        }
    }

    /// 160 Hz derivative filter, ideal integrators.
    pub fn filtered() -> Self {
        Self {
            derivative_cutoff: Some(2.0 * PI * DERIVATIVE_CUTOFF_HZ),
            integrator_leak: None,
        }
    }

    /// 160 Hz derivative filter and leaky integrators whose bilinear image
    /// has its pole at `a_leak` when sampled at `fs`.
    pub fn implementation(fs: f64, a_leak: f64) -> Self {
        Self {
            derivative_cutoff: Some(2.0 * PI * DERIVATIVE_CUTOFF_HZ),
            integrator_leak: Some(leak_epsilon(a_leak, fs)),
        }
    }

    /// Denominator of the derivative filter (`1` when ideal).
    pub fn derivative_den(&self) -> Polynomial {
        match self.derivative_cutoff {
            Some(wc) => butterworth2_den(wc),
            None => Polynomial::one(),
        }
    }

    /// Numerator multiplying `K s` (`wc^2` when filtered).
    pub fn derivative_gain(&self) -> f64 {
        self.derivative_cutoff.map_or(1.0, |wc| wc * wc)
    }

    /// Integrator denominator `s` or `s + eps`.
    pub fn integrator(&self) -> Polynomial {
        Polynomial::new(vec![self.integrator_leak.unwrap_or(0.0), 1.0])
    }
}

/// Continuous leak rate whose Tustin image has its pole at `a_leak`.
pub fn leak_epsilon(a_leak: f64, fs: f64) -> f64 {
    2.0 * fs * (1.0 - a_leak) / (1.0 + a_leak)
}

/// `s^2 + sqrt(2) w s + w^2`
pub fn butterworth2_den(w: f64) -> Polynomial {
    Polynomial::new(vec![w * w, SQRT_2 * w, 1.0])
}

/// Unity-DC second-order Butterworth low-pass.
pub fn butterworth2(w: f64) -> RationalTF {
    RationalTF::new(Polynomial::constant(w * w), butterworth2_den(w)).unwrap()
}

/// Outcome of a tuning-rule check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintStatus {
    Satisfied,
    /// Satisfied with at least one rule met with equality.
    Boundary(Vec<String>),
    Violated(Vec<String>),
}

/// Design metadata carried alongside a synthesized structure.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DesignInfo {
    pub gains: BTreeMap<String, f64>,
    pub omega_d: Option<f64>,
    pub delta_zeta: Option<f64>,
    pub constraints: Option<ConstraintStatus>,
    pub warnings: Vec<String>,
}

/// A controller as four blocks over a common denominator.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackStructure {
    pub label: String,
    pub family: Family,
    pub realization: Realization,
    pub den: Polynomial,
    pub n_f: Polynomial,
    pub n_tau: Polynomial,
    pub n_qdot: Polynomial,
    pub n_acc: Polynomial,
    pub info: DesignInfo,
}

impl FeedbackStructure {
    fn block(&self, n: &Polynomial) -> RationalTF {
        RationalTF::new(n.clone(), self.den.clone()).expect("denominator is nonzero")
    }

    pub fn f(&self) -> RationalTF {
        self.block(&self.n_f)
    }

    pub fn c_tau(&self) -> RationalTF {
        self.block(&self.n_tau)
    }

    pub fn c_qdot(&self) -> RationalTF {
        self.block(&self.n_qdot)
    }

    pub fn c_acc(&self) -> RationalTF {
        self.block(&self.n_acc)
    }

    /// Closed-loop characteristic polynomial `D d + k n_tau + s n_qdot`.
    pub fn char_poly(&self, p: &SeaParams) -> Polynomial {
        &(&(&p.char_poly() * &self.den) + &self.n_tau.scale(p.k))
            + &(&Polynomial::s() * &self.n_qdot)
    }

    pub fn gain(&self, name: &str) -> Option<f64> {
        self.info.gains.get(name).copied()
    }

    pub fn is_proper(&self) -> bool {
        let d = self.den.degree();
        [&self.n_f, &self.n_tau, &self.n_qdot, &self.n_acc]
            .iter()
            .all(|n| n.is_zero() || n.degree() <= d)
    }
}

/// Closed-loop torque transfer, apparent impedance and noise sensitivities.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoop {
    pub label: String,
    pub h_c: RationalTF,
    pub z_c: RationalTF,
    pub t_tau: RationalTF,
    pub t_qdot: RationalTF,
    pub t_acc: RationalTF,
}

/// Adaptive gains of the MRAC and their learning parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MracState {
    pub b_hat: f64,
    pub c_hat: f64,
    pub rho: f64,
    pub sigma: f64,
}

impl MracState {
    /// Locked-output steady state `b^ = 0`, `c^ = 1`.
    pub fn converged() -> Self {
        Self {
            b_hat: 0.0,
            c_hat: 1.0,
            rho: 0.999,
            sigma: 0.001,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho >= 0.0) {
            return Err(invalid("rho", "must be nonnegative"));
        }
        if !(self.sigma >= 0.0) {
            return Err(invalid("sigma", "must be nonnegative"));
        }
        Ok(())
    }
}

/// Controlled natural frequency of a mass-spring-damper with damping `zeta`
/// whose -3 dB crossing sits at `omega_bw`.
pub fn omega_d_for_bandwidth(omega_bw: f64, zeta: f64) -> f64 {
    let a = 2.0 * zeta * zeta;
    omega_bw / (1.0 - a + (1.0 + (a - 1.0).powi(2)).sqrt()).sqrt()
}

fn omega_d_pd(omega_bw: f64, zeta_d: f64, delta: f64) -> f64 {
    let a = 2.0 * zeta_d * zeta_d * (1.0 - 2.0 * delta * delta);
    omega_bw / (1.0 - a + (1.0 + (a - 1.0).powi(2)).sqrt()).sqrt()
}

/// Solves the coupled `(omega_d, delta_zeta)` equations of the PD design by
/// damped fixed-point iteration from `delta_zeta = 1`.
pub fn pd_fixed_point(p: &SeaParams, t: &TuningTarget) -> Result<(f64, f64)> {
    let zn_wn = p.zeta_n() * p.omega_n();
    let f = |delta: f64| 1.0 - zn_wn / (t.zeta_d * omega_d_pd(t.omega_bw, t.zeta_d, delta));
    let mut delta = 1.0;
    let mut residual = f64::INFINITY;
    for _ in 0..100 {
        let next = 0.5 * (delta + f(delta));
        residual = (next - delta).abs();
        delta = next;
        if residual < 1e-10 {
            return Ok((omega_d_pd(t.omega_bw, t.zeta_d, delta), delta));
        }
    }
    Err(Error::NoConvergence {
        iterations: 100,
        residual,
    })
}

fn state_feedback_gains(p: &SeaParams, zeta_d: f64, omega_d: f64) -> (f64, f64) {
    let (wn, zn) = (p.omega_n(), p.zeta_n());
    let kp = omega_d * omega_d / (wn * wn) - 1.0;
    let kd = 2.0 * (zeta_d * omega_d - zn * wn) / (wn * wn);
    (kp, kd)
}

fn sign_warnings(gains: &[(&str, f64)]) -> Vec<String> {
    gains
        .iter()
        .filter(|(_, v)| *v < 0.0)
        .map(|(n, v)| format!("{n} = {v:.6} is negative"))
        .collect()
}

/// `K_p + K_d s`, with the derivative realized per `r`, over `r.derivative_den()`.
fn pd_numerator(kp: f64, kd: f64, r: &Realization) -> Polynomial {
    &r.derivative_den().scale(kp) + &Polynomial::monomial(kd * r.derivative_gain(), 1)
}

/// Full-state feedback on interaction torque and its rate.
pub fn synth_fsft(p: &SeaParams, t: &TuningTarget, r: &Realization) -> Result<FeedbackStructure> {
    p.validate()?;
    t.validate()?;
    let wd = omega_d_for_bandwidth(t.omega_bw, t.zeta_d);
    let (kp, kd) = state_feedback_gains(p, t.zeta_d, wd);
    let d = r.derivative_den();
    Ok(FeedbackStructure {
        label: "fsft".into(),
        family: Family::Fsft,
        realization: *r,
        n_f: d.scale(1.0 + kp),
        n_tau: pd_numerator(kp, kd, r),
        n_qdot: Polynomial::zero(),
        n_acc: Polynomial::zero(),
        den: d,
        info: DesignInfo {
            gains: [("K_P".to_string(), kp), ("K_D".to_string(), kd)].into(),
            omega_d: Some(wd),
            delta_zeta: Some(1.0 - p.zeta_n() * p.omega_n() / (t.zeta_d * wd)),
            constraints: None,
            warnings: sign_warnings(&[("K_P", kp), ("K_D", kd)]),
        },
    })
}

/// Full-state feedback on motor position, written as torque plus motor
/// velocity feedback.
pub fn synth_fsfm(p: &SeaParams, t: &TuningTarget, r: &Realization) -> Result<FeedbackStructure> {
    p.validate()?;
    t.validate()?;
    let wd = omega_d_for_bandwidth(t.omega_bw, t.zeta_d);
    let kp = wd * wd / (p.omega_n() * p.omega_n()) - 1.0;
    let kd = 2.0 * p.j_m * (t.zeta_d * wd - p.zeta_n() * p.omega_n());
    Ok(FeedbackStructure {
        label: "fsfm".into(),
        family: Family::Fsfm,
        realization: *r,
        den: Polynomial::one(),
        n_f: Polynomial::constant(1.0 + kp),
        n_tau: Polynomial::constant(kp),
        n_qdot: Polynomial::constant(kd),
        n_acc: Polynomial::zero(),
        info: DesignInfo {
            gains: [("K_P".to_string(), kp), ("K_D".to_string(), kd)].into(),
            omega_d: Some(wd),
            delta_zeta: Some(1.0 - p.zeta_n() * p.omega_n() / (t.zeta_d * wd)),
            constraints: None,
            warnings: sign_warnings(&[("K_P", kp), ("K_D", kd)]),
        },
    })
}

/// PD on torque error with feedforward, using the damping-corrected
/// controlled frequency.
pub fn synth_pd(p: &SeaParams, t: &TuningTarget, r: &Realization) -> Result<FeedbackStructure> {
    p.validate()?;
    t.validate()?;
    let (wd, delta) = pd_fixed_point(p, t)?;
    let (kp, kd) = state_feedback_gains(p, t.zeta_d, wd);
    let d = r.derivative_den();
    let n_tau = pd_numerator(kp, kd, r);
    Ok(FeedbackStructure {
        label: "pd".into(),
        family: Family::Pd,
        realization: *r,
        n_f: &n_tau + &d,
        n_tau,
        n_qdot: Polynomial::zero(),
        n_acc: Polynomial::zero(),
        den: d,
        info: DesignInfo {
            gains: [("K_P".to_string(), kp), ("K_D".to_string(), kd)].into(),
            omega_d: Some(wd),
            delta_zeta: Some(delta),
            constraints: None,
            warnings: sign_warnings(&[("K_P", kp), ("K_D", kd)]),
        },
    })
}

/// Gains of the cascaded controller: outer PID on torque, inner PI on motor
/// velocity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CascadedPidGains {
    pub k_po: f64,
    pub k_do: f64,
    pub k_io: f64,
    pub k_pi: f64,
    pub k_ii: f64,
}

impl CascadedPidGains {
    /// The nominal tuning of the theoretical comparison.
    pub fn nominal() -> Self {
        Self {
            k_po: 1.0,
            k_do: 0.015,
            k_io: 0.5,
            k_pi: 6.0,
            k_ii: 3.0,
        }
    }

    /// Passivity tuning rules `K_Pi >= j_m`, `K_Ii <= K_Pi/2`,
    /// `K_Io <= K_Po/2`, all non-strict.
    pub fn check_constraints(&self, p: &SeaParams) -> ConstraintStatus {
        let rules = [
            ("K_Pi >= j_m", self.k_pi, p.j_m),
            ("K_Ii <= 0.5 K_Pi", 0.5 * self.k_pi, self.k_ii),
            ("K_Io <= 0.5 K_Po", 0.5 * self.k_po, self.k_io),
        ];
        let mut violated = Vec::new();
        let mut boundary = Vec::new();
        for (name, big, small) in rules {
            let scale = big.abs().max(small.abs()).max(f64::MIN_POSITIVE);
            if (big - small).abs() <= 1e-12 * scale {
                boundary.push(name.to_string());
            } else if big < small {
                violated.push(name.to_string());
            }
        }
        if !violated.is_empty() {
            ConstraintStatus::Violated(violated)
        } else if !boundary.is_empty() {
            ConstraintStatus::Boundary(boundary)
        } else {
            ConstraintStatus::Satisfied
        }
    }
}

/// Cascaded PID: `tau_m = G_PI (G_PID (tau_d - tau_k~) - q'~)`.
pub fn synth_cascaded_pid(
    p: &SeaParams,
    g: &CascadedPidGains,
    r: &Realization,
) -> Result<FeedbackStructure> {
    p.validate()?;
    for (name, v) in [
        ("k_po", g.k_po),
        ("k_do", g.k_do),
        ("k_io", g.k_io),
        ("k_pi", g.k_pi),
        ("k_ii", g.k_ii),
    ] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(invalid(name, "must be nonnegative"));
        }
    }
    let i = r.integrator();
    let b = r.derivative_den();
    // G_PI = (K_Pi I + K_Ii) / I
    let pi_num = &i.scale(g.k_pi) + &Polynomial::constant(g.k_ii);
    // G_PID = (K_Po I B + K_Io B + K_Do wc^2 s I) / (I B)
    let pid_num = &(&(&i * &b).scale(g.k_po) + &b.scale(g.k_io))
        + &(&Polynomial::monomial(g.k_do * r.derivative_gain(), 1) * &i);
    let den = &(&i * &i) * &b;
    let n_tau = &pi_num * &pid_num;
    let n_qdot = &(&pi_num * &i) * &b;
    let status = g.check_constraints(p);
    let mut warnings = Vec::new();
    match &status {
        ConstraintStatus::Violated(v) => {
            warnings.extend(v.iter().map(|n| format!("tuning rule violated: {n}")))
        }
        ConstraintStatus::Boundary(v) => {
            warnings.extend(v.iter().map(|n| format!("tuning rule met with equality: {n}")))
        }
        ConstraintStatus::Satisfied => {}
    }
    Ok(FeedbackStructure {
        label: "cascaded_pid".into(),
        family: Family::CascadedPid,
        realization: *r,
        den,
        n_f: n_tau.clone(),
        n_tau,
        n_qdot,
        n_acc: Polynomial::zero(),
        info: DesignInfo {
            gains: [
                ("K_Po".to_string(), g.k_po),
                ("K_Do".to_string(), g.k_do),
                ("K_Io".to_string(), g.k_io),
                ("K_Pi".to_string(), g.k_pi),
                ("K_Ii".to_string(), g.k_ii),
            ]
            .into(),
            omega_d: None,
            delta_zeta: None,
            constraints: Some(status),
            warnings,
        },
    })
}

/// Fixed gains of the MRAC (independent of the adaptive state).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MracGains {
    pub k_p: f64,
    pub k_d: f64,
    pub k_c: f64,
    pub omega_d: f64,
    pub zeta_d: f64,
}

pub fn mrac_gains(p: &SeaParams, t: &TuningTarget) -> MracGains {
    let (wn, zn) = (p.omega_n(), p.zeta_n());
    let wd = omega_d_for_bandwidth(t.omega_bw, t.zeta_d);
    MracGains {
        k_p: wd * wd / (wn * wn),
        k_d: (2.0 * wd - 2.0 * zn * wn) / (wn * wn),
        k_c: 2.0 * wd * (1.0 - t.zeta_d) / (wn * wn),
        omega_d: wd,
        zeta_d: t.zeta_d,
    }
}

/// `w_d^2 / (s^2 + 2 zeta_d w_d s + w_d^2)`
pub fn mrac_reference_model(g: &MracGains) -> RationalTF {
    let w = g.omega_d;
    RationalTF::from_coeffs(&[w * w], &[w * w, 2.0 * g.zeta_d * w, 1.0]).unwrap()
}

/// MRAC with the adaptive gains frozen at `state`:
/// `tau_m = K_P (tau_d - tau_k~) - K_D tau_k~' + K_C H_r tau_d' + b^ tau_k~' + c^ tau_k~`.
///
/// Returns the structure and the reference model `H_r`.
pub fn synth_mrac(
    p: &SeaParams,
    t: &TuningTarget,
    state: &MracState,
    r: &Realization,
) -> Result<(FeedbackStructure, RationalTF)> {
    p.validate()?;
    t.validate()?;
    state.validate()?;
    let g = mrac_gains(p, t);
    let hr = mrac_reference_model(&g);
    let den_r = hr.den().clone();
    let b = r.derivative_den();
    let wd2 = g.omega_d * g.omega_d;
    let f_num = &den_r.scale(g.k_p) + &Polynomial::monomial(g.k_c * wd2, 1);
    let c_num = pd_numerator(g.k_p - state.c_hat, g.k_d - state.b_hat, r);
    let fs = FeedbackStructure {
        label: "mrac".into(),
        family: Family::Mrac,
        realization: *r,
        den: &den_r * &b,
        n_f: &f_num * &b,
        n_tau: &c_num * &den_r,
        n_qdot: Polynomial::zero(),
        n_acc: Polynomial::zero(),
        info: DesignInfo {
            gains: [
                ("K_P".to_string(), g.k_p),
                ("K_D".to_string(), g.k_d),
                ("K_C".to_string(), g.k_c),
                ("b_hat".to_string(), state.b_hat),
                ("c_hat".to_string(), state.c_hat),
            ]
            .into(),
            omega_d: Some(g.omega_d),
            delta_zeta: None,
            constraints: None,
            warnings: Vec::new(),
        },
    };
    Ok((fs, hr))
}

/// Solves the block system for the closed-loop transfers.
pub fn assemble_closed_loop(p: &SeaParams, c: &FeedbackStructure) -> Result<ClosedLoop> {
    p.validate()?;
    if c.den.is_zero() {
        return Err(Error::ZeroPolynomial);
    }
    let pc = c.char_poly(p);
    if pc.is_zero() {
        return Err(Error::SingularLoop);
    }
    let k = p.k;
    let over_p = |n: Polynomial| RationalTF::new(n, pc.clone()).unwrap();
    let z_num = &(&(&p.motor_admittance_den() * &c.den) + &c.n_qdot)
        - &(&Polynomial::s() * &c.n_acc);
    Ok(ClosedLoop {
        label: c.label.clone(),
        h_c: over_p(c.n_f.scale(k)),
        z_c: over_p(z_num.scale(k)),
        t_tau: over_p(c.n_tau.scale(k)),
        t_qdot: over_p(c.n_qdot.scale(k)),
        t_acc: over_p(c.n_acc.scale(k)),
    })
}

/// Synthesizes any family from a target (cascaded PID uses `pid_gains`).
pub fn synthesize(
    family: Family,
    p: &SeaParams,
    t: &TuningTarget,
    pid_gains: &CascadedPidGains,
    mrac: &MracState,
    r: &Realization,
) -> Result<FeedbackStructure> {
    match family {
        Family::Pd => synth_pd(p, t, r),
        Family::Fsft => synth_fsft(p, t, r),
        Family::Fsfm => synth_fsfm(p, t, r),
        Family::CascadedPid => synth_cascaded_pid(p, pid_gains, r),
        Family::Mrac => synth_mrac(p, t, mrac, r).map(|(s, _)| s),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::plant_tfs;

    fn nominal() -> SeaParams {
        SeaParams::nominal()
    }

    fn t30() -> TuningTarget {
        TuningTarget::from_hz(30.0, 0.7).unwrap()
    }

    #[test]
    fn fsft_gains_match_direct_evaluation() {
        let p = nominal();
        let s = synth_fsft(&p, &t30(), &Realization::ideal()).unwrap();
        let wbw = 2.0 * PI * 30.0;
        let z2: f64 = 2.0 * 0.49;
        let wd = wbw / (1.0 - z2 + (1.0 + (z2 - 1.0) * (z2 - 1.0)).sqrt()).sqrt();
        let wn2 = 1535.0 / 0.9581;
        let kp = wd * wd / wn2 - 1.0;
        let kd = 2.0 * (0.7 * wd - 1.9162 / (2.0 * 0.9581)) / wn2;
        assert!((s.info.omega_d.unwrap() - wd).abs() < 1e-9);
        assert!((wd - 186.6).abs() < 0.05);
        assert!((s.gain("K_P").unwrap() - kp).abs() < 1e-12);
        assert!((s.gain("K_D").unwrap() - kd).abs() < 1e-12);
        assert!((kp - 20.74).abs() < 0.005 && (kd - 0.1618).abs() < 5e-5);
    }

    #[test]
    fn fsfm_gain() {
        let s = synth_fsfm(&nominal(), &t30(), &Realization::ideal()).unwrap();
        assert!((s.gain("K_D").unwrap() - 248.4).abs() < 0.05);
    }

    #[test]
    fn critical_damping_collapse() {
        let wd = omega_d_for_bandwidth(100.0, 1.0 / SQRT_2);
        assert!((wd - 100.0).abs() < 1e-12);
    }

    #[test]
    fn identity_tuning_is_open_loop() {
        let p = nominal();
        let a: f64 = 2.0 * p.zeta_n() * p.zeta_n();
        let wbw = p.omega_n() * (1.0 - a + (1.0 + (a - 1.0).powi(2)).sqrt()).sqrt();
        let t = TuningTarget::new(wbw, p.zeta_n()).unwrap();
        let s = synth_fsft(&p, &t, &Realization::ideal()).unwrap();
        assert!(s.gain("K_P").unwrap().abs() < 1e-12);
        assert!(s.gain("K_D").unwrap().abs() < 1e-12);
        let cl = assemble_closed_loop(&p, &s).unwrap();
        assert!(cl.h_c.approx_eq(&plant_tfs(&p).h, 1e-9));
    }

    #[test]
    fn pd_fixed_point_values() {
        let p = nominal();
        let t = TuningTarget::from_hz(30.0, 1.0).unwrap();
        let (wd, d) = pd_fixed_point(&p, &t).unwrap();
        assert!((wd - 77.2).abs() < 0.05, "{wd}");
        assert!((d - 0.987).abs() < 5e-4, "{d}");
    }

    #[test]
    fn open_loop_structure() {
        let p = nominal();
        let s = FeedbackStructure {
            label: "open".into(),
            family: Family::Fsft,
            realization: Realization::ideal(),
            den: Polynomial::one(),
            n_f: Polynomial::one(),
            n_tau: Polynomial::zero(),
            n_qdot: Polynomial::zero(),
            n_acc: Polynomial::zero(),
            info: DesignInfo::default(),
        };
        let cl = assemble_closed_loop(&p, &s).unwrap();
        let pt = plant_tfs(&p);
        assert!(cl.h_c.approx_eq(&pt.h, 1e-14));
        assert!(cl.z_c.approx_eq(&pt.z, 1e-14));
        assert!(cl.t_tau.is_zero() && cl.t_qdot.is_zero() && cl.t_acc.is_zero());
    }

    #[test]
    fn cascaded_pid_degenerates_without_integrators() {
        let p = nominal();
        let g = CascadedPidGains {
            k_io: 0.0,
            k_ii: 0.0,
            ..CascadedPidGains::nominal()
        };
        let s = synth_cascaded_pid(&p, &g, &Realization::ideal()).unwrap();
        let c_tau = s.c_tau().minreal(1e-8);
        let want = RationalTF::from_coeffs(&[g.k_pi * g.k_po, g.k_pi * g.k_do], &[1.0]).unwrap();
        assert!(c_tau.approx_eq(&want, 1e-12), "{c_tau}");
        assert!(s.c_qdot().minreal(1e-8).approx_eq(&RationalTF::constant(g.k_pi), 1e-12));
    }

    #[test]
    fn cascaded_pid_constraint_boundary() {
        let st = CascadedPidGains::nominal().check_constraints(&nominal());
        assert_eq!(
            st,
            ConstraintStatus::Boundary(vec!["K_Ii <= 0.5 K_Pi".into(), "K_Io <= 0.5 K_Po".into()])
        );
        let bad = CascadedPidGains {
            k_pi: 0.5,
            k_ii: 0.1,
            ..CascadedPidGains::nominal()
        };
        assert!(matches!(bad.check_constraints(&nominal()), ConstraintStatus::Violated(_)));
    }

    #[test]
    fn mrac_zero_damping_correction_at_unit_zeta() {
        let g = mrac_gains(&nominal(), &TuningTarget::from_hz(30.0, 1.0).unwrap());
        assert_eq!(g.k_c, 0.0);
    }

    #[test]
    fn singular_loop_detected() {
        let p = SeaParams::new(0.5, 0.25, 1.0).unwrap();
        // D + k n_tau = 0 with d = 1, n_tau = -D/k
        let s = FeedbackStructure {
            label: "bad".into(),
            family: Family::Pd,
            realization: Realization::ideal(),
            den: Polynomial::one(),
            n_f: Polynomial::one(),
            n_tau: p.char_poly().scale(-1.0),
            n_qdot: Polynomial::zero(),
            n_acc: Polynomial::zero(),
            info: DesignInfo::default(),
        };
        assert_eq!(assemble_closed_loop(&p, &s).unwrap_err(), Error::SingularLoop);
    }
}

//! Discrete-time test bench: a continuous actuator model integrated with RK4
//! under a sampled controller, the three identification protocols and the
//! MRAC adaptation dynamics.

use std::collections::VecDeque;
use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::analysis::NoiseModel;
use crate::controllers::{
    butterworth2_den, mrac_gains, mrac_reference_model, Family, FeedbackStructure, MracGains,
    MracState, Realization, TuningTarget,
};
use crate::error::{invalid, Error, Result};
use crate::lti::{discretize_bilinear, ChainFilter, Polynomial, RationalTF};
use crate::plant::SeaParams;

/// Velocity band of the Karnopp stick-slip model, rad/s.
pub const KARNOPP_BAND: f64 = 1e-4;

/// Torque magnitude treated as numerical blow-up.
const BLOWUP_TORQUE: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Friction {
    /// Sliding friction torque, N m.
    pub coulomb: f64,
    /// Breakaway torque, N m.
    pub stiction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Hz
    pub control_rate: f64,
    /// RK4 steps per control period.
    pub plant_substeps: usize,
    /// Hz; must divide `control_rate`.
    pub record_rate: f64,
    /// s; protocols override this with their schedule length.
    pub duration: f64,
    /// N m
    pub torque_limit: f64,
    pub friction: Option<Friction>,
    pub seed: u64,
    pub noise: NoiseModel,
    /// Whole control samples of measurement latency.
    pub measurement_delay: usize,
    /// Saturation held longer than this (s) is reported as divergence.
    pub max_saturation_time: f64,
    /// Drop the time series from protocol results after identification.
    pub keep_series: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            control_rate: 1000.0,
            plant_substeps: 10,
            record_rate: 1000.0,
            duration: 1.0,
            torque_limit: 100.0,
            friction: None,
            seed: 0,
            noise: NoiseModel::nominal(),
            measurement_delay: 0,
            max_saturation_time: 0.5,
            keep_series: true,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.control_rate > 0.0 && self.control_rate.is_finite()) {
            return Err(invalid("control_rate", "must be positive"));
        }
        if self.plant_substeps == 0 {
            return Err(invalid("plant_substeps", "must be at least 1"));
        }
        if !(self.record_rate > 0.0 && self.record_rate <= self.control_rate) {
            return Err(invalid("record_rate", "must lie in (0, control_rate]"));
        }
        let ratio = self.control_rate / self.record_rate;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio {
            return Err(invalid("record_rate", "must divide control_rate"));
        }
        if !(self.duration >= 0.0 && self.duration.is_finite()) {
            return Err(invalid("duration", "must be nonnegative"));
        }
        if !(self.torque_limit > 0.0) {
            return Err(invalid("torque_limit", "must be positive"));
        }
        if let Some(f) = &self.friction {
            if !(f.coulomb >= 0.0 && f.stiction >= 0.0) {
                return Err(invalid("friction", "torques must be nonnegative"));
            }
        }
        if !(self.max_saturation_time > 0.0) {
            return Err(invalid("max_saturation_time", "must be positive"));
        }
        self.noise.validate()
    }

    pub fn decimation(&self) -> usize {
        (self.control_rate / self.record_rate).round() as usize
    }
}

/// Bilinear leaky integrator `1/(s + eps)` whose discrete pole is `leak`:
/// `y[n] = leak y[n-1] + T (1 + leak)/4 (x[n] + x[n-1])`.
#[derive(Debug, Clone, PartialEq)]
pub struct LeakyIntegratorState {
    pub accumulator: f64,
    leak: f64,
    gain: f64,
    prev_input: f64,
}

impl LeakyIntegratorState {
    pub fn new(leak: f64, sample_period: f64) -> Result<Self> {
        if !(leak > 0.0 && leak <= 1.0) {
            return Err(invalid("leak", "must lie in (0, 1]"));
        }
        if !(sample_period > 0.0) {
            return Err(invalid("sample_period", "must be positive"));
        }
        Ok(Self {
            accumulator: 0.0,
            leak,
            gain: 0.25 * sample_period * (1.0 + leak),
            prev_input: 0.0,
        })
    }

    pub fn leak(&self) -> f64 {
        self.leak
    }

    pub fn step(&mut self, x: f64) -> f64 {
        self.accumulator = self.leak * self.accumulator + self.gain * (x + self.prev_input);
        self.prev_input = x;
        self.accumulator
    }
}

/// Sensor readings handed to a controller (noise included).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Measurement {
    pub tau_k: f64,
    pub qdot: f64,
    pub theta_ddot: f64,
}

pub trait DiscreteController: Send {
    /// Motor torque command for this sample.
    fn step(&mut self, tau_d: f64, m: &Measurement) -> f64;
    fn label(&self) -> &str;
    fn adaptive_state(&self) -> Option<MracState> {
        None
    }
}

/// Linear controller `tau_m = F tau_d - C_tau tau_k - C_q qdot + C_a theta_ddot`
/// with each block discretized separately.
#[derive(Debug, Clone)]
pub struct BlockController {
    label: String,
    f: Option<ChainFilter>,
    c_tau: Option<ChainFilter>,
    c_qdot: Option<ChainFilter>,
    c_acc: Option<ChainFilter>,
}

impl BlockController {
    pub fn new(s: &FeedbackStructure, fs: f64) -> Result<Self> {
        let disc = |n: &Polynomial| -> Result<Option<ChainFilter>> {
            if n.is_zero() {
                return Ok(None);
            }
            let tf = RationalTF::new(n.clone(), s.den.clone())?;
            Ok(Some(discretize_bilinear(&tf, fs, None)?.filter()))
        };
        Ok(Self {
            label: s.label.clone(),
            f: disc(&s.n_f)?,
            c_tau: disc(&s.n_tau)?,
            c_qdot: disc(&s.n_qdot)?,
            c_acc: disc(&s.n_acc)?,
        })
    }
}

fn run(f: &mut Option<ChainFilter>, x: f64) -> f64 {
    f.as_mut().map_or(0.0, |f| f.step(x))
}

impl DiscreteController for BlockController {
    fn step(&mut self, tau_d: f64, m: &Measurement) -> f64 {
        run(&mut self.f, tau_d) - run(&mut self.c_tau, m.tau_k) - run(&mut self.c_qdot, m.qdot)
            + run(&mut self.c_acc, m.theta_ddot)
    }

    fn label(&self) -> &str {
        &self.label
    }
}

/// Adaptive part of the MRAC.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MracRuntime {
    pub state: MracState,
    /// Hold `b_hat` at its current value.
    pub freeze_b: bool,
    /// Hold `c_hat` at its current value.
    pub freeze_c: bool,
    /// Last reference-model error.
    pub e: f64,
}

impl MracRuntime {
    pub fn new(state: MracState, freeze_b: bool, freeze_c: bool) -> Self {
        Self {
            state,
            freeze_b,
            freeze_c,
            e: 0.0,
        }
    }

    /// Experimental setting: both gains start at zero, `b_hat` frozen.
    pub fn experimental() -> Self {
        Self::new(
            MracState {
                b_hat: 0.0,
                c_hat: 0.0,
                rho: 0.999,
                sigma: 0.001,
            },
            true,
            false,
        )
    }
}

/// Signals entering the adaptation law at one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MracSignals {
    /// Measured torque.
    pub tau: f64,
    /// Filtered derivative of the measured torque.
    pub dtau: f64,
    /// Reference-model output and its derivative.
    pub tau_r: f64,
    pub dtau_r: f64,
}

/// Forward-Euler step of
/// `b^' = -rho (e tau~' + sigma b^)`, `c^' = -rho (e tau~ + sigma c^)` with
/// `e = (tau~' - tau_r')/w_d^2 + tau~ - tau_r`.
pub fn mrac_adapt_step(rt: &MracRuntime, sig: &MracSignals, omega_d: f64, dt: f64) -> MracRuntime {
    let e = (sig.dtau - sig.dtau_r) / (omega_d * omega_d) + sig.tau - sig.tau_r;
    let MracState {
        b_hat,
        c_hat,
        rho,
        sigma,
    } = rt.state;
    let mut next = *rt;
    next.e = e;
    if !rt.freeze_b {
        next.state.b_hat = b_hat - dt * rho * (e * sig.dtau + sigma * b_hat);
    }
    if !rt.freeze_c {
        next.state.c_hat = c_hat - dt * rho * (e * sig.tau + sigma * c_hat);
    }
    next
}

/// `tau_m = K_P (tau_d - tau~) - K_D tau~' + K_C H_r tau_d' + b^ tau~' + c^ tau~`
/// with time-varying `b^`, `c^`.
#[derive(Debug, Clone)]
pub struct MracController {
    gains: MracGains,
    runtime: MracRuntime,
    deriv: ChainFilter,
    hr: ChainFilter,
    shr: ChainFilter,
    dt: f64,
}

impl MracController {
    pub fn new(
        p: &SeaParams,
        t: &TuningTarget,
        runtime: MracRuntime,
        r: &Realization,
        fs: f64,
    ) -> Result<Self> {
        p.validate()?;
        t.validate()?;
        runtime.state.validate()?;
        let wc = r
            .derivative_cutoff
            .ok_or_else(|| invalid("realization", "a sampled MRAC needs a derivative filter"))?;
        let gains = mrac_gains(p, t);
        let hr = mrac_reference_model(&gains);
        let deriv = RationalTF::new(Polynomial::monomial(wc * wc, 1), butterworth2_den(wc))?;
        let shr = &hr * &RationalTF::s();
        Ok(Self {
            gains,
            runtime,
            deriv: discretize_bilinear(&deriv, fs, None)?.filter(),
            hr: discretize_bilinear(&hr, fs, None)?.filter(),
            shr: discretize_bilinear(&shr, fs, None)?.filter(),
            dt: 1.0 / fs,
        })
    }

    pub fn runtime(&self) -> &MracRuntime {
        &self.runtime
    }
}

impl DiscreteController for MracController {
    fn step(&mut self, tau_d: f64, m: &Measurement) -> f64 {
        let g = &self.gains;
        let tau = m.tau_k;
        let dtau = self.deriv.step(tau);
        let tau_r = self.hr.step(tau_d);
        let dtau_r = self.shr.step(tau_d);
        let st = &self.runtime.state;
        let u = g.k_p * (tau_d - tau) - g.k_d * dtau
            + g.k_c * dtau_r
            + st.b_hat * dtau
            + st.c_hat * tau;
        let sig = MracSignals {
            tau,
            dtau,
            tau_r,
            dtau_r,
        };
        self.runtime = mrac_adapt_step(&self.runtime, &sig, g.omega_d, self.dt);
        u
    }

    fn label(&self) -> &str {
        "mrac"
    }

    fn adaptive_state(&self) -> Option<MracState> {
        Some(self.runtime.state)
    }
}

/// Recipe for a fresh discrete controller.
#[derive(Debug, Clone)]
pub enum SimController {
    Block(FeedbackStructure),
    Mrac {
        params: SeaParams,
        target: TuningTarget,
        runtime: MracRuntime,
        realization: Realization,
    },
}

impl SimController {
    pub fn label(&self) -> &str {
        match self {
            SimController::Block(s) => &s.label,
            SimController::Mrac { .. } => "mrac",
        }
    }

    pub fn family(&self) -> Family {
        match self {
            SimController::Block(s) => s.family,
            SimController::Mrac { .. } => Family::Mrac,
        }
    }

    pub fn instantiate(&self, fs: f64) -> Result<Box<dyn DiscreteController>> {
        Ok(match self {
            SimController::Block(s) => Box::new(BlockController::new(s, fs)?),
            SimController::Mrac {
                params,
                target,
                runtime,
                realization,
            } => Box::new(MracController::new(params, target, *runtime, realization, fs)?),
        })
    }
}

/// Unilateral spring-damper stop acting on the load beyond `position`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Endstop {
    /// rad
    pub position: f64,
    /// N m/rad
    pub stiffness: f64,
    /// N m s/rad
    pub damping: f64,
}

impl Endstop {
    /// Contact torque on the load; never pulls.
    pub fn torque(&self, theta: f64, theta_dot: f64) -> f64 {
        let pen = theta - self.position;
        if pen <= 0.0 {
            return 0.0;
        }
        (-self.stiffness * pen - self.damping * theta_dot).min(0.0)
    }
}

/// Load position, velocity and acceleration as a function of time.
pub type Profile<'a> = &'a (dyn Fn(f64) -> [f64; 3] + Sync);

pub enum LoadSide<'a> {
    /// `theta == 0`.
    Locked,
    /// Imposed motion.
    Kinematic(Profile<'a>),
    /// Imposed motion until `release_position` is reached, then a free
    /// inertia `j_l` driven by the spring and the optional stop.
    Free {
        j_l: f64,
        approach: Profile<'a>,
        release_position: f64,
        endstop: Option<Endstop>,
    },
}

pub struct Exogenous<'a> {
    pub tau_d: &'a (dyn Fn(f64) -> f64 + Sync),
    pub load: LoadSide<'a>,
}

/// Samples at the record rate. `tau_k` and `qdot` are the measured values.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TimeSeries {
    pub t: Vec<f64>,
    pub tau_d: Vec<f64>,
    pub tau_k: Vec<f64>,
    pub qdot: Vec<f64>,
    pub theta: Vec<f64>,
    pub theta_dot: Vec<f64>,
    pub tau_m: Vec<f64>,
    /// Adaptive gains; empty for linear controllers.
    pub b_hat: Vec<f64>,
    pub c_hat: Vec<f64>,
}

impl TimeSeries {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    fn with_capacity(n: usize, adaptive: bool) -> Self {
        let v = || Vec::with_capacity(n);
        let a = || if adaptive { Vec::with_capacity(n) } else { Vec::new() };
        Self {
            t: v(),
            tau_d: v(),
            tau_k: v(),
            qdot: v(),
            theta: v(),
            theta_dot: v(),
            tau_m: v(),
            b_hat: a(),
            c_hat: a(),
        }
    }
}

struct Plant<'a> {
    p: SeaParams,
    friction: Option<Friction>,
    load: &'a LoadSide<'a>,
}

impl Plant<'_> {
    fn prescribed(&self, t: f64, released: bool) -> Option<[f64; 3]> {
        match self.load {
            LoadSide::Locked => Some([0.0; 3]),
            LoadSide::Kinematic(f) => Some(f(t)),
            LoadSide::Free { approach, .. } if !released => Some(approach(t)),
            LoadSide::Free { .. } => None,
        }
    }

    fn motor_acc(&self, u: f64, qd: f64, tau_k: f64) -> f64 {
        let net = u - self.p.b_m * qd - tau_k;
        let fr = match self.friction {
            None => 0.0,
            Some(f) if qd.abs() < KARNOPP_BAND => {
                if net.abs() <= f.stiction {
                    return 0.0;
                }
                f.coulomb * net.signum()
            }
            Some(f) => f.coulomb * qd.signum(),
        };
        (net - fr) / self.p.j_m
    }

    fn load_acc(&self, x: &[f64; 4]) -> f64 {
        match self.load {
            LoadSide::Free { j_l, endstop, .. } => {
                let tk = self.p.k * (x[0] - x[2]);
                (tk + endstop.map_or(0.0, |e| e.torque(x[2], x[3]))) / j_l
            }
            _ => 0.0,
        }
    }

    fn deriv(&self, t: f64, x: &[f64; 4], u: f64, released: bool) -> [f64; 4] {
        match self.prescribed(t, released) {
            Some([th, thd, thdd]) => {
                let tk = self.p.k * (x[0] - th);
                [x[1], self.motor_acc(u, x[1], tk), thd, thdd]
            }
            None => {
                let tk = self.p.k * (x[0] - x[2]);
                [x[1], self.motor_acc(u, x[1], tk), x[3], self.load_acc(x)]
            }
        }
    }

    fn rk4(&self, t: f64, x: &mut [f64; 4], u: f64, h: f64, released: bool) {
        let add = |a: &[f64; 4], k: &[f64; 4], s: f64| {
            [a[0] + s * k[0], a[1] + s * k[1], a[2] + s * k[2], a[3] + s * k[3]]
        };
        let k1 = self.deriv(t, x, u, released);
        let k2 = self.deriv(t + 0.5 * h, &add(x, &k1, 0.5 * h), u, released);
        let k3 = self.deriv(t + 0.5 * h, &add(x, &k2, 0.5 * h), u, released);
        let k4 = self.deriv(t + h, &add(x, &k3, h), u, released);
        for i in 0..4 {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if self.friction.is_some() && x[1].abs() < KARNOPP_BAND {
            let tk = self.p.k * (x[0] - x[2]);
            if (u - tk).abs() <= self.friction.map_or(0.0, |f| f.stiction) {
                x[1] = 0.0;
            }
        }
    }
}

/// Runs `ctrl` against the actuator for `cfg.duration` seconds.
///
/// The controller output is held over each control period and clipped to
/// `torque_limit`. Measurements are `tau_k - eta`, `qdot - eta`,
/// `theta_ddot + eta` with independent Gaussian `eta`.
pub fn step_sim(
    cfg: &SimConfig,
    p: &SeaParams,
    ctrl: &mut dyn DiscreteController,
    exo: &Exogenous,
) -> Result<TimeSeries> {
    cfg.validate()?;
    p.validate()?;
    if let LoadSide::Free { j_l, .. } = exo.load {
        if !(j_l > 0.0) {
            return Err(invalid("j_l", "load inertia must be positive"));
        }
    }
    let fs = cfg.control_rate;
    let dt = 1.0 / fs;
    let h = dt / cfg.plant_substeps as f64;
    let n_steps = (cfg.duration * fs).round() as usize;
    let dec = cfg.decimation();
    let adaptive = ctrl.adaptive_state().is_some();
    let mut out = TimeSeries::with_capacity(n_steps / dec + 1, adaptive);
    let plant = Plant {
        p: *p,
        friction: cfg.friction,
        load: &exo.load,
    };
    let release_at = match exo.load {
        LoadSide::Free {
            release_position, ..
        } => Some(release_position),
        _ => None,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let nm = cfg.noise;
    let mut x = [0.0; 4];
    let mut released = false;
    if let Some([th, thd, _]) = plant.prescribed(0.0, false) {
        x = [th, 0.0, th, thd];
    }
    let mut delay: VecDeque<Measurement> = VecDeque::with_capacity(cfg.measurement_delay + 1);
    let max_sat = (cfg.max_saturation_time * fs).ceil() as usize;
    let mut sat_run = 0usize;

    for n in 0..n_steps {
        let t = n as f64 * dt;
        let thdd = match plant.prescribed(t, released) {
            Some([th, thd, a]) => {
                x[2] = th;
                x[3] = thd;
                a
            }
            None => plant.load_acc(&x),
        };
        let tau_k = p.k * (x[0] - x[2]);
        let eta: [f64; 3] = [
            StandardNormal.sample(&mut rng),
            StandardNormal.sample(&mut rng),
            StandardNormal.sample(&mut rng),
        ];
        let m = Measurement {
            tau_k: tau_k - nm.sigma_tau * eta[0],
            qdot: x[1] - nm.sigma_qdot * eta[1],
            theta_ddot: thdd + nm.sigma_acc * eta[2],
        };
        delay.push_back(m);
        let seen = if delay.len() > cfg.measurement_delay {
            delay.pop_front().unwrap()
        } else {
            Measurement::default()
        };
        let tau_d = (exo.tau_d)(t);
        let raw = ctrl.step(tau_d, &seen);
        if !raw.is_finite() {
            return Err(Error::Divergence {
                time: t,
                detail: "non-finite controller output".into(),
            });
        }
        let u = raw.clamp(-cfg.torque_limit, cfg.torque_limit);
        if raw.abs() >= cfg.torque_limit {
            sat_run += 1;
            if sat_run > max_sat {
                return Err(Error::Divergence {
                    time: t,
                    detail: format!("motor torque saturated for over {} s", cfg.max_saturation_time),
                });
            }
        } else {
            sat_run = 0;
        }
        if n % dec == 0 {
            out.t.push(t);
            out.tau_d.push(tau_d);
            out.tau_k.push(m.tau_k);
            out.qdot.push(m.qdot);
            out.theta.push(x[2]);
            out.theta_dot.push(x[3]);
            out.tau_m.push(u);
            if let Some(st) = ctrl.adaptive_state() {
                out.b_hat.push(st.b_hat);
                out.c_hat.push(st.c_hat);
            }
        }
        for j in 0..cfg.plant_substeps {
            let ts = t + j as f64 * h;
            if let (Some(rel), false) = (release_at, released) {
                let [th, thd, _] = plant.prescribed(ts, false).unwrap();
                if th >= rel {
                    released = true;
                    x[2] = th;
                    x[3] = thd;
                }
            }
            plant.rk4(ts, &mut x, u, h, released);
        }
        let tk = p.k * (x[0] - x[2]);
        if !x.iter().all(|v| v.is_finite()) || tk.abs() > BLOWUP_TORQUE {
            return Err(Error::Divergence {
                time: t + dt,
                detail: "plant state diverged".into(),
            });
        }
    }
    Ok(out)
}

/// `Y(f0)/X(f0)` from the FFT bin at `f0`. The window must hold an integer
/// number of periods (bin within 0.5% of `f0`).
pub fn fft_ratio_identify(x: &[f64], y: &[f64], f0: f64, fs: f64) -> Result<Complex64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(invalid("series", "need equal lengths of at least 2"));
    }
    if !(f0 > 0.0 && fs > 0.0) {
        return Err(invalid("f0", "frequencies must be positive"));
    }
    let n = x.len();
    let k = (f0 * n as f64 / fs).round() as usize;
    let bin_hz = k as f64 * fs / n as f64;
    if k == 0 || 2 * k > n || (bin_hz - f0).abs() > 0.005 * f0 {
        return Err(Error::BinMismatch { f0, bin_hz });
    }
    let fft = FftPlanner::new().plan_fft_forward(n);
    let spectrum = |s: &[f64]| {
        let mut buf: Vec<Complex64> = s.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft.process(&mut buf);
        buf[k]
    };
    let xk = spectrum(x);
    let scale: f64 = x.iter().map(|v| v.abs()).sum();
    if !(xk.norm() > 1e-9 * scale) || scale == 0.0 {
        return Err(Error::NoExcitation { f0 });
    }
    Ok(spectrum(y) / xk)
}

/// One sine burst of a protocol schedule, in record samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Segment {
    /// Excited frequency after snapping to the record grid, Hz.
    pub freq_hz: f64,
    /// N m for torque excitation, rad/s for velocity excitation.
    pub amplitude: f64,
    pub start: usize,
    pub len: usize,
    /// Identification window `[len - window, len)` within the segment.
    pub window: usize,
}

/// Sine bursts separated by rests.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Schedule {
    pub record_rate: f64,
    pub segments: Vec<Segment>,
    /// Samples in total, trailing rest included.
    pub total: usize,
}

/// Rest between sine bursts, s.
pub const PAUSE_S: f64 = 0.1;

impl Schedule {
    /// `bursts`: nominal frequency, amplitude, repetitions and the number of
    /// trailing periods identified. Frequencies are snapped so that the
    /// identification window spans an integer number of samples.
    pub fn build(bursts: &[(f64, f64, usize, usize)], record_rate: f64) -> Result<Self> {
        if !(record_rate > 0.0) {
            return Err(invalid("record_rate", "must be positive"));
        }
        let pause = (PAUSE_S * record_rate).round() as usize;
        let mut pos = pause;
        let mut segments = Vec::with_capacity(bursts.len());
        for &(f, a, reps, win) in bursts {
            if !(f > 0.0) || reps == 0 || win == 0 || win > reps {
                return Err(invalid("schedule", "bad burst definition"));
            }
            let window = (win as f64 * record_rate / f).round() as usize;
            let freq_hz = win as f64 * record_rate / window as f64;
            let len = (reps as f64 * record_rate / freq_hz).round() as usize;
            segments.push(Segment {
                freq_hz,
                amplitude: a,
                start: pos,
                len,
                window,
            });
            pos += len + pause;
        }
        Ok(Self {
            record_rate,
            segments,
            total: pos,
        })
    }

    pub fn duration(&self) -> f64 {
        self.total as f64 / self.record_rate
    }

    fn segment_at(&self, t: f64) -> Option<(&Segment, f64)> {
        let i = t * self.record_rate;
        let idx = self
            .segments
            .partition_point(|s| (s.start as f64) <= i + 1e-9);
        let s = self.segments.get(idx.checked_sub(1)?)?;
        let local = t - s.start as f64 / self.record_rate;
        (local < s.len as f64 / self.record_rate - 1e-12).then_some((s, local))
    }

    /// `A sin(2 pi f (t - t_start))` inside bursts, zero in the rests.
    pub fn sine(&self, t: f64) -> f64 {
        self.segment_at(t).map_or(0.0, |(s, l)| {
            s.amplitude * (2.0 * PI * s.freq_hz * l).sin()
        })
    }

    /// Position, velocity and acceleration when the sine is a velocity.
    pub fn velocity_profile(&self, t: f64, offsets: &[f64]) -> [f64; 3] {
        let i = t * self.record_rate;
        let idx = self
            .segments
            .partition_point(|s| (s.start as f64) <= i + 1e-9);
        if idx == 0 {
            return [0.0; 3];
        }
        let s = &self.segments[idx - 1];
        let base = offsets[idx - 1];
        let w = 2.0 * PI * s.freq_hz;
        let local = (t - s.start as f64 / self.record_rate).min(s.len as f64 / self.record_rate);
        let inside = t - s.start as f64 / self.record_rate < s.len as f64 / self.record_rate - 1e-12;
        let pos = base + s.amplitude / w * (1.0 - (w * local).cos());
        if inside {
            [pos, s.amplitude * (w * local).sin(), s.amplitude * w * (w * local).cos()]
        } else {
            [pos, 0.0, 0.0]
        }
    }

    /// Load position at the start of each burst for [`Self::velocity_profile`].
    pub fn position_offsets(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.segments
            .iter()
            .map(|s| {
                let start = acc;
                let w = 2.0 * PI * s.freq_hz;
                acc += s.amplitude / w * (1.0 - (w * s.len as f64 / self.record_rate).cos());
                start
            })
            .collect()
    }
}

pub const TRACKING_POINTS: usize = 47;

/// Amplitude of the torque sine at `f` Hz.
pub fn tracking_amplitude(f: f64, condition_hz: f64, family: Family) -> f64 {
    if condition_hz >= 40.0 && f >= 16.0 {
        return if family == Family::Mrac { 1.0 } else { 2.5 };
    }
    if f <= 1.0 {
        20.0
    } else if f <= 10.0 {
        10.0
    } else {
        5.0
    }
}

/// 47 log-spaced frequencies from 0.05 to 80 Hz, 15 periods each,
/// identified over the whole burst.
pub fn tracking_schedule(condition_hz: f64, family: Family, record_rate: f64) -> Result<Schedule> {
    let (lo, hi) = (0.05f64, 80.0f64);
    let bursts: Vec<_> = (0..TRACKING_POINTS)
        .map(|i| {
            let f = lo * (hi / lo).powf(i as f64 / (TRACKING_POINTS - 1) as f64);
            (f, tracking_amplitude(f, condition_hz, family), 15, 15)
        })
        .collect();
    Schedule::build(&bursts, record_rate)
}

/// Excited frequencies of the impedance protocol, Hz.
pub fn impedance_frequencies() -> Vec<f64> {
    let mut f = vec![0.1, 0.15, 0.2];
    f.extend((3..=10).map(|i| i as f64 / 10.0));
    f.extend([1.5, 2.0]);
    f.extend((3..=10).map(|i| i as f64));
    f
}

/// Velocity amplitude at `f` Hz, rad/s.
pub fn impedance_amplitude(f: f64) -> f64 {
    match f {
        f if f <= 0.15 => 0.5,
        f if f <= 0.3 => 1.0,
        f if f <= 0.6 => 1.5,
        f if f <= 1.0 => 2.0,
        f if f <= 2.0 => 2.5,
        _ => 3.0,
    }
}

/// 15 periods or at least 5 s, identified over the last 10 periods.
pub fn impedance_schedule(record_rate: f64) -> Result<Schedule> {
    let bursts: Vec<_> = impedance_frequencies()
        .into_iter()
        .map(|f| {
            let reps = 15usize.max((5.0 * f).ceil() as usize);
            (f, impedance_amplitude(f), reps, 10)
        })
        .collect();
    Schedule::build(&bursts, record_rate)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentifiedPoint {
    pub freq_hz: f64,
    pub amplitude: f64,
    pub re: f64,
    pub im: f64,
    pub mag_db: f64,
    pub phase_deg: f64,
    /// Share of window samples with a clipped motor torque.
    pub saturated_fraction: f64,
}

impl IdentifiedPoint {
    fn new(seg: &Segment, z: Complex64, saturated_fraction: f64) -> Self {
        Self {
            freq_hz: seg.freq_hz,
            amplitude: seg.amplitude,
            re: z.re,
            im: z.im,
            mag_db: 20.0 * z.norm().log10(),
            phase_deg: z.arg().to_degrees(),
            saturated_fraction,
        }
    }

    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }

    /// More than 1% of the window spent in saturation.
    pub fn saturated(&self) -> bool {
        self.saturated_fraction > 0.01
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ImpactSummary {
    /// Peak load speed before contact, rad/s.
    pub approach_speed: f64,
    /// Peak load speed away from the stop after contact, rad/s.
    pub rebound_speed: Option<f64>,
    pub ratio: Option<f64>,
    pub contact_time: Option<f64>,
    /// Peak measured spring torque after release, N m.
    pub peak_torque: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMetadata {
    pub protocol: String,
    pub label: String,
    pub family: Family,
    pub tuning: Option<TuningTarget>,
    pub seed: u64,
    pub control_rate: f64,
    pub record_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolResult {
    pub meta: RunMetadata,
    pub series: TimeSeries,
    pub points: Vec<IdentifiedPoint>,
    pub impact: Option<ImpactSummary>,
}

fn metadata(
    protocol: &str,
    ctrl: &SimController,
    tuning: Option<TuningTarget>,
    cfg: &SimConfig,
) -> RunMetadata {
    RunMetadata {
        protocol: protocol.into(),
        label: ctrl.label().into(),
        family: ctrl.family(),
        tuning,
        seed: cfg.seed,
        control_rate: cfg.control_rate,
        record_rate: cfg.record_rate,
    }
}

fn identify_segments(
    sched: &Schedule,
    series: &TimeSeries,
    input: &[f64],
    limit: f64,
) -> Result<Vec<IdentifiedPoint>> {
    sched
        .segments
        .iter()
        .map(|s| {
            let a = s.start + s.len - s.window;
            let b = s.start + s.len;
            let z = fft_ratio_identify(&input[a..b], &series.tau_k[a..b], s.freq_hz, sched.record_rate)?;
            let sat = series.tau_m[a..b].iter().filter(|u| u.abs() >= limit).count();
            Ok(IdentifiedPoint::new(s, z, sat as f64 / s.window as f64))
        })
        .collect()
}

fn schedule_config(cfg: &SimConfig, sched: &Schedule) -> Result<SimConfig> {
    if (sched.record_rate - cfg.record_rate).abs() > 1e-9 * cfg.record_rate {
        return Err(invalid("schedule", "record rate differs from the simulation"));
    }
    Ok(SimConfig {
        duration: sched.duration(),
        ..cfg.clone()
    })
}

/// Locked output, torque sine bursts; identifies `H_c = tau_k / tau_d`.
pub fn protocol_tracking_id(
    p: &SeaParams,
    ctrl: &SimController,
    tuning: Option<TuningTarget>,
    cfg: &SimConfig,
    sched: &Schedule,
) -> Result<ProtocolResult> {
    let run_cfg = schedule_config(cfg, sched)?;
    let mut c = ctrl.instantiate(cfg.control_rate)?;
    let tau_d = |t: f64| sched.sine(t);
    let exo = Exogenous {
        tau_d: &tau_d,
        load: LoadSide::Locked,
    };
    let mut series = step_sim(&run_cfg, p, c.as_mut(), &exo)?;
    let points = identify_segments(sched, &series, &series.tau_d, cfg.torque_limit)?;
    if !cfg.keep_series {
        series = TimeSeries::default();
    }
    Ok(ProtocolResult {
        meta: metadata("tracking", ctrl, tuning, cfg),
        series,
        points,
        impact: None,
    })
}

/// Zero torque command, imposed load velocity sine bursts; identifies the
/// apparent impedance `Z_c = tau_k / (-theta_dot)`.
pub fn protocol_impedance_id(
    p: &SeaParams,
    ctrl: &SimController,
    tuning: Option<TuningTarget>,
    cfg: &SimConfig,
    sched: &Schedule,
) -> Result<ProtocolResult> {
    let run_cfg = schedule_config(cfg, sched)?;
    let mut c = ctrl.instantiate(cfg.control_rate)?;
    let offsets = sched.position_offsets();
    let profile = |t: f64| sched.velocity_profile(t, &offsets);
    let zero = |_: f64| 0.0;
    let exo = Exogenous {
        tau_d: &zero,
        load: LoadSide::Kinematic(&profile),
    };
    let mut series = step_sim(&run_cfg, p, c.as_mut(), &exo)?;
    let neg_v: Vec<f64> = series.theta_dot.iter().map(|v| -v).collect();
    let points = identify_segments(sched, &series, &neg_v, cfg.torque_limit)?;
    if !cfg.keep_series {
        series = TimeSeries::default();
    }
    Ok(ProtocolResult {
        meta: metadata("impedance", ctrl, tuning, cfg),
        series,
        points,
        impact: None,
    })
}

/// Free-load impact scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImpactConfig {
    /// Load inertia as a multiple of `j_m`.
    pub load_inertia_ratio: f64,
    /// rad/s
    pub approach_speed: f64,
    /// Distance before the stop at which the load is released, rad.
    pub release_gap: f64,
    /// Smooth speed-up time, s.
    pub ramp_time: f64,
    /// Imposed-motion time before release, ramp included, s.
    pub approach_time: f64,
    /// Simulated time after release, s.
    pub post_time: f64,
    /// N m/rad
    pub stiffness: f64,
    /// N m s/rad
    pub damping: f64,
    /// Omit the stop altogether.
    pub no_endstop: bool,
}

impl Default for ImpactConfig {
    fn default() -> Self {
        Self {
            load_inertia_ratio: 0.1,
            approach_speed: 4.0,
            release_gap: 0.04,
            ramp_time: 0.2,
            approach_time: 1.0,
            post_time: 1.0,
            stiffness: 5e4,
            damping: 50.0,
            no_endstop: false,
        }
    }
}

impl ImpactConfig {
    pub fn validate(&self) -> Result<()> {
        for (n, v) in [
            ("load_inertia_ratio", self.load_inertia_ratio),
            ("approach_speed", self.approach_speed),
            ("release_gap", self.release_gap),
            ("ramp_time", self.ramp_time),
            ("post_time", self.post_time),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(n, "must be positive"));
            }
        }
        if !(self.approach_time > self.ramp_time) {
            return Err(invalid("approach_time", "must exceed ramp_time"));
        }
        if !(self.stiffness >= 0.0 && self.damping >= 0.0) {
            return Err(invalid("endstop", "stiffness and damping must be nonnegative"));
        }
        Ok(())
    }

    /// Speed-up profile starting at rest from `theta = 0`.
    pub fn approach(&self, t: f64) -> [f64; 3] {
        let (v, tr) = (self.approach_speed, self.ramp_time);
        if t < tr {
            let w = PI / tr;
            [
                0.5 * v * (t - (w * t).sin() / w),
                0.5 * v * (1.0 - (w * t).cos()),
                0.5 * v * w * (w * t).sin(),
            ]
        } else {
            [0.5 * v * tr + v * (t - tr), v, 0.0]
        }
    }

    pub fn release_position(&self) -> f64 {
        self.approach(self.approach_time)[0]
    }

    pub fn endstop(&self) -> Option<Endstop> {
        (!self.no_endstop).then_some(Endstop {
            position: self.release_position() + self.release_gap,
            stiffness: self.stiffness,
            damping: self.damping,
        })
    }
}

/// Imposed approach to `approach_speed`, release `release_gap` before the
/// stop with zero torque command, then free rebound.
pub fn protocol_impact(
    p: &SeaParams,
    ctrl: &SimController,
    tuning: Option<TuningTarget>,
    cfg: &SimConfig,
    ic: &ImpactConfig,
) -> Result<ProtocolResult> {
    ic.validate()?;
    let run_cfg = SimConfig {
        duration: ic.approach_time + ic.post_time,
        ..cfg.clone()
    };
    let mut c = ctrl.instantiate(cfg.control_rate)?;
    let approach = |t: f64| ic.approach(t);
    let zero = |_: f64| 0.0;
    let endstop = ic.endstop();
    let exo = Exogenous {
        tau_d: &zero,
        load: LoadSide::Free {
            j_l: ic.load_inertia_ratio * p.j_m,
            approach: &approach,
            release_position: ic.release_position(),
            endstop,
        },
    };
    let mut series = step_sim(&run_cfg, p, c.as_mut(), &exo)?;
    let contact = endstop.and_then(|e| series.theta.iter().position(|&th| th > e.position));
    let before = contact.unwrap_or(series.len());
    let approach_speed = series.theta_dot[..before]
        .iter()
        .fold(0.0f64, |m, &v| m.max(v));
    let rebound_speed = contact.map(|i| {
        series.theta_dot[i..]
            .iter()
            .fold(0.0f64, |m, &v| m.max(-v))
    });
    let released = series
        .t
        .iter()
        .position(|&t| t >= ic.approach_time)
        .unwrap_or(series.len());
    let peak_torque = series.tau_k[released..]
        .iter()
        .fold(0.0f64, |m, &v| m.max(v.abs()));
    let impact = ImpactSummary {
        approach_speed,
        rebound_speed,
        ratio: rebound_speed.map(|r| r / approach_speed),
        contact_time: contact.map(|i| series.t[i]),
        peak_torque,
    };
    if !cfg.keep_series {
        series = TimeSeries::default();
    }
    Ok(ProtocolResult {
        meta: metadata("impact", ctrl, tuning, cfg),
        series,
        points: Vec::new(),
        impact: Some(impact),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controllers::{assemble_closed_loop, synth_fsft, synth_pd};

    fn quiet(rate: f64, substeps: usize) -> SimConfig {
        SimConfig {
            control_rate: rate,
            plant_substeps: substeps,
            record_rate: 1000.0,
            noise: NoiseModel::off(),
            ..SimConfig::default()
        }
    }

    fn pd30() -> FeedbackStructure {
        let t = TuningTarget::from_hz(30.0, 1.0).unwrap();
        synth_pd(&SeaParams::nominal(), &t, &Realization::filtered()).unwrap()
    }

    #[test]
    fn leaky_integrator_matches_tustin_image() {
        let (a, fs) = (0.999, 1000.0);
        let eps = crate::controllers::leak_epsilon(a, fs);
        let tf = RationalTF::from_coeffs(&[1.0], &[eps, 1.0]).unwrap();
        let mut f = discretize_bilinear(&tf, fs, None).unwrap().filter();
        let mut li = LeakyIntegratorState::new(a, 1.0 / fs).unwrap();
        for n in 0..500 {
            let x = (n as f64 * 0.05).sin() + 0.3;
            assert!((li.step(x) - f.step(x)).abs() < 1e-12);
        }
        let mut prev = li.step(0.0);
        for _ in 0..20 {
            let y = li.step(0.0);
            assert!((y - a * prev).abs() < 1e-15);
            prev = y;
        }
    }

    #[test]
    fn zero_input_stays_at_rest() {
        let p = SeaParams::nominal();
        let mut c = BlockController::new(&pd30(), 1000.0).unwrap();
        let zero = |_: f64| 0.0;
        let exo = Exogenous {
            tau_d: &zero,
            load: LoadSide::Locked,
        };
        let cfg = SimConfig {
            duration: 0.5,
            ..quiet(1000.0, 10)
        };
        let s = step_sim(&cfg, &p, &mut c, &exo).unwrap();
        assert_eq!(s.len(), 500);
        for v in [&s.tau_k, &s.qdot, &s.theta, &s.theta_dot, &s.tau_m] {
            assert!(v.iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn constant_command_reaches_unity_dc_gain() {
        let p = SeaParams::nominal();
        let mut c = BlockController::new(&pd30(), 1000.0).unwrap();
        let ten = |_: f64| 10.0;
        let exo = Exogenous {
            tau_d: &ten,
            load: LoadSide::Locked,
        };
        let cfg = SimConfig {
            duration: 2.0,
            ..quiet(1000.0, 10)
        };
        let s = step_sim(&cfg, &p, &mut c, &exo).unwrap();
        let last = *s.tau_k.last().unwrap();
        assert!((last - 10.0).abs() < 0.01, "{last}");
    }

    #[test]
    fn fsft_sine_matches_analytic_response() {
        let p = SeaParams::nominal();
        let t = TuningTarget::from_hz(30.0, 0.7).unwrap();
        let s = synth_fsft(&p, &t, &Realization::filtered()).unwrap();
        let want = assemble_closed_loop(&p, &s).unwrap().h_c.eval(2.0 * PI);
        let mut c = BlockController::new(&s, 1000.0).unwrap();
        let sine = |t: f64| 20.0 * (2.0 * PI * t).sin();
        let exo = Exogenous {
            tau_d: &sine,
            load: LoadSide::Locked,
        };
        let cfg = SimConfig {
            duration: 5.0,
            ..quiet(1000.0, 10)
        };
        let r = step_sim(&cfg, &p, &mut c, &exo).unwrap();
        let got = fft_ratio_identify(&r.tau_d[2000..], &r.tau_k[2000..], 1.0, 1000.0).unwrap();
        let db = 20.0 * (got.norm() / want.norm()).log10();
        let deg = (got / want).arg().to_degrees();
        assert!(db.abs() < 0.2 && deg.abs() < 2.0, "{db} dB {deg} deg");
    }

    #[test]
    fn identify_quarter_period_delay() {
        let fs = 1000.0;
        let x: Vec<f64> = (0..2000).map(|n| (2.0 * PI * 5.0 * n as f64 / fs).sin()).collect();
        let y: Vec<f64> = (0..2000)
            .map(|n| 2.0 * (2.0 * PI * 5.0 * (n as f64 / fs - 0.05)).sin())
            .collect();
        let z = fft_ratio_identify(&x, &y, 5.0, fs).unwrap();
        assert!((z.norm() - 2.0).abs() < 1e-9);
        assert!((z.arg().to_degrees() + 90.0).abs() < 1e-6);
        assert!(matches!(
            fft_ratio_identify(&x[..1100], &y[..1100], 5.0, fs),
            Err(Error::BinMismatch { .. })
        ));
        let zeros = vec![0.0; 2000];
        assert!(matches!(
            fft_ratio_identify(&zeros, &y, 5.0, fs),
            Err(Error::NoExcitation { .. })
        ));
    }

    #[test]
    fn schedules() {
        let s = tracking_schedule(30.0, Family::Pd, 1000.0).unwrap();
        assert_eq!(s.segments.len(), 47);
        assert!((s.segments[0].freq_hz - 0.05).abs() < 1e-12);
        for seg in &s.segments {
            let periods = seg.window as f64 * seg.freq_hz / 1000.0;
            assert!((periods - 15.0).abs() < 1e-9);
        }
        let last = s.segments.last().unwrap();
        assert!((last.freq_hz - 80.0).abs() / 80.0 < 0.005);
        assert_eq!(last.amplitude, 5.0);
        let hi = tracking_schedule(40.0, Family::Mrac, 1000.0).unwrap();
        assert_eq!(hi.segments.last().unwrap().amplitude, 1.0);
        let z = impedance_schedule(1000.0).unwrap();
        assert_eq!(z.segments.len(), 21);
        let first = z.segments[0];
        assert_eq!(first.amplitude, 0.5);
        assert_eq!(first.window, 100_000);
        assert_eq!(first.len, 150_000);
        let ten = z.segments[20];
        assert_eq!((ten.freq_hz, ten.amplitude, ten.len), (10.0, 3.0, 5000));
        assert_eq!(z.segments[10].amplitude, 2.0);
    }

    #[test]
    fn velocity_profile_is_continuous() {
        let z = Schedule::build(&[(1.0, 2.0, 3, 2), (2.0, 1.0, 4, 2)], 1000.0).unwrap();
        let off = z.position_offsets();
        let mut prev = z.velocity_profile(0.0, &off);
        for n in 1..z.total {
            let cur = z.velocity_profile(n as f64 / 1000.0, &off);
            assert!((cur[0] - prev[0]).abs() < 0.02);
            prev = cur;
        }
        assert!(prev[0].abs() < 1e-9);
    }

    #[test]
    fn mrac_adaptation_trivial_cases() {
        let sig = MracSignals {
            tau: 3.0,
            dtau: 1.0,
            tau_r: 2.0,
            dtau_r: 0.5,
        };
        let frozen = MracRuntime::new(
            MracState {
                b_hat: 0.2,
                c_hat: 0.7,
                rho: 0.0,
                sigma: 0.001,
            },
            false,
            false,
        );
        let next = mrac_adapt_step(&frozen, &sig, 100.0, 1e-3);
        assert_eq!(next.state, frozen.state);
        let rest = MracSignals {
            tau: 0.0,
            dtau: 0.0,
            tau_r: 0.0,
            dtau_r: 0.0,
        };
        let mut rt = MracRuntime::new(
            MracState {
                b_hat: 0.5,
                c_hat: 1.0,
                rho: 0.999,
                sigma: 0.001,
            },
            false,
            false,
        );
        let dt = 1e-3;
        let factor = 1.0 - dt * 0.999 * 0.001;
        for _ in 0..1000 {
            let before = rt.state;
            rt = mrac_adapt_step(&rt, &rest, 100.0, dt);
            assert!((rt.state.c_hat - factor * before.c_hat).abs() < 1e-15);
            assert!((rt.state.b_hat - factor * before.b_hat).abs() < 1e-15);
        }
        let e_rt = mrac_adapt_step(&MracRuntime::experimental(), &sig, 100.0, dt);
        assert_eq!(e_rt.state.b_hat, 0.0);
        assert!((e_rt.e - (0.5 / 1e4 + 1.0)).abs() < 1e-15);
        assert!(e_rt.state.c_hat < 0.0);
    }

    #[test]
    fn determinism_with_noise() {
        let p = SeaParams::nominal();
        let sine = |t: f64| 5.0 * (2.0 * PI * 3.0 * t).sin();
        let run = |seed| {
            let mut c = BlockController::new(&pd30(), 1000.0).unwrap();
            let exo = Exogenous {
                tau_d: &sine,
                load: LoadSide::Locked,
            };
            let cfg = SimConfig {
                seed,
                duration: 0.3,
                ..SimConfig::default()
            };
            step_sim(&cfg, &p, &mut c, &exo).unwrap()
        };
        assert_eq!(run(7), run(7));
        assert_ne!(run(7), run(8));
    }

    #[test]
    fn free_load_without_stop_never_speeds_up() {
        let p = SeaParams::nominal();
        let t = TuningTarget::from_hz(30.0, 0.7).unwrap();
        let s = synth_fsft(&p, &t, &Realization::filtered()).unwrap();
        let ic = ImpactConfig {
            no_endstop: true,
            ..ImpactConfig::default()
        };
        let r = protocol_impact(&p, &SimController::Block(s), Some(t), &quiet(1000.0, 10), &ic)
            .unwrap();
        let imp = r.impact.unwrap();
        assert!(imp.ratio.is_none());
        assert!(imp.approach_speed <= 4.0 + 1e-9);
        assert!(r.series.theta_dot.iter().all(|&v| v <= 4.0 + 1e-9));
    }

    #[test]
    fn fsft_impact_rebounds_slower() {
        let p = SeaParams::nominal();
        let t = TuningTarget::from_hz(30.0, 0.7).unwrap();
        let s = synth_fsft(&p, &t, &Realization::filtered()).unwrap();
        let r = protocol_impact(
            &p,
            &SimController::Block(s),
            Some(t),
            &quiet(1000.0, 10),
            &ImpactConfig::default(),
        )
        .unwrap();
        let imp = r.impact.unwrap();
        assert!(imp.contact_time.is_some());
        assert!(imp.ratio.unwrap() < 1.0, "{imp:?}");
    }

    #[test]
    fn unstable_loop_is_reported() {
        let p = SeaParams::nominal();
        let mut s = pd30();
        s.n_tau = s.n_tau.scale(-5.0);
        let mut c = BlockController::new(&s, 1000.0).unwrap();
        let one = |_: f64| 1.0;
        let exo = Exogenous {
            tau_d: &one,
            load: LoadSide::Locked,
        };
        let cfg = SimConfig {
            duration: 5.0,
            ..quiet(1000.0, 10)
        };
        assert!(matches!(
            step_sim(&cfg, &p, &mut c, &exo),
            Err(Error::Divergence { .. })
        ));
    }

    #[test]
    fn measurement_delay_shifts_response() {
        let p = SeaParams::nominal();
        let ten = |_: f64| 10.0;
        let run = |d| {
            let mut c = BlockController::new(&pd30(), 1000.0).unwrap();
            let exo = Exogenous {
                tau_d: &ten,
                load: LoadSide::Locked,
            };
            let cfg = SimConfig {
                duration: 0.05,
                measurement_delay: d,
                ..quiet(1000.0, 10)
            };
            step_sim(&cfg, &p, &mut c, &exo).unwrap()
        };
        assert_ne!(run(0).tau_k, run(2).tau_k);
    }

    #[test]
    fn friction_holds_motor_below_breakaway() {
        let p = SeaParams::nominal();
        let s = pd30();
        let mut c = BlockController::new(&s, 1000.0).unwrap();
        let small = |_: f64| 0.01;
        let exo = Exogenous {
            tau_d: &small,
            load: LoadSide::Locked,
        };
        let cfg = SimConfig {
            duration: 0.2,
            friction: Some(Friction {
                coulomb: 0.5,
                stiction: 1.0,
            }),
            ..quiet(1000.0, 10)
        };
        let r = step_sim(&cfg, &p, &mut c, &exo).unwrap();
        assert!(r.qdot.iter().all(|&v| v == 0.0));
    }
}

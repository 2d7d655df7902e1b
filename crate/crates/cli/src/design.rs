//! Resolution of configured controllers into structures, and the design
//! report.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::Serialize;

use sea_core::analysis::{find_bandwidth, resonance_peak};
use sea_core::controllers::{
    assemble_closed_loop, synth_mrac, synthesize, ClosedLoop, ConstraintStatus, Family,
    FeedbackStructure, Realization, TuningTarget,
};
use sea_core::passivity::{is_positive_real, PassivityReport, DEFAULT_TOL};
use sea_core::plant::SeaParams;
use sea_core::shaping::{
    accfb_structure, alpha_max_dob_analytic, alpha_max_numeric, dob_structure, wrap_accfb,
    wrap_dob, AccFbConfig, DobConfig,
};
use sea_core::sim::{MracRuntime, SimController};

use crate::config::{AlphaSpec, RealizationKind, RunConfig, RunSpec, SimSection};
use crate::error::CliError;

/// Gain actually used by a shaping add-on next to its passivity bounds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShapingBound {
    pub omega_q_hz: Option<f64>,
    pub alpha: f64,
    /// Largest passive gain of the ideal inner loop, by bisection.
    pub bound_numeric: Option<f64>,
    /// Closed-form bound, where one exists for the family.
    pub bound_analytic: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone)]
pub struct Designed {
    pub spec: RunSpec,
    pub target: Option<TuningTarget>,
    pub af: Option<(AccFbConfig, ShapingBound)>,
    pub dob: Option<(DobConfig, ShapingBound)>,
}

fn inner(p: &SeaParams, spec: &RunSpec, t: Option<&TuningTarget>, r: &Realization) -> Result<FeedbackStructure, CliError> {
    // cascaded PID ignores the target
    let dummy = TuningTarget::from_hz(1.0, 1.0)?;
    let t = t.unwrap_or(&dummy);
    let s = if spec.family == Family::Mrac {
        synth_mrac(p, t, &spec.mrac.state(), r)?.0
    } else {
        synthesize(spec.family, p, t, &spec.pid, &spec.mrac.state(), r)?
    };
    Ok(s)
}

fn pick(alpha: AlphaSpec, bound: &Result<f64, sea_core::Error>) -> Result<f64, CliError> {
    match alpha {
        AlphaSpec::Value(v) => Ok(v),
        AlphaSpec::Keyword(_) => bound.clone().map_err(CliError::from),
    }
}

impl Designed {
    pub fn resolve(p: &SeaParams, spec: &RunSpec) -> Result<Self, CliError> {
        let target = spec
            .bw_hz
            .filter(|_| spec.family != Family::CascadedPid)
            .map(|bw| TuningTarget::from_hz(bw, spec.zeta_d))
            .transpose()?;
        let ideal = Realization::ideal();
        let base = inner(p, spec, target.as_ref(), &ideal)?;
        let delta = base.info.delta_zeta;

        let mut shaped = base.clone();
        let af = match spec.af {
            None => None,
            Some(e) => {
                let w = e.omega_q_hz.map(|f| 2.0 * PI * f);
                let cfg = |a| AccFbConfig { omega_q: w, alpha: a };
                let bound = alpha_max_numeric(|a| Ok(wrap_accfb(&base, p, &cfg(a))?.z_c));
                let alpha = pick(e.alpha, &bound)?;
                let analytic = match (w, spec.family) {
                    (None, Family::Pd | Family::Fsft) => delta,
                    _ => None,
                };
                let c = cfg(alpha);
                shaped = accfb_structure(&shaped, p, &c)?;
                Some((
                    c,
                    ShapingBound {
                        omega_q_hz: e.omega_q_hz,
                        alpha,
                        bound_numeric: bound.as_ref().ok().copied(),
                        bound_analytic: analytic,
                        note: bound.err().map(|e| e.to_string()),
                    },
                ))
            }
        };
        let dob = match spec.dob {
            None => None,
            Some(e) => {
                let w = 2.0 * PI * e.omega_q_hz;
                let cfg = |a| DobConfig { omega_q: w, alpha: a };
                let icl = assemble_closed_loop(p, &shaped)?;
                let bound = alpha_max_numeric(|a| Ok(wrap_dob(&icl, &cfg(a))?.z_c));
                let alpha = pick(e.alpha, &bound)?;
                let analytic = match (spec.af, spec.family, delta, base.info.omega_d) {
                    (None, Family::Pd | Family::Fsft, Some(d), Some(wd)) => {
                        alpha_max_dob_analytic(d, spec.zeta_d, wd, w).ok()
                    }
                    _ => None,
                };
                Some((
                    cfg(alpha),
                    ShapingBound {
                        omega_q_hz: Some(e.omega_q_hz),
                        alpha,
                        bound_numeric: bound.as_ref().ok().copied(),
                        bound_analytic: analytic,
                        note: bound.err().map(|e| e.to_string()),
                    },
                ))
            }
        };
        Ok(Self {
            spec: spec.clone(),
            target,
            af,
            dob,
        })
    }

    pub fn label(&self) -> &str {
        &self.spec.label
    }

    /// Inner controller with acceleration feedback, then the DOB, all in
    /// realization `r`.
    pub fn structure(&self, p: &SeaParams, r: &Realization) -> Result<FeedbackStructure, CliError> {
        let mut s = inner(p, &self.spec, self.target.as_ref(), r)?;
        if let Some((c, _)) = &self.af {
            s = accfb_structure(&s, p, c)?;
        }
        if let Some((c, _)) = &self.dob {
            s = dob_structure(&s, p, c)?;
        }
        s.label = self.spec.label.clone();
        Ok(s)
    }

    pub fn closed_loop(&self, p: &SeaParams, r: &Realization) -> Result<ClosedLoop, CliError> {
        Ok(assemble_closed_loop(p, &self.structure(p, r)?)?)
    }

    pub fn sim_controller(&self, p: &SeaParams, sim: &SimSection) -> Result<SimController, CliError> {
        let r = sim.realization();
        let m = &self.spec.mrac;
        if self.spec.family == Family::Mrac && m.adaptive {
            return Ok(SimController::Mrac {
                params: *p,
                target: self.target.expect("mrac has a target"),
                runtime: MracRuntime::new(m.state(), m.freeze_b, m.freeze_c),
                realization: r,
            });
        }
        Ok(SimController::Block(self.structure(p, &r)?))
    }

    /// Tracking condition used for the amplitude schedule.
    pub fn condition_hz(&self) -> f64 {
        self.spec.bw_hz.unwrap_or(30.0)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ControllerReport {
    pub label: String,
    pub family: Family,
    pub bw_hz: Option<f64>,
    pub zeta_d: Option<f64>,
    /// rad/s
    pub omega_bw: Option<f64>,
    /// rad/s
    pub omega_d: Option<f64>,
    pub delta_zeta: Option<f64>,
    pub gains: BTreeMap<String, f64>,
    pub constraints: Option<ConstraintStatus>,
    pub warnings: Vec<String>,
    pub dc_gain: f64,
    pub bandwidth_hz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bandwidth_note: Option<String>,
    pub resonance_db: f64,
    pub resonance_hz: f64,
    /// |Z_c| at 0.1 Hz, N m s/rad
    pub impedance_0p1hz: f64,
    pub af: Option<ShapingBound>,
    pub dob: Option<ShapingBound>,
    pub passivity: PassivityReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct DesignReport<'a> {
    pub config: &'a RunConfig,
    pub realization: RealizationKind,
    pub controllers: Vec<ControllerReport>,
}

pub fn report(cfg: &RunConfig, d: &Designed) -> Result<ControllerReport, CliError> {
    let p = &cfg.plant;
    let s = d.structure(p, &cfg.analysis.realization.realization())?;
    let cl = assemble_closed_loop(p, &s)?;
    let (bandwidth_hz, bandwidth_note) = match find_bandwidth(&cl.h_c) {
        Ok(w) => (Some(w / (2.0 * PI)), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let res = resonance_peak(&cl.h_c);
    let tuned = d.target.is_some();
    Ok(ControllerReport {
        label: d.spec.label.clone(),
        family: d.spec.family,
        bw_hz: d.spec.bw_hz.filter(|_| tuned),
        zeta_d: tuned.then_some(d.spec.zeta_d),
        omega_bw: d.target.map(|t| t.omega_bw),
        omega_d: s.info.omega_d,
        delta_zeta: s.info.delta_zeta,
        gains: s.info.gains.clone(),
        constraints: s.info.constraints.clone(),
        warnings: s.info.warnings.clone(),
        dc_gain: cl.h_c.dc_gain(),
        bandwidth_hz,
        bandwidth_note,
        resonance_db: res.peak_db,
        resonance_hz: res.omega / (2.0 * PI),
        impedance_0p1hz: cl.z_c.eval(2.0 * PI * 0.1).norm(),
        af: d.af.as_ref().map(|(_, b)| b.clone()),
        dob: d.dob.as_ref().map(|(_, b)| b.clone()),
        passivity: is_positive_real(&cl.z_c, DEFAULT_TOL)?,
    })
}

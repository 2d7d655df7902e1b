use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use rayon::prelude::*;

use sea_core::analysis::{bode, noise_asd, FrequencyGrid};
use sea_core::controllers::ClosedLoop;
use sea_core::passivity::{is_positive_real, DEFAULT_TOL};
use sea_core::sim::{
    impedance_schedule, protocol_impact, protocol_impedance_id, protocol_tracking_id,
    tracking_schedule, IdentifiedPoint, ProtocolResult, TimeSeries,
};

use crate::config::RunConfig;
use crate::design::{report, ControllerReport, DesignReport, Designed};
use crate::error::CliError;
use crate::output::{atomic_write, file_stem, Cell, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Protocol {
    Tracking,
    Impedance,
    Impact,
}

impl Protocol {
    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::Tracking => "tracking",
            Protocol::Impedance => "impedance",
            Protocol::Impact => "impact",
        }
    }
}

pub struct Context {
    pub cfg: RunConfig,
    pub out: PathBuf,
}

impl Context {
    fn designed(&self) -> Result<Vec<Designed>, CliError> {
        let runs = self.cfg.runs()?;
        runs.par_iter()
            .map(|r| Designed::resolve(&self.cfg.plant, r))
            .collect()
    }

    fn closed_loops(&self, designed: &[Designed]) -> Result<Vec<ClosedLoop>, CliError> {
        let r = self.cfg.analysis.realization.realization();
        designed
            .iter()
            .map(|d| d.closed_loop(&self.cfg.plant, &r))
            .collect()
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into())
}

pub fn design(ctx: &Context) -> Result<PathBuf, CliError> {
    let designed = ctx.designed()?;
    let reports: Vec<ControllerReport> = designed
        .par_iter()
        .map(|d| report(&ctx.cfg, d))
        .collect::<Result<_, _>>()?;
    for r in &reports {
        for w in &r.warnings {
            log::warn!("{}: {w}", r.label);
        }
        println!(
            "{:<20} omega_d {:>10} delta_zeta {:>8} bw {:>8} Hz  passive {}{}",
            r.label,
            opt(r.omega_d),
            opt(r.delta_zeta),
            opt(r.bandwidth_hz),
            r.passivity.is_passive,
            if r.passivity.boundary { " (boundary)" } else { "" },
        );
        for (name, b) in [("af", &r.af), ("dob", &r.dob)] {
            if let Some(b) = b {
                println!(
                    "{:<20} alpha_{name} {:.4}  bound numeric {}  analytic {}",
                    "",
                    b.alpha,
                    opt(b.bound_numeric),
                    opt(b.bound_analytic)
                );
            }
        }
    }
    let rep = DesignReport {
        config: &ctx.cfg,
        realization: ctx.cfg.analysis.realization,
        controllers: reports,
    };
    let mut json = serde_json::to_vec_pretty(&rep).expect("report serializes");
    json.push(b'\n');
    let path = ctx.path("design.json");
    atomic_write(&path, &json)?;
    Ok(path)
}

fn frequency_table<F>(
    grid: &FrequencyGrid,
    designed: &[Designed],
    cls: &[ClosedLoop],
    suffixes: &[&str],
    mut columns: F,
) -> Table
where
    F: FnMut(&ClosedLoop) -> Vec<Vec<f64>>,
{
    let mut header = vec!["freq_hz".to_string()];
    for d in designed {
        header.extend(suffixes.iter().map(|s| format!("{}_{s}", d.label())));
    }
    let cols: Vec<Vec<Vec<f64>>> = cls.iter().map(&mut columns).collect();
    let mut t = Table::new(header);
    for (i, f) in grid.hz().into_iter().enumerate() {
        let mut row: Vec<Cell> = vec![f.into()];
        for c in &cols {
            row.extend(c.iter().map(|col| Cell::Num(col[i])));
        }
        t.push(row);
    }
    t
}

pub fn bode_cmd(ctx: &Context) -> Result<PathBuf, CliError> {
    let designed = ctx.designed()?;
    let cls = ctx.closed_loops(&designed)?;
    let grid = ctx.cfg.grid.grid()?;
    let t = frequency_table(&grid, &designed, &cls, &["mag_db", "phase_deg"], |cl| {
        let b = bode(&cl.h_c, &grid);
        vec![b.mag_db, b.phase_deg]
    });
    let path = ctx.path("bode.csv");
    t.write(&path)?;
    Ok(path)
}

pub fn impedance_cmd(ctx: &Context) -> Result<PathBuf, CliError> {
    let designed = ctx.designed()?;
    let cls = ctx.closed_loops(&designed)?;
    let grid = ctx.cfg.grid.grid()?;
    let t = frequency_table(&grid, &designed, &cls, &["mag_db", "phase_deg"], |cl| {
        let b = bode(&cl.z_c, &grid);
        vec![b.mag_db, b.phase_deg]
    });
    let path = ctx.path("impedance.csv");
    t.write(&path)?;
    Ok(path)
}

pub fn noise_cmd(ctx: &Context) -> Result<PathBuf, CliError> {
    let designed = ctx.designed()?;
    let cls = ctx.closed_loops(&designed)?;
    let grid = ctx.cfg.grid.grid()?;
    let t = frequency_table(&grid, &designed, &cls, &["tau", "qdot", "acc", "total"], |cl| {
        let n = noise_asd(cl, &ctx.cfg.noise, &grid);
        vec![n.tau, n.qdot, n.acc, n.total]
    });
    let path = ctx.path("noise.csv");
    t.write(&path)?;
    Ok(path)
}

pub fn passivity_cmd(ctx: &Context) -> Result<PathBuf, CliError> {
    let designed = ctx.designed()?;
    let cls = ctx.closed_loops(&designed)?;
    let mut t = Table::new([
        "label",
        "passive",
        "boundary",
        "stable",
        "min_real_part",
        "min_real_hz",
        "max_abs_phase_deg",
        "max_phase_hz",
        "alpha_dob",
        "alpha_dob_bound",
        "alpha_af",
        "alpha_af_bound",
    ]);
    for (d, cl) in designed.iter().zip(&cls) {
        let r = is_positive_real(&cl.z_c, DEFAULT_TOL)?;
        println!(
            "{:<20} passive {:<5} boundary {:<5} min Re {:>12.4e} at {:>9.3} Hz",
            d.label(),
            r.is_passive,
            r.boundary,
            r.min_real_part,
            r.min_real_omega / (2.0 * PI)
        );
        let dob = d.dob.as_ref().map(|(_, b)| b);
        let af = d.af.as_ref().map(|(_, b)| b);
        t.push(vec![
            d.label().into(),
            r.is_passive.into(),
            r.boundary.into(),
            r.is_stable.into(),
            r.min_real_part.into(),
            (r.min_real_omega / (2.0 * PI)).into(),
            r.max_abs_phase_deg.into(),
            (r.max_phase_omega / (2.0 * PI)).into(),
            dob.map(|b| b.alpha).into(),
            dob.and_then(|b| b.bound_numeric).into(),
            af.map(|b| b.alpha).into(),
            af.and_then(|b| b.bound_numeric).into(),
        ]);
    }
    let path = ctx.path("passivity.csv");
    t.write(&path)?;
    Ok(path)
}

struct RunOutcome {
    label: String,
    family: String,
    bw_hz: Option<f64>,
    seed: u64,
    model: ClosedLoop,
    result: Result<ProtocolResult, sea_core::Error>,
}

fn run_one(ctx: &Context, d: &Designed, protocol: Protocol, seed: u64) -> Result<RunOutcome, CliError> {
    let cfg = &ctx.cfg;
    let p = &cfg.plant;
    let sim = cfg.sim.sim_config(&cfg.noise, seed);
    let ctrl = d.sim_controller(p, &cfg.sim)?;
    let model = d.closed_loop(p, &cfg.sim.realization())?;
    let result = match protocol {
        Protocol::Tracking => {
            let sched = tracking_schedule(d.condition_hz(), d.spec.family, sim.record_rate)?;
            protocol_tracking_id(p, &ctrl, d.target, &sim, &sched)
        }
        Protocol::Impedance => {
            let sched = impedance_schedule(sim.record_rate)?;
            protocol_impedance_id(p, &ctrl, d.target, &sim, &sched)
        }
        Protocol::Impact => protocol_impact(p, &ctrl, d.target, &sim, &cfg.impact),
    };
    Ok(RunOutcome {
        label: d.label().to_string(),
        family: d.spec.family.to_string(),
        bw_hz: d.spec.bw_hz,
        seed,
        model,
        result,
    })
}

fn series_table(s: &TimeSeries) -> Table {
    let adaptive = !s.c_hat.is_empty();
    let mut header = vec!["t", "tau_d", "tau_k", "qdot", "theta", "theta_dot", "tau_m"];
    if adaptive {
        header.extend(["b_hat", "c_hat"]);
    }
    let mut t = Table::new(header);
    for i in 0..s.len() {
        let mut row: Vec<Cell> = [s.t[i], s.tau_d[i], s.tau_k[i], s.qdot[i], s.theta[i], s.theta_dot[i], s.tau_m[i]]
            .into_iter()
            .map(Cell::Num)
            .collect();
        if adaptive {
            row.push(s.b_hat[i].into());
            row.push(s.c_hat[i].into());
        }
        t.push(row);
    }
    t
}

fn model_value(model: &ClosedLoop, protocol: Protocol, f: f64) -> (f64, f64) {
    let tf = if protocol == Protocol::Tracking { &model.h_c } else { &model.z_c };
    let v = tf.eval(2.0 * PI * f);
    (20.0 * v.norm().log10(), v.arg().to_degrees())
}

fn wrap_deg(d: f64) -> f64 {
    (d + 180.0).rem_euclid(360.0) - 180.0
}

fn points_table(pts: &[IdentifiedPoint], model: &ClosedLoop, protocol: Protocol) -> Table {
    let mut t = Table::new([
        "freq_hz",
        "amplitude",
        "re",
        "im",
        "mag_db",
        "phase_deg",
        "saturated_fraction",
        "model_mag_db",
        "model_phase_deg",
    ]);
    for q in pts {
        let (m, ph) = model_value(model, protocol, q.freq_hz);
        t.push(vec![
            q.freq_hz.into(),
            q.amplitude.into(),
            q.re.into(),
            q.im.into(),
            q.mag_db.into(),
            q.phase_deg.into(),
            q.saturated_fraction.into(),
            m.into(),
            ph.into(),
        ]);
    }
    t
}

/// Largest magnitude and phase deviation from the model over unsaturated
/// bins.
fn model_error(pts: &[IdentifiedPoint], model: &ClosedLoop, protocol: Protocol) -> (Option<f64>, Option<f64>) {
    let mut db: Option<f64> = None;
    let mut deg: Option<f64> = None;
    for q in pts.iter().filter(|q| !q.saturated()) {
        let (m, ph) = model_value(model, protocol, q.freq_hz);
        db = Some(db.unwrap_or(0.0).max((q.mag_db - m).abs()));
        deg = Some(deg.unwrap_or(0.0).max(wrap_deg(q.phase_deg - ph).abs()));
    }
    (db, deg)
}

pub fn simulate(ctx: &Context, protocol: Protocol) -> Result<PathBuf, CliError> {
    let designed = ctx.designed()?;
    let base = ctx.cfg.seed;
    let outcomes: Vec<RunOutcome> = designed
        .par_iter()
        .enumerate()
        .map(|(i, d)| run_one(ctx, d, protocol, base.wrapping_add(i as u64)))
        .collect::<Result<_, _>>()?;

    let dir = ctx.path(protocol.as_str());
    let mut summary = match protocol {
        Protocol::Impact => Table::new([
            "label",
            "family",
            "bw_hz",
            "seed",
            "status",
            "detail",
            "approach_speed",
            "rebound_speed",
            "ratio",
            "peak_torque",
            "contact_time",
        ]),
        _ => Table::new([
            "label",
            "family",
            "bw_hz",
            "seed",
            "status",
            "detail",
            "points",
            "saturated_points",
            "max_err_db",
            "max_err_deg",
        ]),
    };
    let mut diverged = Vec::new();
    let mut failure = None;
    for o in &outcomes {
        let stem = file_stem(&o.label);
        let head: Vec<Cell> = vec![
            o.label.clone().into(),
            o.family.clone().into(),
            o.bw_hz.into(),
            o.seed.into(),
        ];
        let mut row = head;
        match &o.result {
            Ok(r) => {
                if !r.series.is_empty() {
                    series_table(&r.series).write(&dir.join(format!("{stem}_series.csv")))?;
                }
                row.extend(["ok".into(), "".into()]);
                match protocol {
                    Protocol::Impact => {
                        let s = r.impact.expect("impact summary");
                        row.extend([
                            s.approach_speed.into(),
                            s.rebound_speed.into(),
                            s.ratio.into(),
                            s.peak_torque.into(),
                            s.contact_time.into(),
                        ]);
                        println!("{:<20} rebound ratio {}", o.label, opt(s.ratio));
                    }
                    _ => {
                        points_table(&r.points, &o.model, protocol)
                            .write(&dir.join(format!("{stem}_points.csv")))?;
                        let (db, deg) = model_error(&r.points, &o.model, protocol);
                        let sat = r.points.iter().filter(|q| q.saturated()).count();
                        row.extend([
                            r.points.len().into(),
                            sat.into(),
                            db.into(),
                            deg.into(),
                        ]);
                        println!(
                            "{:<20} {} points, {sat} saturated, max error {} dB / {} deg",
                            o.label,
                            r.points.len(),
                            opt(db),
                            opt(deg)
                        );
                    }
                }
            }
            Err(e) => {
                let status = if matches!(e, sea_core::Error::Divergence { .. }) {
                    diverged.push(o.label.clone());
                    "diverged"
                } else {
                    failure.get_or_insert_with(|| e.clone());
                    "failed"
                };
                eprintln!("{}: {status}: {e}", o.label);
                row.extend([status.into(), e.to_string().into()]);
                let blanks = if protocol == Protocol::Impact { 5 } else { 4 };
                row.extend((0..blanks).map(|_| Cell::Text(String::new())));
            }
        }
        summary.push(row);
    }
    let path = dir.join("summary.csv");
    summary.write(&path)?;
    if let Some(e) = failure {
        return Err(e.into());
    }
    if !diverged.is_empty() {
        eprintln!("divergent runs: {}", diverged.join(", "));
        return Err(CliError::Divergence {
            diverged: diverged.len(),
            total: outcomes.len(),
        });
    }
    Ok(path)
}

pub fn output_dir(cfg: &RunConfig, flag: Option<&Path>) -> PathBuf {
    flag.map(Path::to_path_buf)
        .unwrap_or_else(|| cfg.output_dir.clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phase_wrapping() {
        assert_eq!(wrap_deg(350.0), -10.0);
        assert_eq!(wrap_deg(-190.0), 170.0);
        assert_eq!(wrap_deg(5.0), 5.0);
    }
}

//! TOML run configuration.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use sea_core::analysis::{FrequencyGrid, NoiseModel};
use sea_core::controllers::{CascadedPidGains, Family, MracState, Realization};
use sea_core::plant::SeaParams;
use sea_core::sim::{Friction, ImpactConfig, SimConfig};

use crate::error::CliError;

pub const CONFIG_HELP: &str = "\
CONFIGURATION (TOML, unknown keys are rejected)

  output_dir = \"out\"            default output directory (--out overrides)
  seed = 0                       base noise seed (--seed overrides); run i uses seed + i

  [plant]                        j_m [kg m^2], b_m [N m s/rad], k [N m/rad]
  [noise]                        sigma_tau [N m], sigma_qdot [rad/s], sigma_acc [rad/s^2]
  [grid]                         lo_hz = 0.01, hi_hz = 100, per_decade = 60
  [analysis]                     realization = \"ideal\" | \"filtered\"
  [sim]                          control_rate = 1000, plant_substeps = 10, record_rate = 1000,
                                 torque_limit = 100, measurement_noise = true,
                                 measurement_delay = 0, max_saturation_time = 0.5,
                                 integrator_leak = 0.999, write_series = true,
                                 friction = { coulomb = .., stiction = .. } (optional)
  [impact]                       load_inertia_ratio = 0.1, approach_speed = 4, release_gap = 0.04,
                                 ramp_time = 0.2, approach_time = 1, post_time = 1,
                                 stiffness = 5e4, damping = 50, no_endstop = false

  [[controllers]]                one entry per controller (at least one)
    family = \"pd\" | \"fsft\" | \"fsfm\" | \"cascaded_pid\" | \"mrac\"
    label = \"...\"                optional; derived from family, shaping and bandwidth
    bw_hz = 30 | [20, 30]        target bandwidth; a list expands into one run per value
    zeta_d = 0.7                 target damping (default 1 for pd, 0.7 otherwise)
    pid = { k_po, k_do, k_io, k_pi, k_ii }          cascaded_pid gains
    mrac = { b_hat = 0, c_hat = 1, rho = 0.999, sigma = 0.001,
             adaptive = true, freeze_b = true, freeze_c = false }
    dob = { omega_q_hz = 10, alpha = 0.6 | \"max\" }
    af  = { omega_q_hz = 20, alpha = 0.8 | \"max\" }  omit omega_q_hz for unfiltered

  alpha = \"max\" uses the largest passive gain of the ideal inner loop.
";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "SeaParams::nominal")]
    pub plant: SeaParams,
    #[serde(default = "NoiseModel::nominal")]
    pub noise: NoiseModel,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub impact: ImpactConfig,
    #[serde(default)]
    pub controllers: Vec<ControllerEntry>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub lo_hz: f64,
    pub hi_hz: f64,
    pub per_decade: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            lo_hz: 0.01,
            hi_hz: 100.0,
            per_decade: 60,
        }
    }
}

impl GridConfig {
    pub fn grid(&self) -> Result<FrequencyGrid, CliError> {
        Ok(FrequencyGrid::log_hz(self.lo_hz, self.hi_hz, self.per_decade)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RealizationKind {
    #[default]
    Ideal,
    Filtered,
}

impl RealizationKind {
    pub fn realization(self) -> Realization {
        match self {
            RealizationKind::Ideal => Realization::ideal(),
            RealizationKind::Filtered => Realization::filtered(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub realization: RealizationKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    pub control_rate: f64,
    pub plant_substeps: usize,
    pub record_rate: f64,
    pub torque_limit: f64,
    pub measurement_noise: bool,
    pub measurement_delay: usize,
    pub max_saturation_time: f64,
    pub integrator_leak: f64,
    pub write_series: bool,
    pub friction: Option<Friction>,
}

impl Default for SimSection {
    fn default() -> Self {
        let d = SimConfig::default();
        Self {
            control_rate: d.control_rate,
            plant_substeps: d.plant_substeps,
            record_rate: d.record_rate,
            torque_limit: d.torque_limit,
            measurement_noise: true,
            measurement_delay: d.measurement_delay,
            max_saturation_time: d.max_saturation_time,
            integrator_leak: sea_core::controllers::DEFAULT_LEAK,
            write_series: true,
            friction: None,
        }
    }
}

impl SimSection {
    pub fn sim_config(&self, noise: &NoiseModel, seed: u64) -> SimConfig {
        SimConfig {
            control_rate: self.control_rate,
            plant_substeps: self.plant_substeps,
            record_rate: self.record_rate,
            torque_limit: self.torque_limit,
            friction: self.friction,
            seed,
            noise: if self.measurement_noise {
                *noise
            } else {
                NoiseModel::off()
            },
            measurement_delay: self.measurement_delay,
            max_saturation_time: self.max_saturation_time,
            keep_series: self.write_series,
            ..SimConfig::default()
        }
    }

    pub fn realization(&self) -> Realization {
        Realization::implementation(self.control_rate, self.integrator_leak)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

impl OneOrMany {
    pub fn values(&self) -> Vec<f64> {
        match self {
            OneOrMany::One(v) => vec![*v],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaKeyword {
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlphaSpec {
    Value(f64),
    Keyword(AlphaKeyword),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DobEntry {
    pub omega_q_hz: f64,
    pub alpha: AlphaSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AfEntry {
    #[serde(default)]
    pub omega_q_hz: Option<f64>,
    pub alpha: AlphaSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MracEntry {
    pub b_hat: f64,
    pub c_hat: f64,
    pub rho: f64,
    pub sigma: f64,
    /// Run the adaptation law in simulation.
    pub adaptive: bool,
    pub freeze_b: bool,
    pub freeze_c: bool,
}

impl Default for MracEntry {
    fn default() -> Self {
        let c = MracState::converged();
        Self {
            b_hat: c.b_hat,
            c_hat: c.c_hat,
            rho: c.rho,
            sigma: c.sigma,
            adaptive: true,
            freeze_b: true,
            freeze_c: false,
        }
    }
}

impl MracEntry {
    pub fn state(&self) -> MracState {
        MracState {
            b_hat: self.b_hat,
            c_hat: self.c_hat,
            rho: self.rho,
            sigma: self.sigma,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerEntry {
    pub family: Family,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bw_hz: Option<OneOrMany>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zeta_d: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pid: Option<CascadedPidGains>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mrac: Option<MracEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dob: Option<DobEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub af: Option<AfEntry>,
}

/// One controller at one bandwidth, defaults filled in.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSpec {
    pub label: String,
    pub family: Family,
    pub bw_hz: Option<f64>,
    pub zeta_d: f64,
    pub pid: CascadedPidGains,
    pub mrac: MracEntry,
    pub dob: Option<DobEntry>,
    pub af: Option<AfEntry>,
}

fn fmt_hz(v: f64) -> String {
    format!("{v}").replace('.', "p")
}

fn check_alpha(name: &str, a: &AlphaSpec) -> Result<(), CliError> {
    if let AlphaSpec::Value(v) = a {
        if !(0.0..=1.0).contains(v) {
            return Err(CliError::Config(format!("{name}.alpha must lie in [0, 1], got {v}")));
        }
    }
    Ok(())
}

impl ControllerEntry {
    fn expand(&self) -> Result<Vec<RunSpec>, CliError> {
        let fam = self.family;
        let tuned = !matches!(fam, Family::CascadedPid);
        let bws = match (&self.bw_hz, tuned) {
            (Some(b), _) => b.values().into_iter().map(Some).collect(),
            (None, true) => {
                return Err(CliError::Config(format!("controller `{fam}` needs bw_hz")));
            }
            (None, false) => vec![None],
        };
        if bws.is_empty() {
            return Err(CliError::Config(format!("controller `{fam}`: bw_hz list is empty")));
        }
        if self.pid.is_some() && fam != Family::CascadedPid {
            return Err(CliError::Config(format!("`pid` gains given for `{fam}`")));
        }
        if self.mrac.is_some() && fam != Family::Mrac {
            return Err(CliError::Config(format!("`mrac` settings given for `{fam}`")));
        }
        if let Some(d) = &self.dob {
            check_alpha("dob", &d.alpha)?;
        }
        if let Some(a) = &self.af {
            check_alpha("af", &a.alpha)?;
        }
        let mrac = self.mrac.unwrap_or_default();
        if fam == Family::Mrac && mrac.adaptive && (self.dob.is_some() || self.af.is_some()) {
            return Err(CliError::Config(
                "shaping an adaptive mrac is not supported; set mrac.adaptive = false".into(),
            ));
        }
        let zeta_d = self
            .zeta_d
            .unwrap_or(if fam == Family::Pd { 1.0 } else { 0.7 });
        let mut base = self.label.clone().unwrap_or_else(|| {
            let mut l = fam.as_str().to_string();
            if self.dob.is_some() {
                l.push_str("-dob");
            }
            if self.af.is_some() {
                l.push_str("-af");
            }
            l
        });
        if self.label.is_some() && bws.len() == 1 {
            return Ok(vec![self.spec(base, bws[0], zeta_d, mrac)]);
        }
        if base.is_empty() {
            base = fam.as_str().into();
        }
        Ok(bws
            .into_iter()
            .map(|bw| {
                let label = match bw {
                    Some(b) => format!("{base}-{}hz", fmt_hz(b)),
                    None => base.clone(),
                };
                self.spec(label, bw, zeta_d, mrac)
            })
            .collect())
    }

    fn spec(&self, label: String, bw_hz: Option<f64>, zeta_d: f64, mrac: MracEntry) -> RunSpec {
        RunSpec {
            label,
            family: self.family,
            bw_hz,
            zeta_d,
            pid: self.pid.unwrap_or_else(CascadedPidGains::nominal),
            mrac,
            dob: self.dob,
            af: self.af,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let cfg_err = |e: sea_core::Error| CliError::Config(e.to_string());
        self.plant.validate().map_err(cfg_err)?;
        self.noise.validate().map_err(cfg_err)?;
        self.grid.grid().map_err(|e| CliError::Config(e.to_string()))?;
        self.sim
            .sim_config(&self.noise, self.seed)
            .validate()
            .map_err(cfg_err)?;
        if !(self.sim.integrator_leak > 0.0 && self.sim.integrator_leak < 1.0) {
            return Err(CliError::Config("sim.integrator_leak must lie in (0, 1)".into()));
        }
        self.impact.validate().map_err(cfg_err)?;
        if self.controllers.is_empty() {
            return Err(CliError::Config("no controllers configured".into()));
        }
        let runs = self.runs()?;
        let mut seen = BTreeSet::new();
        for r in &runs {
            if !seen.insert(r.label.clone()) {
                return Err(CliError::Config(format!("duplicate controller label `{}`", r.label)));
            }
        }
        Ok(())
    }

    /// Controller entries expanded over their bandwidth lists.
    pub fn runs(&self) -> Result<Vec<RunSpec>, CliError> {
        let mut out = Vec::new();
        for c in &self.controllers {
            out.extend(c.expand()?);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = RunConfig::from_toml("[[controllers]]\nfamily = \"fsft\"\nbw_hz = 30\n").unwrap();
        assert_eq!(c.plant, SeaParams::nominal());
        assert_eq!(c.grid, GridConfig::default());
        let r = c.runs().unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].label, "fsft-30hz");
        assert_eq!(r[0].zeta_d, 0.7);
    }

    #[test]
    fn unknown_keys_rejected() {
        let e = RunConfig::from_toml("[[controllers]]\nfamily = \"pd\"\nbw_hz = 30\nbw = 2\n");
        assert!(matches!(e, Err(CliError::Config(_))));
        let e = RunConfig::from_toml("[plant]\nj = 1\n[[controllers]]\nfamily = \"pd\"\nbw_hz = 30\n");
        assert!(matches!(e, Err(CliError::Config(_))));
    }

    #[test]
    fn empty_controller_list_rejected() {
        assert!(matches!(RunConfig::from_toml(""), Err(CliError::Config(_))));
    }

    #[test]
    fn bandwidth_list_expands() {
        let c = RunConfig::from_toml(
            "[[controllers]]\nfamily = \"pd\"\nbw_hz = [20, 30.5]\ndob = { omega_q_hz = 10, alpha = \"max\" }\n",
        )
        .unwrap();
        let labels: Vec<_> = c.runs().unwrap().into_iter().map(|r| r.label).collect();
        assert_eq!(labels, ["pd-dob-20hz", "pd-dob-30p5hz"]);
    }

    #[test]
    fn invalid_entries() {
        for text in [
            "[[controllers]]\nfamily = \"pd\"\n",
            "[[controllers]]\nfamily = \"pd\"\nbw_hz = 30\ndob = { omega_q_hz = 10, alpha = 1.5 }\n",
            "[[controllers]]\nfamily = \"pd\"\nbw_hz = 30\naf = { alpha = \"min\" }\n",
            "[[controllers]]\nfamily = \"mrac\"\nbw_hz = 30\ndob = { omega_q_hz = 10, alpha = 0.1 }\n",
            "[[controllers]]\nfamily = \"pd\"\nbw_hz = 30\n[[controllers]]\nfamily = \"pd\"\nbw_hz = 30\n",
            "[sim]\nrecord_rate = 300\n[[controllers]]\nfamily = \"pd\"\nbw_hz = 30\n",
        ] {
            assert!(matches!(RunConfig::from_toml(text), Err(CliError::Config(_))), "{text}");
        }
    }

    #[test]
    fn resolved_config_round_trips() {
        let c = RunConfig::from_toml("seed = 3\n[[controllers]]\nfamily = \"cascaded_pid\"\n").unwrap();
        let text = toml::to_string(&c).unwrap();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), c);
    }
}

//! Experiment configuration: a small TOML schema covering the four run
//! modes, validated eagerly with messages that name the offending field.
//!
//! Decibel quantities are converted to linear scale exactly once, when a
//! config section is turned into channel parameters; everything downstream
//! works in linear mW.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelConfig, ChannelRealization, QosSpec};
use crate::error::{Error, Result};
use crate::estimation::{Covariance, LtiInstance, SensorModel};
use crate::sca::ScaConfig;

/// Which runner a config drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    CaseStudy,
    Sweep,
    MonteCarlo,
    #[serde(alias = "solve-single")]
    Solve,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::CaseStudy => "case-study",
            Mode::Sweep => "sweep",
            Mode::MonteCarlo => "monte-carlo",
            Mode::Solve => "solve",
        }
    }
}

/// Selection strategies a run can request. The order here is the canonical
/// reporting order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    Snm,
    Pmf,
    Proposed,
    Brute,
}

impl Strategy {
    pub fn all() -> Vec<Strategy> {
        vec![Strategy::Snm, Strategy::Pmf, Strategy::Proposed, Strategy::Brute]
    }

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Snm => "snm",
            Strategy::Pmf => "pmf",
            Strategy::Proposed => "proposed",
            Strategy::Brute => "brute",
        }
    }

    pub fn parse(name: &str) -> Result<Strategy> {
        match name.trim() {
            "snm" => Ok(Strategy::Snm),
            "pmf" => Ok(Strategy::Pmf),
            "proposed" => Ok(Strategy::Proposed),
            "brute" => Ok(Strategy::Brute),
            other => Err(Error::Config(format!(
                "unknown strategy {other:?}; expected snm, pmf, proposed, or brute"
            ))),
        }
    }
}

/// Top-level experiment description, usually loaded from a TOML file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    /// Master RNG seed; per-trial seeds are derived from it.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "Strategy::all")]
    pub strategies: Vec<Strategy>,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    /// Case-study selector (1 or 2); both run when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub case: Option<u8>,
    #[serde(default)]
    pub sca: ScaSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<SystemSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel: Option<ChannelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deployment: Option<DeploymentSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qos: Option<QosSection>,
}

fn default_trials() -> usize {
    1
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("runs")
}

/// Optional overrides for the relaxation solver; unset fields keep the
/// library defaults.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScaSettings {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outer_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_outer: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub barrier_t0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub barrier_mu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub barrier_gap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub newton_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_newton: Option<usize>,
}

impl ScaSettings {
    pub fn resolve(&self) -> Result<ScaConfig> {
        let mut cfg = ScaConfig::default();
        if let Some(v) = self.outer_tol {
            cfg.outer_tol = v;
        }
        if let Some(v) = self.max_outer {
            cfg.max_outer = v;
        }
        if let Some(v) = self.barrier_t0 {
            cfg.barrier_t0 = v;
        }
        if let Some(v) = self.barrier_mu {
            cfg.barrier_mu = v;
        }
        if let Some(v) = self.barrier_gap {
            cfg.barrier_gap = v;
        }
        if let Some(v) = self.newton_tol {
            cfg.newton_tol = v;
        }
        if let Some(v) = self.max_newton {
            cfg.max_newton = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Plant description: matrices as row-major nested arrays, sensors optional
/// (the randomized runners draw their own when the list is empty).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub a: Vec<Vec<f64>>,
    pub q: Vec<Vec<f64>>,
    pub p_prev: Vec<Vec<f64>>,
    #[serde(default)]
    pub sensors: Vec<SensorSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorSpec {
    pub c: Vec<Vec<f64>>,
    pub r: Vec<Vec<f64>>,
}

impl SystemSpec {
    pub fn a_matrix(&self) -> Result<DMatrix<f64>> {
        matrix_from_rows("system.a", &self.a)
    }

    pub fn q_matrix(&self) -> Result<DMatrix<f64>> {
        matrix_from_rows("system.q", &self.q)
    }

    pub fn prior_covariance(&self) -> Result<Covariance> {
        Covariance::new(matrix_from_rows("system.p_prev", &self.p_prev)?)
    }

    pub fn sensor_models(&self) -> Result<Vec<SensorModel>> {
        self.sensors
            .iter()
            .map(|s| {
                SensorModel::new(
                    matrix_from_rows("sensor.c", &s.c)?,
                    matrix_from_rows("sensor.r", &s.r)?,
                )
            })
            .collect()
    }

    /// Full plant; requires an explicit sensor list.
    pub fn instance(&self) -> Result<(LtiInstance, Covariance)> {
        if self.sensors.is_empty() {
            return Err(Error::Config(
                "system.sensors must list at least one sensor for this mode".into(),
            ));
        }
        let inst = LtiInstance::new(self.a_matrix()?, self.q_matrix()?, self.sensor_models()?)?;
        Ok((inst, self.prior_covariance()?))
    }
}

fn matrix_from_rows(name: &str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    if rows.is_empty() || rows[0].is_empty() {
        return Err(Error::Config(format!("{name} must be a nonempty matrix")));
    }
    let ncols = rows[0].len();
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Config(format!("{name} has ragged rows")));
    }
    Ok(DMatrix::from_row_iterator(
        rows.len(),
        ncols,
        rows.iter().flatten().copied(),
    ))
}

/// Literal channel for single-instance runs. Thresholds come either as
/// explicit per-sensor values or from a common rate over a bandwidth.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    pub h: Vec<f64>,
    /// Receiver noise power in dB(mW).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma2_dbm: Option<f64>,
    pub p_max_mw: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_bps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth_hz: Option<f64>,
}

impl ChannelSpec {
    pub fn validate(&self) -> Result<()> {
        if self.sigma2_dbm.is_none() {
            return Err(Error::Config(
                "channel is missing the noise power (channel.sigma2_dbm)".into(),
            ));
        }
        if self.h.len() != self.p_max_mw.len() {
            return Err(Error::Config(format!(
                "channel.h lists {} sensors, channel.p_max_mw lists {}",
                self.h.len(),
                self.p_max_mw.len()
            )));
        }
        match (&self.theta, self.rate_bps, self.bandwidth_hz) {
            (Some(t), None, None) => {
                if t.len() != self.h.len() {
                    return Err(Error::Config(format!(
                        "channel.theta lists {} thresholds for {} sensors",
                        t.len(),
                        self.h.len()
                    )));
                }
                Ok(())
            }
            (None, Some(_), Some(_)) => Ok(()),
            _ => Err(Error::Config(
                "channel needs either theta or both rate_bps and bandwidth_hz".into(),
            )),
        }
    }

    pub fn realization(&self) -> Result<ChannelRealization> {
        self.validate()?;
        let sigma2 = dbm_to_linear(self.sigma2_dbm.expect("validated"));
        let theta = match &self.theta {
            Some(t) => t.clone(),
            None => {
                let th = crate::channel::qos_threshold(
                    self.rate_bps.expect("validated"),
                    self.bandwidth_hz.expect("validated"),
                );
                vec![th; self.h.len()]
            }
        };
        ChannelRealization::new(self.h.clone(), sigma2, self.p_max_mw.clone(), theta)
    }
}

/// Random deployment for the Monte Carlo runners: sensors placed uniformly
/// over a disc, channel gains drawn per trial.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeploymentSpec {
    pub n_sensors: usize,
    /// Rows of each randomly drawn measurement matrix.
    #[serde(default = "default_one")]
    pub measurement_dim: usize,
    #[serde(default = "default_radius")]
    pub area_radius_km: f64,
    /// Common path-gain constant applied to every link.
    #[serde(default = "default_one_f")]
    pub path_gain_const: f64,
    #[serde(default)]
    pub shadow_std_db: f64,
    /// Receiver noise power in dB(mW).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma2_dbm: Option<f64>,
    #[serde(default = "default_one_f")]
    pub p_max_mw: f64,
    /// Largest eigenvalue allowed for drawn measurement-noise covariances.
    #[serde(default = "default_r_max")]
    pub r_max: f64,
}

fn default_one() -> usize {
    1
}

fn default_radius() -> f64 {
    2.0
}

fn default_one_f() -> f64 {
    1.0
}

fn default_r_max() -> f64 {
    5.0
}

impl DeploymentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_sensors == 0 {
            return Err(Error::Config("deployment.n_sensors must be at least 1".into()));
        }
        if self.measurement_dim == 0 {
            return Err(Error::Config("deployment.measurement_dim must be at least 1".into()));
        }
        if self.sigma2_dbm.is_none() {
            return Err(Error::Config(
                "deployment is missing the noise power (deployment.sigma2_dbm)".into(),
            ));
        }
        if !(self.area_radius_km > 0.0) {
            return Err(Error::Config("deployment.area_radius_km must be positive".into()));
        }
        if !(self.path_gain_const > 0.0) {
            return Err(Error::Config("deployment.path_gain_const must be positive".into()));
        }
        if !(self.shadow_std_db >= 0.0) {
            return Err(Error::Config("deployment.shadow_std_db must be nonnegative".into()));
        }
        if !(self.p_max_mw > 0.0) {
            return Err(Error::Config("deployment.p_max_mw must be positive".into()));
        }
        if !(self.r_max > 0.0) {
            return Err(Error::Config("deployment.r_max must be positive".into()));
        }
        Ok(())
    }

    pub fn sigma2_linear(&self) -> f64 {
        dbm_to_linear(self.sigma2_dbm.expect("validated"))
    }

    /// Channel description for one trial, given that trial's sensor
    /// distances and QoS specification.
    pub fn channel_config(&self, distance_km: Vec<f64>, qos: QosSpec) -> ChannelConfig {
        ChannelConfig {
            path_gain_const: vec![self.path_gain_const; self.n_sensors],
            distance_km,
            shadow_std_db: self.shadow_std_db,
            p_max: vec![self.p_max_mw; self.n_sensors],
            sigma2: self.sigma2_linear(),
            area_radius_km: self.area_radius_km,
            qos,
            unit_small_scale: false,
        }
    }
}

/// Rate requirement and the bandwidth(s) it is served over.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QosSection {
    pub rate_bps: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth_grid_hz: Option<Vec<f64>>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.strategies.is_empty() {
            return Err(Error::Config("strategies must not be empty".into()));
        }
        if let Some(c) = self.case {
            if c != 1 && c != 2 {
                return Err(Error::Config(format!("case must be 1 or 2, got {c}")));
            }
        }
        self.sca.resolve()?;
        match self.mode {
            Mode::CaseStudy => Ok(()),
            Mode::Solve => {
                let sys = self.require_system()?;
                let (inst, _) = sys.instance()?;
                let chan = self.channel.as_ref().ok_or_else(|| {
                    Error::Config("solve mode needs a [channel] section".into())
                })?;
                chan.validate()?;
                if chan.h.len() != inst.sensor_count() {
                    return Err(Error::Config(format!(
                        "channel lists {} sensors, system lists {}",
                        chan.h.len(),
                        inst.sensor_count()
                    )));
                }
                Ok(())
            }
            Mode::Sweep | Mode::MonteCarlo => {
                let sys = self.require_system()?;
                sys.a_matrix()?;
                sys.q_matrix()?;
                sys.prior_covariance()?;
                let dep = self.deployment.as_ref().ok_or_else(|| {
                    Error::Config("randomized modes need a [deployment] section".into())
                })?;
                dep.validate()?;
                if !sys.sensors.is_empty() && sys.sensors.len() != dep.n_sensors {
                    return Err(Error::Config(format!(
                        "system lists {} fixed sensors but deployment.n_sensors = {}",
                        sys.sensors.len(),
                        dep.n_sensors
                    )));
                }
                if !sys.sensors.is_empty() {
                    sys.sensor_models()?;
                }
                let qos = self.qos.as_ref().ok_or_else(|| {
                    Error::Config("randomized modes need a [qos] section".into())
                })?;
                if !(qos.rate_bps > 0.0) {
                    return Err(Error::Config("qos.rate_bps must be positive".into()));
                }
                match self.mode {
                    Mode::Sweep => match &qos.bandwidth_grid_hz {
                        Some(grid) if !grid.is_empty() => {
                            if grid.iter().any(|&b| !(b > 0.0)) {
                                return Err(Error::Config(
                                    "qos.bandwidth_grid_hz entries must be positive".into(),
                                ));
                            }
                            Ok(())
                        }
                        _ => Err(Error::Config(
                            "sweep mode needs a nonempty qos.bandwidth_grid_hz".into(),
                        )),
                    },
                    _ => match qos.bandwidth_hz {
                        Some(b) if b > 0.0 => Ok(()),
                        _ => Err(Error::Config(
                            "monte-carlo mode needs a positive qos.bandwidth_hz".into(),
                        )),
                    },
                }
            }
        }
    }

    fn require_system(&self) -> Result<&SystemSpec> {
        self.system
            .as_ref()
            .ok_or_else(|| Error::Config("this mode needs a [system] section".into()))
    }

    /// Serialized TOML echo of the loaded config.
    pub fn echo(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }
}

/// Loads and validates a config file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path)?;
    parse_config(&text)
}

/// Parses and validates config text.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig =
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

/// dB(mW) to linear mW.
pub fn dbm_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

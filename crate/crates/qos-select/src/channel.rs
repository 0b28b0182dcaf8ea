//! Wireless uplink model: pathloss, log-normal shadowing, Rayleigh-style
//! small-scale fading, SINR arithmetic, and QoS checks.
//!
//! All powers and gains are linear (mW scale); dB appears only in the
//! pathloss/shadowing formulas. A sensor's packet decodes iff its SINR
//! clears the threshold `θ_i`, which either comes from a common rate
//! requirement (`θ = 2^{r/B} − 1`) or is given per sensor.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Exp1, Normal};

use crate::error::{Error, Result};

/// How per-sensor SINR thresholds are specified. Exactly one form exists per
/// config, so "rate/bandwidth or explicit thresholds" is enforced by type.
#[derive(Debug, Clone)]
pub enum QosSpec {
    /// Common rate requirement over a shared bandwidth: `θ = 2^{r/B} − 1`.
    RateBandwidth { rate_bps: f64, bandwidth_hz: f64 },
    /// Explicit per-sensor linear thresholds.
    Thresholds(Vec<f64>),
}

/// Static description of the uplink; random realizations are drawn from it.
#[derive(Debug, Clone)]
pub struct ChannelConfig {
    /// Per-sensor path-gain constant `c_i` (dimensionless).
    pub path_gain_const: Vec<f64>,
    /// Per-sensor distance to the estimator, km.
    pub distance_km: Vec<f64>,
    /// Shadowing standard deviation in dB (log domain).
    pub shadow_std_db: f64,
    /// Per-sensor transmit power cap, mW.
    pub p_max: Vec<f64>,
    /// Receiver noise power, linear mW.
    pub sigma2: f64,
    /// Radius of the deployment disc, km; used when sampling sensor
    /// positions, not by [`draw_channel`] itself.
    pub area_radius_km: f64,
    /// SINR threshold specification.
    pub qos: QosSpec,
    /// Replace the random small-scale power gain by 1 (diagnostics only).
    pub unit_small_scale: bool,
}

impl ChannelConfig {
    pub fn sensor_count(&self) -> usize {
        self.path_gain_const.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.sensor_count();
        if self.distance_km.len() != n || self.p_max.len() != n {
            return Err(Error::Config(format!(
                "per-sensor channel fields disagree: {} path gains, {} distances, {} power caps",
                n,
                self.distance_km.len(),
                self.p_max.len()
            )));
        }
        if !(self.sigma2 > 0.0) {
            return Err(Error::Config(format!(
                "noise power must be positive (linear mW), got {}",
                self.sigma2
            )));
        }
        if !(self.shadow_std_db >= 0.0) {
            return Err(Error::Config("shadowing std must be nonnegative".into()));
        }
        if !(self.area_radius_km > 0.0) {
            return Err(Error::Config("area radius must be positive".into()));
        }
        if self.path_gain_const.iter().any(|&c| !(c >= 0.0)) {
            return Err(Error::Config("path-gain constants must be nonnegative".into()));
        }
        if self.distance_km.iter().any(|&d| !(d > 0.0)) {
            return Err(Error::Config("sensor distances must be positive".into()));
        }
        if self.p_max.iter().any(|&p| !(p > 0.0)) {
            return Err(Error::Config("power caps must be positive".into()));
        }
        match &self.qos {
            QosSpec::RateBandwidth { rate_bps, bandwidth_hz } => {
                if !(*rate_bps > 0.0) || !(*bandwidth_hz > 0.0) {
                    return Err(Error::Config(
                        "rate and bandwidth must both be positive".into(),
                    ));
                }
            }
            QosSpec::Thresholds(t) => {
                if t.len() != n {
                    return Err(Error::Config(format!(
                        "{} thresholds for {} sensors",
                        t.len(),
                        n
                    )));
                }
                if t.iter().any(|&th| !(th > 0.0)) {
                    return Err(Error::Config("SINR thresholds must be positive".into()));
                }
            }
        }
        Ok(())
    }

    /// Per-sensor thresholds implied by the QoS specification.
    pub fn thresholds(&self) -> Vec<f64> {
        match &self.qos {
            QosSpec::RateBandwidth { rate_bps, bandwidth_hz } => {
                vec![qos_threshold(*rate_bps, *bandwidth_hz); self.sensor_count()]
            }
            QosSpec::Thresholds(t) => t.clone(),
        }
    }
}

/// One draw of the uplink: linear power gains plus the fixed parameters the
/// optimizer needs alongside them.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    h: Vec<f64>,
    sigma2: f64,
    p_max: Vec<f64>,
    theta: Vec<f64>,
}

impl ChannelRealization {
    pub fn new(h: Vec<f64>, sigma2: f64, p_max: Vec<f64>, theta: Vec<f64>) -> Result<Self> {
        let n = h.len();
        if p_max.len() != n || theta.len() != n {
            return Err(Error::Dimension(format!(
                "{} gains, {} power caps, {} thresholds",
                n,
                p_max.len(),
                theta.len()
            )));
        }
        if h.iter().any(|&v| !(v >= 0.0)) {
            return Err(Error::Domain("channel gains must be nonnegative".into()));
        }
        if !(sigma2 > 0.0) {
            return Err(Error::Domain("noise power must be positive".into()));
        }
        if p_max.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::Domain("power caps must be positive".into()));
        }
        if theta.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::Domain("SINR thresholds must be positive".into()));
        }
        Ok(Self { h, sigma2, p_max, theta })
    }

    pub fn sensor_count(&self) -> usize {
        self.h.len()
    }

    pub fn h(&self) -> &[f64] {
        &self.h
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn p_max(&self) -> &[f64] {
        &self.p_max
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    /// Realization restricted to a sub-fleet, preserving order.
    pub fn restrict(&self, indices: &[usize]) -> Result<Self> {
        for &i in indices {
            if i >= self.sensor_count() {
                return Err(Error::Dimension(format!(
                    "sensor index {} out of range for fleet of {}",
                    i,
                    self.sensor_count()
                )));
            }
        }
        Self::new(
            indices.iter().map(|&i| self.h[i]).collect(),
            self.sigma2,
            indices.iter().map(|&i| self.p_max[i]).collect(),
            indices.iter().map(|&i| self.theta[i]).collect(),
        )
    }
}

/// Large-scale pathloss in dB at a distance of `d_km` kilometers.
pub fn pathloss_db(d_km: f64) -> Result<f64> {
    if !(d_km > 0.0) {
        return Err(Error::Domain(format!(
            "pathloss needs a positive distance, got {d_km} km"
        )));
    }
    Ok(-147.3 - 43.3 * d_km.log10())
}

/// Linear SINR threshold for rate `r` over bandwidth `B`: `2^{r/B} − 1`.
pub fn qos_threshold(rate_bps: f64, bandwidth_hz: f64) -> f64 {
    assert!(rate_bps > 0.0 && bandwidth_hz > 0.0, "rate and bandwidth must be positive");
    (rate_bps / bandwidth_hz).exp2() - 1.0
}

/// Draws one channel realization. Each gain is
/// `h_i = c_i · f_i · l_i · |g_i|²` with `f_i` log-normal shadowing
/// (`10^{X/10}`, `X ~ N(0, std²)` in dB), `l_i` the linear pathloss and
/// `|g_i|² ~ Exp(1)` the small-scale power gain. Deterministic given `seed`.
pub fn draw_channel(cfg: &ChannelConfig, seed: u64) -> Result<ChannelRealization> {
    cfg.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let shadow = Normal::new(0.0, cfg.shadow_std_db).expect("validated std");
    let mut h = Vec::with_capacity(cfg.sensor_count());
    for i in 0..cfg.sensor_count() {
        let f = 10f64.powf(shadow.sample(&mut rng) / 10.0);
        let l = 10f64.powf(pathloss_db(cfg.distance_km[i])? / 10.0);
        let g2: f64 = if cfg.unit_small_scale { 1.0 } else { Exp1.sample(&mut rng) };
        h.push(cfg.path_gain_const[i] * f * l * g2);
    }
    ChannelRealization::new(h, cfg.sigma2, cfg.p_max.clone(), cfg.thresholds())
}

/// Interference-plus-noise power seen by sensor `i` under powers `p`.
pub fn interference_plus_noise(i: usize, p: &[f64], real: &ChannelRealization) -> f64 {
    assert_eq!(p.len(), real.sensor_count(), "power vector length");
    let mut acc = real.sigma2;
    for (j, (&hj, &pj)) in real.h.iter().zip(p).enumerate() {
        if j != i {
            acc += hj * pj;
        }
    }
    acc
}

/// SINR of sensor `i` when every sensor transmits with the powers in `p`
/// (zero power means silent).
pub fn sinr(i: usize, p: &[f64], real: &ChannelRealization) -> f64 {
    real.h[i] * p[i] / interference_plus_noise(i, p, real)
}

/// True iff every selected sensor meets its threshold (within 1e−9 absolute)
/// and every power, selected or not, lies in `[0, p_max]`.
pub fn check_qos(selected: &[usize], p: &[f64], real: &ChannelRealization) -> bool {
    assert_eq!(p.len(), real.sensor_count(), "power vector length");
    for (i, &pi) in p.iter().enumerate() {
        if !(pi >= 0.0 && pi <= real.p_max[i]) {
            return false;
        }
    }
    selected.iter().all(|&i| sinr(i, p, real) >= real.theta[i] - 1e-9)
}

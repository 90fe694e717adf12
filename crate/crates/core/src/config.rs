//! Scenario configuration: every physical and algorithmic parameter of a run.
//!
//! Unspecified fields fall back to the reference simulation parameters
//! (three clusters and three targets, 35 dBm budget, -90 dBm noise, Rician
//! factor 3, path-loss exponent 2.2, 30 dB loss at one meter, 6 degree beams).
//! Powers are given in dBm at this surface and converted to watts internally.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ChannelParams, SystemGeometry};

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensingConfig {
    /// Desired beam width around each target, degrees.
    pub beam_width_deg: f64,
    /// Spacing of the angle grid over [-90, 90] degrees.
    pub grid_step_deg: f64,
}

impl Default for SensingConfig {
    fn default() -> Self {
        Self {
            beam_width_deg: 6.0,
            grid_step_deg: 1.8,
        }
    }
}

/// Tolerances, iteration caps and step sizes of the optimization loops.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlgorithmConfig {
    pub solver_tolerance: f64,
    pub solver_max_iter: u32,
    /// Relative objective change that stops the SCA loop.
    pub inner_tolerance: f64,
    pub inner_max_iter: usize,
    /// Relative objective change that stops the outer alternating loop.
    pub outer_tolerance: f64,
    pub outer_max_iter: usize,
    /// Infeasibility indicator level accepted as feasible.
    pub feasibility_threshold: f64,
    pub feasibility_max_iter: usize,
    /// Initial step size of the rank-one relaxation parameter.
    pub srcr_rho0: f64,
    /// Step sizes below this abort the rank reduction.
    pub srcr_rho_min: f64,
    /// Stop once `Tr(V) / lambda_max(V) < 1 + srcr_rank_tolerance`.
    pub srcr_rank_tolerance: f64,
    pub srcr_objective_tolerance: f64,
    pub srcr_max_iter: usize,
    /// Margin that closes the strict inequalities `0 < a < 1`, `eta > 0`, `chi > 0`.
    pub strict_margin: f64,
    /// Relative tightening applied to the SINR thresholds inside the convex
    /// subproblems, so rank-one rounding cannot push a rate below its floor.
    pub qos_guard: f64,
    /// Split of the RFU power coefficient used to start the low-complexity loop.
    pub iao_initial_far_share: f64,
}

impl Default for AlgorithmConfig {
    fn default() -> Self {
        Self {
            solver_tolerance: 1e-8,
            solver_max_iter: 200,
            inner_tolerance: 1e-4,
            inner_max_iter: 50,
            outer_tolerance: 1e-3,
            outer_max_iter: 20,
            feasibility_threshold: 1e-6,
            feasibility_max_iter: 50,
            srcr_rho0: 0.1,
            srcr_rho_min: 1e-8,
            srcr_rank_tolerance: 1e-7,
            srcr_objective_tolerance: 1e-4,
            srcr_max_iter: 200,
            strict_margin: 1e-6,
            qos_guard: 1e-5,
            iao_initial_far_share: 0.8,
        }
    }
}

/// Resolution of illumination-power maps (angles by radii).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IlluminationConfig {
    pub angle_step_deg: f64,
    pub radius_min: f64,
    pub radius_max: f64,
    pub radius_step: f64,
}

impl Default for IlluminationConfig {
    fn default() -> Self {
        Self {
            angle_step_deg: 1.8,
            radius_min: 10.0,
            radius_max: 100.0,
            radius_step: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n_antennas: usize,
    pub m_elements: usize,
    pub k_clusters: usize,
    pub p_max_dbm: f64,
    pub noise_power_dbm: f64,
    /// Rate floors in bits/s/Hz.
    pub qos_rnu: f64,
    pub qos_rfu: f64,
    pub geometry: SystemGeometry,
    pub channel: ChannelParams,
    pub sensing: SensingConfig,
    pub algorithm: AlgorithmConfig,
    pub illumination: IlluminationConfig,
    pub seeds: Vec<u64>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n_antennas: 6,
            m_elements: 16,
            k_clusters: 3,
            p_max_dbm: 35.0,
            noise_power_dbm: -90.0,
            qos_rnu: 0.5,
            qos_rfu: 0.1,
            geometry: SystemGeometry::default(),
            channel: ChannelParams::default(),
            sensing: SensingConfig::default(),
            algorithm: AlgorithmConfig::default(),
            illumination: IlluminationConfig::default(),
            seeds: (0..10).collect(),
        }
    }
}

fn field_err(path: &str, message: impl Into<String>) -> Error {
    Error::Config {
        path: path.to_string(),
        message: message.into(),
    }
}

impl ScenarioConfig {
    pub fn p_max_watts(&self) -> f64 {
        dbm_to_watts(self.p_max_dbm)
    }

    pub fn noise_watts(&self) -> f64 {
        dbm_to_watts(self.noise_power_dbm)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| field_err("<document>", e.to_string()))?;
        let cfg: ScenarioConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            field_err(&path, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks every field invariant, naming the offending field on failure.
    pub fn validate(&self) -> Result<()> {
        if self.k_clusters == 0 {
            return Err(field_err("k_clusters", "must be at least 1"));
        }
        if self.n_antennas == 0 {
            return Err(field_err("n_antennas", "must be at least 1"));
        }
        if self.m_elements == 0 {
            return Err(field_err("m_elements", "must be at least 1"));
        }
        if self.k_clusters > self.geometry.cluster_angle_ranges.len() {
            return Err(field_err(
                "geometry.cluster_angle_ranges",
                format!(
                    "{} clusters requested but only {} angle ranges given",
                    self.k_clusters,
                    self.geometry.cluster_angle_ranges.len()
                ),
            ));
        }
        for (name, v) in [("p_max_dbm", self.p_max_dbm), ("noise_power_dbm", self.noise_power_dbm)] {
            if !v.is_finite() {
                return Err(field_err(name, "must be finite"));
            }
        }
        for (name, v) in [("qos_rnu", self.qos_rnu), ("qos_rfu", self.qos_rfu)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(field_err(name, "rate floor must be finite and non-negative"));
            }
        }
        if !(self.sensing.beam_width_deg > 0.0) {
            return Err(field_err("sensing.beam_width_deg", "must be positive"));
        }
        if !(self.sensing.grid_step_deg > 0.0) {
            return Err(field_err("sensing.grid_step_deg", "must be positive"));
        }
        let f = self.algorithm.iao_initial_far_share;
        if !(f > 0.0 && f < 1.0) {
            return Err(field_err("algorithm.iao_initial_far_share", "must lie in (0, 1)"));
        }
        let il = &self.illumination;
        if !(il.angle_step_deg > 0.0 && il.radius_step > 0.0 && il.radius_min > 0.0 && il.radius_max >= il.radius_min) {
            return Err(field_err("illumination", "steps must be positive and 0 < radius_min <= radius_max"));
        }
        self.geometry.validate().map_err(|e| field_err("geometry", e.to_string()))?;
        self.channel.validate().map_err(|e| field_err("channel", e.to_string()))?;
        Ok(())
    }
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path)?;
    ScenarioConfig::from_toml_str(&text)
}

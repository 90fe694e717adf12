//! Simulation geometry, user placement and Rician channel generation.
//!
//! The layout is planar. The RIS is a ULA whose boresight points along +y,
//! so a location at angle `theta` (degrees, positive toward +x) and radius `r`
//! sits at `(r sin theta, r cos theta)` relative to the RIS. The BS array is a
//! ULA parallel to the RIS.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::error::{invalid, Result};
use crate::linalg::{cis, CMat, CVec};
use crate::rng::{self, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemGeometry {
    pub bs_position: [f64; 2],
    pub ris_position: [f64; 2],
    /// Per-cluster angle intervals `(lo, hi]` in degrees.
    pub cluster_angle_ranges: Vec<[f64; 2]>,
    pub rnu_radius_range: [f64; 2],
    pub rfu_radius_range: [f64; 2],
    pub target_angles: Vec<f64>,
    pub target_radii: Vec<f64>,
}

impl Default for SystemGeometry {
    fn default() -> Self {
        Self {
            bs_position: [-40.0, 10.0],
            ris_position: [0.0, 0.0],
            cluster_angle_ranges: vec![[-30.0, -20.0], [20.0, 30.0], [60.0, 70.0]],
            rnu_radius_range: [20.0, 25.0],
            rfu_radius_range: [80.0, 85.0],
            target_angles: vec![-45.0, 0.0, 45.0],
            target_radii: vec![90.0, 90.0, 80.0],
        }
    }
}

impl SystemGeometry {
    pub fn validate(&self) -> Result<()> {
        for r in &self.cluster_angle_ranges {
            if !(r[0].is_finite() && r[1].is_finite() && r[0] <= r[1]) {
                return Err(invalid(format!("bad cluster angle range {r:?}")));
            }
        }
        let mut sorted = self.cluster_angle_ranges.clone();
        sorted.sort_by(|a, b| a[0].total_cmp(&b[0]));
        for w in sorted.windows(2) {
            if w[1][0] < w[0][1] {
                return Err(invalid(format!("cluster angle ranges {:?} and {:?} overlap", w[0], w[1])));
            }
        }
        for (name, r) in [("rnu_radius_range", self.rnu_radius_range), ("rfu_radius_range", self.rfu_radius_range)] {
            if !(r[0] > 0.0 && r[0] <= r[1] && r[1].is_finite()) {
                return Err(invalid(format!("{name} must be a positive, non-empty interval, got {r:?}")));
            }
        }
        if self.target_angles.len() != self.target_radii.len() {
            return Err(invalid("target_angles and target_radii differ in length"));
        }
        if self.target_angles.is_empty() {
            return Err(invalid("at least one target is required"));
        }
        if self.target_radii.iter().any(|&r| !(r > 0.0)) {
            return Err(invalid("target radii must be positive"));
        }
        Ok(())
    }

    /// Distance and RIS-side angle (degrees) of the BS.
    pub fn bs_from_ris(&self) -> (f64, f64) {
        let dx = self.bs_position[0] - self.ris_position[0];
        let dy = self.bs_position[1] - self.ris_position[1];
        (dx.hypot(dy), dx.atan2(dy).to_degrees())
    }

    /// Departure angle (degrees) at the BS array toward the RIS.
    pub fn ris_from_bs_deg(&self) -> f64 {
        let dx = self.ris_position[0] - self.bs_position[0];
        let dy = self.ris_position[1] - self.bs_position[1];
        dx.atan2(dy).to_degrees()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelParams {
    /// Linear power gain at the 1 m reference distance.
    pub pathloss_ref: f64,
    pub pathloss_exponent_br: f64,
    pub pathloss_exponent_ru: f64,
    pub rician_br: f64,
    pub rician_ru: f64,
    /// Element spacing over wavelength.
    pub element_spacing_ratio: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            pathloss_ref: 1e-3,
            pathloss_exponent_br: 2.2,
            pathloss_exponent_ru: 2.2,
            rician_br: 3.0,
            rician_ru: 3.0,
            element_spacing_ratio: 0.5,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.pathloss_ref > 0.0) {
            return Err(invalid("pathloss_ref must be positive"));
        }
        if !(self.pathloss_exponent_br > 0.0 && self.pathloss_exponent_ru > 0.0) {
            return Err(invalid("path-loss exponents must be positive"));
        }
        if !(self.rician_br >= 0.0 && self.rician_ru >= 0.0) {
            return Err(invalid("Rician factors must be non-negative"));
        }
        if !(self.element_spacing_ratio > 0.0) {
            return Err(invalid("element_spacing_ratio must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Near,
    Far,
}

impl Role {
    pub const BOTH: [Role; 2] = [Role::Near, Role::Far];

    pub fn index(self) -> usize {
        match self {
            Role::Near => 0,
            Role::Far => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserPosition {
    pub cluster: usize,
    pub role: Role,
    pub angle_deg: f64,
    pub radius: f64,
}

/// BS-RIS matrix `G` (M x N) and RIS-user vectors `g[k][role]` (length M).
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    pub g_bs_ris: CMat,
    pub g_ris_user: Vec<[CVec; 2]>,
}

impl ChannelSet {
    pub fn n_antennas(&self) -> usize {
        self.g_bs_ris.ncols()
    }

    pub fn m_elements(&self) -> usize {
        self.g_bs_ris.nrows()
    }

    pub fn k_clusters(&self) -> usize {
        self.g_ris_user.len()
    }

    pub fn user(&self, cluster: usize, role: Role) -> &CVec {
        &self.g_ris_user[cluster][role.index()]
    }
}

/// ULA response `[1, e^{j 2 pi s sin t}, ..., e^{j 2 pi s (m-1) sin t}]`.
pub fn steering_vector(theta_deg: f64, m: usize, spacing_ratio: f64) -> Result<CVec> {
    if !theta_deg.is_finite() {
        return Err(invalid(format!("steering angle must be finite, got {theta_deg}")));
    }
    if m == 0 {
        return Err(invalid("steering vector needs at least one element"));
    }
    let step = 2.0 * PI * spacing_ratio * theta_deg.to_radians().sin();
    Ok(CVec::from_fn(m, |p, _| cis(step * p as f64)))
}

pub fn pathloss(distance: f64, exponent: f64, ref_gain: f64) -> Result<f64> {
    if !(distance > 0.0) {
        return Err(invalid(format!("distance must be positive, got {distance}")));
    }
    Ok(ref_gain * distance.powf(-exponent))
}

fn sample_interval<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        // (lo, hi]: flip the half-open [0, 1) draw
        hi - rng.random::<f64>() * (hi - lo)
    } else {
        lo
    }
}

/// Draws each cluster's angle and the RNU/RFU radii; both users of a cluster
/// share the cluster angle.
pub fn sample_user_positions(geometry: &SystemGeometry, k_clusters: usize, seed: u64) -> Result<Vec<UserPosition>> {
    geometry.validate()?;
    if k_clusters > geometry.cluster_angle_ranges.len() {
        return Err(invalid(format!(
            "{k_clusters} clusters but only {} angle ranges",
            geometry.cluster_angle_ranges.len()
        )));
    }
    let mut rng = rng::stream(seed, Stream::Positions);
    let mut out = Vec::with_capacity(2 * k_clusters);
    for (k, range) in geometry.cluster_angle_ranges.iter().take(k_clusters).enumerate() {
        let angle = sample_interval(&mut rng, range[0], range[1]);
        let rn = sample_interval(&mut rng, geometry.rnu_radius_range[0], geometry.rnu_radius_range[1]);
        let rf = sample_interval(&mut rng, geometry.rfu_radius_range[0], geometry.rfu_radius_range[1]);
        out.push(UserPosition { cluster: k, role: Role::Near, angle_deg: angle, radius: rn });
        out.push(UserPosition { cluster: k, role: Role::Far, angle_deg: angle, radius: rf });
    }
    Ok(out)
}

fn rician_weights(kappa: f64) -> (f64, f64) {
    if kappa.is_infinite() {
        return (1.0, 0.0);
    }
    ((kappa / (1.0 + kappa)).sqrt(), (1.0 / (1.0 + kappa)).sqrt())
}

/// Rician BS-RIS and RIS-user channels; the LoS parts are products of array
/// responses and the NLoS parts are unit-variance Rayleigh draws.
pub fn generate_channels(config: &ScenarioConfig, positions: &[UserPosition], seed: u64) -> Result<ChannelSet> {
    let (n, m, k) = (config.n_antennas, config.m_elements, config.k_clusters);
    let p = &config.channel;
    p.validate()?;
    if positions.len() != 2 * k {
        return Err(invalid(format!("expected {} user positions, got {}", 2 * k, positions.len())));
    }
    let s = p.element_spacing_ratio;

    let (d_br, arrival) = config.geometry.bs_from_ris();
    let departure = config.geometry.ris_from_bs_deg();
    let g_los = steering_vector(arrival, m, s)? * steering_vector(departure, n, s)?.adjoint();
    let mut rng = rng::stream(seed, Stream::BsRisChannel);
    let g_nlos = rng::complex_normal_mat(&mut rng, m, n);
    let (wl, wn) = rician_weights(p.rician_br);
    let amp = pathloss(d_br, p.pathloss_exponent_br, p.pathloss_ref)?.sqrt();
    let g_bs_ris = (g_los.scale(wl) + g_nlos.scale(wn)).scale(amp);

    let mut g_ris_user = Vec::with_capacity(k);
    for cluster in 0..k {
        let mut pair = [CVec::zeros(m), CVec::zeros(m)];
        for role in Role::BOTH {
            let pos = positions
                .iter()
                .find(|u| u.cluster == cluster && u.role == role)
                .ok_or_else(|| invalid(format!("missing position for cluster {cluster} {role:?}")))?;
            let los = steering_vector(pos.angle_deg, m, s)?;
            let mut rng = rng::stream(seed, Stream::RisUserChannel { cluster, far: role == Role::Far });
            let nlos = rng::complex_normal_vec(&mut rng, m);
            let (wl, wn) = rician_weights(p.rician_ru);
            let amp = pathloss(pos.radius, p.pathloss_exponent_ru, p.pathloss_ref)?.sqrt();
            pair[role.index()] = (los.scale(wl) + nlos.scale(wn)).scale(amp);
        }
        g_ris_user.push(pair);
    }
    let set = ChannelSet { g_bs_ris, g_ris_user };
    debug_assert!(set.g_bs_ris.iter().all(|z| z.re.is_finite() && z.im.is_finite()));
    Ok(set)
}

/// Pure line-of-sight channel from the RIS to a probe location.
pub fn los_probe_channel(angle_deg: f64, radius: f64, m: usize, params: &ChannelParams) -> Result<CVec> {
    let amp = pathloss(radius, params.pathloss_exponent_ru, params.pathloss_ref)?.sqrt();
    Ok(steering_vector(angle_deg, m, params.element_spacing_ratio)? * num_complex::Complex64::new(amp, 0.0))
}

/// Positions and channels for one seed.
pub fn realize(config: &ScenarioConfig, seed: u64) -> Result<(Vec<UserPosition>, ChannelSet)> {
    let positions = sample_user_positions(&config.geometry, config.k_clusters, seed)?;
    let channels = generate_channels(config, &positions, seed)?;
    Ok((positions, channels))
}

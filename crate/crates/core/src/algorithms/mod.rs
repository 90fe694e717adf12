//! Optimization algorithms: the SCA joint active-beamforming and power
//! subproblem with its feasibility search, SRCR passive beamforming, the
//! feasibility bounds on the power split with closed-form allocation, and the
//! two alternating outer loops (IBCD and IAO).
//!
//! All convex subproblems are built in normalized units: beamformers are
//! divided by the power budget and every received-power expression by the
//! largest power its user could receive, so the solver sees quantities of
//! order one regardless of path loss.

mod active;
mod joint;
mod outer;
mod passive;
mod qos;
mod power;
mod trace;

use std::sync::Arc;

pub use active::{build_active_subproblem, solve_active};
pub use joint::{build_feasibility_subproblem, build_joint_subproblem, find_feasible_init, solve_joint_sca, JointOutcome, ScaState};
pub use outer::{random_phases, run_iao, run_ibcd, start_phases, SchemeOutput, MAX_STARTS};
pub(crate) use outer::{converged, finish, outer_entry, passive_step, qos_ok, rounded_beams, Blocks, GUARD_SLACK};
pub use qos::{noma_rows, orthogonal_rows, QosRow, QosTerm};
pub use passive::{build_passive_subproblem, solve_passive_srcr, PassiveOutcome, PassiveQos, SrcrState};
pub use power::{closed_form_power, power_feasibility_bounds, PowerBounds};
pub use trace::{Phase, RunTrace, TraceEntry};

use crate::config::ScenarioConfig;
use crate::conic::{ClarabelBackend, ConicBackend};
use crate::error::{invalid, Error, Result};
use crate::geometry::{ChannelSet, Role};
use crate::linalg::{self, CMat};
use crate::metrics::{self, build_effective_matrices, build_sensing_spec, EffectiveMatrices, SensingSpec};

/// `2^R - 1` for each rate floor.
pub fn qos_rate_thresholds(qos_bits: &[f64]) -> Result<Vec<f64>> {
    qos_bits.iter().map(|&r| rate_threshold(r)).collect()
}

pub fn rate_threshold(bits: f64) -> Result<f64> {
    if !(bits >= 0.0) || !bits.is_finite() {
        return Err(invalid(format!("rate floor must be finite and non-negative, got {bits}")));
    }
    Ok(bits.exp2() - 1.0)
}

/// One channel realization together with everything the algorithms derive
/// from the configuration.
#[derive(Clone)]
pub struct Instance {
    pub config: ScenarioConfig,
    pub channels: ChannelSet,
    pub sensing: SensingSpec,
    /// `Gamma` and `Upsilon`; `h` is left empty.
    pub effective: EffectiveMatrices,
    pub p_max: f64,
    pub noise: f64,
    /// SINR floors `2^R - 1` of the RNU and RFU.
    pub r_near: f64,
    pub r_far: f64,
    pub backend: Arc<dyn ConicBackend>,
}

impl std::fmt::Debug for Instance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Instance")
            .field("n", &self.channels.n_antennas())
            .field("m", &self.channels.m_elements())
            .field("k", &self.channels.k_clusters())
            .field("q", &self.sensing.interest_set.len())
            .finish()
    }
}

impl Instance {
    pub fn new(config: &ScenarioConfig, channels: ChannelSet) -> Result<Self> {
        config.validate()?;
        if channels.n_antennas() != config.n_antennas || channels.m_elements() != config.m_elements || channels.k_clusters() != config.k_clusters {
            return Err(invalid("channel dimensions do not match the configuration"));
        }
        let sensing = build_sensing_spec(&config.geometry.target_angles, config.sensing.beam_width_deg, config.sensing.grid_step_deg)?;
        let effective = build_effective_matrices(&channels, &sensing, config.channel.element_spacing_ratio, None)?;
        let backend = Arc::new(ClarabelBackend::new(config.algorithm.solver_tolerance, config.algorithm.solver_max_iter));
        Ok(Self {
            p_max: config.p_max_watts(),
            noise: config.noise_watts(),
            r_near: rate_threshold(config.qos_rnu)?,
            r_far: rate_threshold(config.qos_rfu)?,
            config: config.clone(),
            channels,
            sensing,
            effective,
            backend,
        })
    }

    /// Builds the instance for one seed of `config`.
    pub fn realize(config: &ScenarioConfig, seed: u64) -> Result<Self> {
        let (_, channels) = crate::geometry::realize(config, seed)?;
        Self::new(config, channels)
    }

    pub fn with_backend(mut self, backend: Arc<dyn ConicBackend>) -> Self {
        self.backend = backend;
        self
    }

    pub fn n(&self) -> usize {
        self.channels.n_antennas()
    }

    pub fn m(&self) -> usize {
        self.channels.m_elements()
    }

    pub fn k(&self) -> usize {
        self.channels.k_clusters()
    }

    /// SINR floors tightened by the configured guard.
    pub(crate) fn guarded_thresholds(&self) -> (f64, f64) {
        let g = 1.0 + self.config.algorithm.qos_guard;
        (self.r_near * g, self.r_far * g)
    }

    /// `H_{k,i} = Gamma^H V Gamma` for the given passive matrix.
    pub fn h_matrices(&self, passive: &CMat) -> Vec<[CMat; 2]> {
        self.effective
            .gamma
            .iter()
            .map(|pair| pair.clone().map(|g| linalg::hermitian_part(&(g.adjoint() * passive * g))))
            .collect()
    }

    /// `Upsilon_q^H V Upsilon_q` for every interest angle.
    pub fn beam_forms(&self, passive: &CMat) -> Vec<CMat> {
        self.effective.beam_forms(passive)
    }

    pub fn effective_with(&self, passive: &CMat) -> EffectiveMatrices {
        EffectiveMatrices { h: Some(self.h_matrices(passive)), ..self.effective.clone() }
    }

    /// Minimum beampattern gain over the interest set.
    pub fn min_gain(&self, passive: &CMat, active: &[CMat]) -> f64 {
        let n = self.n();
        let sum = active.iter().fold(CMat::zeros(n, n), |acc, w| acc + w);
        self.beam_forms(passive).iter().map(|b| linalg::trace_product_re(b, &sum)).fold(f64::INFINITY, f64::min)
    }
}

/// Scale factors of the normalized subproblems for a fixed passive matrix.
#[derive(Debug, Clone)]
pub(crate) struct Normalization {
    /// Beamformer scale: `W = p_max * W_hat`.
    pub p: f64,
    /// Received-power scale of each user: `p_max * lambda_max(H_{k,i})`.
    pub comm: Vec<[f64; 2]>,
    /// Normalized `H_hat_{k,i} = p_max H_{k,i} / comm_{k,i}`.
    pub h_hat: Vec<[CMat; 2]>,
    /// Beampattern scale `p_max * max_q lambda_max(B_q)`.
    pub beam: f64,
    pub beam_hat: Vec<CMat>,
}

impl Normalization {
    pub fn new(inst: &Instance, h: &[[CMat; 2]], beam_forms: &[CMat]) -> Result<Self> {
        let p = inst.p_max;
        let mut comm = Vec::with_capacity(h.len());
        let mut h_hat = Vec::with_capacity(h.len());
        for (k, pair) in h.iter().enumerate() {
            let mut c = [0.0; 2];
            for role in Role::BOTH {
                let lm = linalg::lambda_max(&pair[role.index()]);
                if !(lm > 0.0) {
                    return Err(Error::DegenerateChannel(format!("cluster {k} {role:?} user receives no power through the RIS")));
                }
                c[role.index()] = p * lm;
            }
            h_hat.push([pair[0].scale(p / c[0]), pair[1].scale(p / c[1])]);
            comm.push(c);
        }
        let lmax = beam_forms.iter().map(linalg::lambda_max).fold(0.0, f64::max);
        let beam = if lmax > 0.0 { p * lmax } else { 1.0 };
        let beam_hat = beam_forms.iter().map(|b| b.scale(p / beam)).collect();
        Ok(Self { p, comm, h_hat, beam, beam_hat })
    }

    pub fn noise_hat(&self, noise: f64, k: usize, role: Role) -> f64 {
        noise / self.comm[k][role.index()]
    }
}

/// Rank-one factors and eigen-ratios of a set of beamforming matrices.
pub(crate) fn extract_beams(mats: &[CMat]) -> (Vec<crate::linalg::CVec>, Vec<f64>, f64) {
    let mut vecs = Vec::with_capacity(mats.len());
    let mut ratios = Vec::with_capacity(mats.len());
    let mut worst_rel: f64 = 0.0;
    for w in mats {
        let r = crate::conic::extract_rank_one(w);
        worst_rel = worst_rel.max(r.relative_error(w));
        ratios.push(r.ratio);
        vecs.push(r.vector);
    }
    (vecs, ratios, worst_rel)
}

/// Checks every QoS constraint of a NOMA solution from the recomputed rates.
pub fn qos_shortfall(inst: &Instance, solution: &metrics::Solution) -> Result<f64> {
    let report = metrics::achievable_rates(&inst.channels, solution, inst.noise)?;
    let mut worst: f64 = f64::NEG_INFINITY;
    for c in &report.clusters {
        worst = worst.max(inst.config.qos_rnu - c.near).max(inst.config.qos_rfu - c.far);
    }
    Ok(worst)
}

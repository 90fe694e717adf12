//! Communication and sensing metrics: SINRs and rates under the fixed SIC
//! order (the RNU decodes the RFU first), beampattern gain in direct and trace
//! forms, the effective matrices behind the trace forms, the desired
//! beampattern mask and illumination power.
//!
//! Phase convention: the RIS reflection matrix is `Theta = diag(v)`. The
//! lifted passive matrix that makes every trace form exact is
//! `V = conj(v) conj(v)^H`, because `g^H Theta G w = conj(v)^H diag(g^H) G w`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geometry::{steering_vector, ChannelSet, Role};
use crate::linalg::{self, cis, diag_mul, is_hermitian, CMat, CVec};

/// Power-allocation coefficients of one cluster.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerSplit {
    pub near: f64,
    pub far: f64,
}

impl PowerSplit {
    pub fn from_far(far: f64) -> Self {
        Self { near: 1.0 - far, far }
    }
}

/// Active beamforming, power coefficients and passive beamforming.
///
/// `power_coeffs` is empty for schemes that do not use NOMA.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub active_mats: Vec<CMat>,
    pub active_vecs: Option<Vec<CVec>>,
    pub power_coeffs: Vec<PowerSplit>,
    pub passive_mat: CMat,
    pub passive_vec: Option<CVec>,
}

/// Lifts RIS phases to the passive matrix `conj(v) conj(v)^H`.
pub fn passive_mat_from_phases(v: &CVec) -> CMat {
    let u = v.conjugate();
    linalg::outer(&u)
}

/// Unit-modulus phases whose lift best matches the principal eigenvector `u`.
pub fn phases_from_principal(u: &CVec) -> CVec {
    u.map(|z| if z.norm() > 0.0 { cis(-z.arg()) } else { linalg::ONE })
}

impl Solution {
    /// Builds a rank-one solution from beam vectors and RIS phases.
    pub fn from_vectors(active: Vec<CVec>, power_coeffs: Vec<PowerSplit>, phases: CVec) -> Self {
        let active_mats = active.iter().map(linalg::outer).collect();
        let passive_mat = passive_mat_from_phases(&phases);
        Self {
            active_mats,
            active_vecs: Some(active),
            power_coeffs,
            passive_mat,
            passive_vec: Some(phases),
        }
    }

    pub fn total_power(&self) -> f64 {
        self.active_mats.iter().map(|w| w.trace().re).sum()
    }

    pub fn active_sum(&self) -> CMat {
        let n = self.active_mats.first().map_or(0, |w| w.nrows());
        self.active_mats.iter().fold(CMat::zeros(n, n), |acc, w| acc + w)
    }

    /// Checks the structural invariants of a solution.
    pub fn validate(&self) -> Result<()> {
        for (k, a) in self.power_coeffs.iter().enumerate() {
            if !((a.near + a.far - 1.0).abs() <= 1e-9 && a.near > 0.0 && a.near < 1.0 && a.far > 0.0 && a.far < 1.0) {
                return Err(invalid(format!("cluster {k}: power coefficients {a:?} must lie in (0,1) and sum to 1")));
            }
        }
        for (m, d) in self.passive_mat.diagonal().iter().enumerate() {
            if (d.re - 1.0).abs() > 1e-8 || d.im.abs() > 1e-8 {
                return Err(invalid(format!("passive matrix diagonal entry {m} is {d}, expected 1")));
            }
        }
        for (name, x) in self.active_mats.iter().map(|w| ("active", w)).chain(std::iter::once(("passive", &self.passive_mat))) {
            if !is_hermitian(x, 1e-10) {
                return Err(invalid(format!("{name} matrix is not Hermitian")));
            }
            let scale = x.norm().max(1e-300);
            if linalg::lambda_min(x) < -1e-8 * scale {
                return Err(invalid(format!("{name} matrix is not positive semidefinite")));
            }
        }
        if let Some(vecs) = &self.active_vecs {
            for (w, mat) in vecs.iter().zip(&self.active_mats) {
                if (linalg::outer(w) - mat).norm() > 1e-6 * mat.norm().max(1.0) {
                    return Err(invalid("active vectors disagree with active matrices"));
                }
            }
        }
        if let Some(v) = &self.passive_vec {
            if (passive_mat_from_phases(v) - &self.passive_mat).norm() > 1e-6 * self.passive_mat.norm().max(1.0) {
                return Err(invalid("RIS phases disagree with the passive matrix"));
            }
        }
        Ok(())
    }
}

/// `Gamma = diag(g^H) G`, `Upsilon_q = diag(a(theta_q)^H) G` and, given the
/// passive matrix, `H = Gamma^H V Gamma`.
#[derive(Debug, Clone)]
pub struct EffectiveMatrices {
    pub gamma: Vec<[CMat; 2]>,
    pub upsilon: Vec<CMat>,
    pub h: Option<Vec<[CMat; 2]>>,
}

impl EffectiveMatrices {
    pub fn gamma(&self, k: usize, role: Role) -> &CMat {
        &self.gamma[k][role.index()]
    }

    pub fn h(&self, k: usize, role: Role) -> &CMat {
        &self.h.as_ref().expect("effective matrices built without a passive matrix")[k][role.index()]
    }

    /// Beampattern coefficient matrices `Upsilon_q^H V Upsilon_q` (N x N).
    pub fn beam_forms(&self, passive: &CMat) -> Vec<CMat> {
        self.upsilon.iter().map(|u| linalg::hermitian_part(&(u.adjoint() * passive * u))).collect()
    }
}

pub fn build_effective_matrices(
    channels: &ChannelSet,
    sensing: &SensingSpec,
    spacing_ratio: f64,
    passive: Option<&CMat>,
) -> Result<EffectiveMatrices> {
    let g = &channels.g_bs_ris;
    let m = channels.m_elements();
    let gamma: Vec<[CMat; 2]> = channels
        .g_ris_user
        .iter()
        .map(|pair| [diag_mul(&pair[0].conjugate(), g), diag_mul(&pair[1].conjugate(), g)])
        .collect();
    let mut upsilon = Vec::with_capacity(sensing.interest_set.len());
    for &idx in &sensing.interest_set {
        let a = steering_vector(sensing.angle_grid[idx], m, spacing_ratio)?;
        upsilon.push(diag_mul(&a.conjugate(), g));
    }
    let h = passive.map(|v| {
        gamma
            .iter()
            .map(|pair| {
                [
                    linalg::hermitian_part(&(pair[0].adjoint() * v * &pair[0])),
                    linalg::hermitian_part(&(pair[1].adjoint() * v * &pair[1])),
                ]
            })
            .collect()
    });
    Ok(EffectiveMatrices { gamma, upsilon, h })
}

/// Angle grid, interest set and 0/1 desired-beampattern mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensingSpec {
    pub angle_grid: Vec<f64>,
    pub interest_set: Vec<usize>,
    pub desired_mask: Vec<u8>,
    pub beam_width: f64,
    pub target_angles: Vec<f64>,
}

impl SensingSpec {
    pub fn interest_angles(&self) -> Vec<f64> {
        self.interest_set.iter().map(|&i| self.angle_grid[i]).collect()
    }
}

/// Uniform grid over [-90, 90] degrees, rounded to 1e-9 degrees.
pub fn angle_grid(step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step <= 180.0) {
        return Err(invalid(format!("grid step must lie in (0, 180], got {step}")));
    }
    let count = (180.0 / step + 1e-9).floor() as usize;
    Ok((0..=count).map(|i| ((-90.0 + i as f64 * step) * 1e9).round() / 1e9).collect())
}

pub fn build_sensing_spec(target_angles: &[f64], beam_width: f64, grid_step: f64) -> Result<SensingSpec> {
    if !(beam_width > 0.0) {
        return Err(invalid(format!("beam width must be positive, got {beam_width}")));
    }
    let grid = angle_grid(grid_step)?;
    let half = beam_width / 2.0 + 1e-9;
    let mask: Vec<u8> = grid
        .iter()
        .map(|&th| u8::from(target_angles.iter().any(|&t| (th - t).abs() <= half)))
        .collect();
    let interest_set: Vec<usize> = mask.iter().enumerate().filter(|(_, &m)| m == 1).map(|(i, _)| i).collect();
    if interest_set.is_empty() {
        return Err(invalid("no grid angle falls within half a beam width of any target"));
    }
    Ok(SensingSpec {
        angle_grid: grid,
        interest_set,
        desired_mask: mask,
        beam_width,
        target_angles: target_angles.to_vec(),
    })
}

/// `a^H Theta G (sum_k w_k w_k^H) G^H Theta^H a` at `theta_deg`.
pub fn beampattern_gain_direct(phases: &CVec, g_bs_ris: &CMat, active: &[CVec], theta_deg: f64, spacing_ratio: f64) -> Result<f64> {
    let a = steering_vector(theta_deg, g_bs_ris.nrows(), spacing_ratio)?;
    // row vector a^H Theta G
    let row = diag_mul(phases, g_bs_ris).adjoint() * &a;
    Ok(active.iter().map(|w| row.dotc(w).norm_sqr()).sum())
}

/// `Tr[V Upsilon (sum_k W_k) Upsilon^H]`.
pub fn beampattern_gain_trace(passive: &CMat, upsilon: &CMat, active: &[CMat]) -> Result<f64> {
    if !is_hermitian(passive, 1e-10) {
        return Err(invalid("passive matrix is not Hermitian"));
    }
    if active.iter().any(|w| !is_hermitian(w, 1e-10)) {
        return Err(invalid("active matrix is not Hermitian"));
    }
    let n = upsilon.ncols();
    let sum = active.iter().fold(CMat::zeros(n, n), |acc, w| acc + w);
    let inner = upsilon * sum * upsilon.adjoint();
    let scale = passive.norm() * inner.norm();
    Ok(linalg::real_part_checked(linalg::trace_product(passive, &inner), scale))
}

/// Beampattern gain at every interest angle of `sensing`.
pub fn interest_gains(solution: &Solution, effective: &EffectiveMatrices) -> Result<Vec<f64>> {
    effective
        .upsilon
        .iter()
        .map(|u| beampattern_gain_trace(&solution.passive_mat, u, &solution.active_mats))
        .collect()
}

/// Minimum beampattern gain over the interest set.
pub fn min_beampattern(solution: &Solution, effective: &EffectiveMatrices) -> Result<f64> {
    Ok(interest_gains(solution, effective)?.into_iter().fold(f64::INFINITY, f64::min))
}

/// Received powers `|g_{k,i}^H Theta G w_j|^2` in trace form, indexed `[k][role][j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelGains(pub Vec<[Vec<f64>; 2]>);

impl ChannelGains {
    /// Trace form `Tr(W_j H_{k,i})`, with `H` taken from `effective`.
    pub fn from_trace(effective: &EffectiveMatrices, active: &[CMat]) -> Self {
        let k = effective.gamma.len();
        Self(
            (0..k)
                .map(|c| {
                    Role::BOTH.map(|role| {
                        let h = effective.h(c, role);
                        active.iter().map(|w| linalg::trace_product_re(w, h)).collect()
                    })
                })
                .collect(),
        )
    }

    /// Direct form from beam vectors and RIS phases.
    pub fn from_vectors(channels: &ChannelSet, phases: &CVec, active: &[CVec]) -> Self {
        let theta_g = diag_mul(phases, &channels.g_bs_ris);
        Self(
            channels
                .g_ris_user
                .iter()
                .map(|pair| {
                    Role::BOTH.map(|role| {
                        let row = theta_g.adjoint() * &pair[role.index()];
                        active.iter().map(|w| row.dotc(w).norm_sqr()).collect()
                    })
                })
                .collect(),
        )
    }

    pub fn signal(&self, k: usize, role: Role) -> f64 {
        self.0[k][role.index()][k]
    }

    pub fn inter_cluster(&self, k: usize, role: Role) -> f64 {
        self.0[k][role.index()].iter().enumerate().filter(|&(j, _)| j != k).map(|(_, g)| g).sum()
    }
}

/// SINR numerator and denominator of one decoding step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinrTerms {
    pub signal: f64,
    pub interference_plus_noise: f64,
}

impl SinrTerms {
    pub fn sinr(&self) -> f64 {
        if self.interference_plus_noise == 0.0 {
            if self.signal == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            self.signal / self.interference_plus_noise
        }
    }

    pub fn rate(&self) -> f64 {
        (1.0 + self.sinr()).log2()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterRates {
    /// RNU decoding the RFU signal.
    pub far_at_near: f64,
    pub near: f64,
    /// RFU decoding its own signal.
    pub far_at_far: f64,
    /// `min(far_at_near, far_at_far)`.
    pub far: f64,
    /// Set when some SINR had zero noise and zero interference.
    pub unbounded: bool,
}

/// SINR terms of the three decoding steps of cluster `k`.
pub fn sinr_terms(gains: &ChannelGains, k: usize, a: PowerSplit, noise: f64) -> [SinrTerms; 3] {
    let s_n = gains.signal(k, Role::Near);
    let s_f = gains.signal(k, Role::Far);
    let i_n = gains.inter_cluster(k, Role::Near);
    let i_f = gains.inter_cluster(k, Role::Far);
    [
        SinrTerms { signal: a.far * s_n, interference_plus_noise: a.near * s_n + i_n + noise },
        SinrTerms { signal: a.near * s_n, interference_plus_noise: i_n + noise },
        SinrTerms { signal: a.far * s_f, interference_plus_noise: a.near * s_f + i_f + noise },
    ]
}

pub fn rates_from_gains(gains: &ChannelGains, power: &[PowerSplit], noise: f64) -> Vec<ClusterRates> {
    power
        .iter()
        .enumerate()
        .map(|(k, &a)| {
            let [fn_, n, ff] = sinr_terms(gains, k, a, noise);
            let unbounded = [fn_, n, ff].iter().any(|t| t.sinr().is_infinite());
            let (far_at_near, near, far_at_far) = (fn_.rate(), n.rate(), ff.rate());
            ClusterRates { far_at_near, near, far_at_far, far: far_at_near.min(far_at_far), unbounded }
        })
        .collect()
}

/// Per-cluster rates, plus the largest relative gap between the direct
/// (vector) and trace (matrix) forms of the received powers when both exist.
#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub clusters: Vec<ClusterRates>,
    pub cross_form_gap: Option<f64>,
}

pub fn achievable_rates(channels: &ChannelSet, solution: &Solution, noise: f64) -> Result<RateReport> {
    if solution.power_coeffs.len() != channels.k_clusters() {
        return Err(invalid("one power split per cluster is required"));
    }
    let gamma_only = EffectiveMatrices {
        gamma: channels
            .g_ris_user
            .iter()
            .map(|pair| [diag_mul(&pair[0].conjugate(), &channels.g_bs_ris), diag_mul(&pair[1].conjugate(), &channels.g_bs_ris)])
            .collect(),
        upsilon: Vec::new(),
        h: None,
    };
    let h = gamma_only
        .gamma
        .iter()
        .map(|pair| pair.clone().map(|g| linalg::hermitian_part(&(g.adjoint() * &solution.passive_mat * g))))
        .collect();
    let eff = EffectiveMatrices { h: Some(h), ..gamma_only };
    let trace = ChannelGains::from_trace(&eff, &solution.active_mats);
    let gap = match (&solution.active_vecs, &solution.passive_vec) {
        (Some(w), Some(v)) => {
            let direct = ChannelGains::from_vectors(channels, v, w);
            let mut worst: f64 = 0.0;
            for (a, b) in direct.0.iter().flatten().flatten().zip(trace.0.iter().flatten().flatten()) {
                worst = worst.max((a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE));
            }
            Some(worst)
        }
        _ => None,
    };
    Ok(RateReport { clusters: rates_from_gains(&trace, &solution.power_coeffs, noise), cross_form_gap: gap })
}

/// `Tr[V Upsilon (sum_k W_k) Upsilon^H]` with `Upsilon = diag(probe^H) G`.
pub fn illumination_power(passive: &CMat, active: &[CMat], g_bs_ris: &CMat, probe: &CVec) -> Result<f64> {
    if probe.len() != g_bs_ris.nrows() {
        return Err(invalid("probe channel length must match the RIS size"));
    }
    let upsilon = diag_mul(&probe.conjugate(), g_bs_ris);
    beampattern_gain_trace(passive, &upsilon, active)
}

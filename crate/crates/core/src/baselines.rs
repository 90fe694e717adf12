//! Comparison schemes: fixed-direction beamforming (zero forcing towards the
//! near users, maximum-ratio transmission towards the far users) with
//! optimized beam powers and one power split shared by all clusters, the
//! orthogonal-access system without NOMA and the sensing-only system.
//!
//! Every scheme alternates an active block with the SRCR passive update under
//! the same improvement guard as the proposed algorithms.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::algorithms::{
    finish, noma_rows, orthogonal_rows, outer_entry, passive_step, qos_ok, start_phases, MAX_STARTS, rounded_beams, run_iao, run_ibcd, solve_active,
    Blocks, Instance, Phase, QosRow, RunTrace, SchemeOutput, TraceEntry, GUARD_SLACK,
};
use crate::conic::{Cmp, ConicProgram, LinExpr, SolveStatus};
use crate::error::{invalid, Error, Result};
use crate::geometry::Role;
use crate::linalg::{self, CMat, CVec};
use crate::metrics::{passive_mat_from_phases, PowerSplit, Solution};

/// Every scheme the simulator can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeId {
    Ibcd,
    Iao,
    BaselineZf,
    BaselineMrt,
    RisIsacNoNoma,
    RisSensing,
}

impl SchemeId {
    pub const ALL: [SchemeId; 6] = [Self::Ibcd, Self::Iao, Self::BaselineZf, Self::BaselineMrt, Self::RisIsacNoNoma, Self::RisSensing];

    pub fn name(self) -> &'static str {
        match self {
            Self::Ibcd => "ibcd",
            Self::Iao => "iao",
            Self::BaselineZf => "baseline_zf",
            Self::BaselineMrt => "baseline_mrt",
            Self::RisIsacNoNoma => "ris_isac_no_noma",
            Self::RisSensing => "ris_sensing",
        }
    }

    /// Whether the scheme serves users with NOMA clusters.
    pub fn uses_noma(self) -> bool {
        !matches!(self, Self::RisIsacNoNoma | Self::RisSensing)
    }
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|id| id.name() == s)
            .ok_or_else(|| invalid(format!("unknown scheme `{s}` (expected one of {})", Self::ALL.map(|i| i.name()).join(", "))))
    }
}

/// Runs `scheme` on one channel realization.
pub fn run_scheme(inst: &Instance, scheme: SchemeId, seed: u64) -> Result<SchemeOutput> {
    match scheme {
        SchemeId::Ibcd => run_ibcd(inst, seed),
        SchemeId::Iao => run_iao(inst, seed),
        SchemeId::BaselineZf => baseline_zf(inst, seed),
        SchemeId::BaselineMrt => baseline_mrt(inst, seed),
        SchemeId::RisIsacNoNoma => ris_isac_no_noma(inst, seed),
        SchemeId::RisSensing => ris_sensing(inst, seed),
    }
}

/// Combined channel `g_u^H Theta G` of a user as an N-vector `c`, so that
/// the received amplitude of beam `w` is `c^T w`.
pub fn combined_channel(inst: &Instance, phases: &CVec, cluster: usize, role: Role) -> CVec {
    inst.effective.gamma(cluster, role).transpose() * phases
}

/// Unit-norm zero-forcing directions: normalized columns of the
/// pseudo-inverse of the stacked near-user combined channels.
pub fn zf_directions(inst: &Instance, phases: &CVec) -> Result<Vec<CVec>> {
    let (k, n) = (inst.k(), inst.n());
    if k > n {
        return Err(Error::DegenerateChannel(format!("zero forcing needs K <= N, got K = {k}, N = {n}")));
    }
    let rows = CMat::from_fn(k, n, |r, c| combined_channel(inst, phases, r, Role::Near)[c]);
    let svd = rows.clone().svd(false, false);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smax > 0.0) || smin <= 1e-12 * smax {
        return Err(Error::DegenerateChannel("stacked near-user channels are rank deficient".into()));
    }
    // rows * pinv = I, with pinv = rows^H (rows rows^H)^-1
    let gram = &rows * rows.adjoint();
    let inv = gram.try_inverse().ok_or_else(|| Error::DegenerateChannel("singular near-user Gram matrix".into()))?;
    let pinv = rows.adjoint() * inv;
    Ok((0..k).map(|j| pinv.column(j).normalize()).collect())
}

/// Unit-norm maximum-ratio directions matched to the far users' combined
/// channels.
pub fn mrt_directions(inst: &Instance, phases: &CVec) -> Result<Vec<CVec>> {
    (0..inst.k())
        .map(|k| {
            let c = combined_channel(inst, phases, k, Role::Far);
            let norm = c.norm();
            if !(norm > 0.0) {
                return Err(Error::DegenerateChannel(format!("cluster {k} far user has a zero combined channel")));
            }
            Ok(c.conjugate().unscale(norm))
        })
        .collect()
}

/// Beam powers and the shared power split for fixed unit directions.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerLoading {
    pub powers: Vec<f64>,
    pub far_share: f64,
    pub objective: f64,
}

/// Number of uniformly spaced far-share values tried before refinement.
const SHARE_GRID: usize = 40;
/// Golden-section refinement steps around the best grid point.
const SHARE_REFINE: usize = 24;

/// Maximizes the minimum beampattern gain over beam powers `p_k >= 0` with
/// `sum p_k <= P_max` and one far-user share common to all clusters, under
/// the NOMA QoS constraints. For a fixed share the problem is a linear
/// program; the share is found by a grid scan refined by golden-section
/// search. Returns `None` when no share admits a feasible loading. Shares at
/// which the solver fails are skipped.
pub fn optimize_power_loading(inst: &Instance, passive: &CMat, dirs: &[CVec], rows_for: impl Fn(f64) -> Vec<QosRow>) -> Result<Option<PowerLoading>> {
    let lp = |share: f64| solve_loading_lp(inst, passive, dirs, &rows_for(share)).map(|r| r.map(|(p, obj)| PowerLoading { powers: p, far_share: share, objective: obj }));
    let mut best: Option<PowerLoading> = None;
    let step = 1.0 / (SHARE_GRID + 1) as f64;
    for i in 1..=SHARE_GRID {
        if let Some(c) = lp(i as f64 * step)? {
            if best.as_ref().is_none_or(|b| c.objective > b.objective) {
                best = Some(c);
            }
        }
    }
    let Some(mut best) = best else { return Ok(None) };
    let golden = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = ((best.far_share - step).max(step * 1e-3), (best.far_share + step).min(1.0 - step * 1e-3));
    let value = |c: &Option<PowerLoading>| c.as_ref().map_or(f64::NEG_INFINITY, |c| c.objective);
    let mut x1 = hi - golden * (hi - lo);
    let mut x2 = lo + golden * (hi - lo);
    let mut c1 = lp(x1)?;
    let mut c2 = lp(x2)?;
    for _ in 0..SHARE_REFINE {
        if value(&c1) >= value(&c2) {
            hi = x2;
            x2 = x1;
            c2 = c1;
            x1 = hi - golden * (hi - lo);
            c1 = lp(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            c1 = c2;
            x2 = lo + golden * (hi - lo);
            c2 = lp(x2)?;
        }
    }
    for c in [c1, c2].into_iter().flatten() {
        if c.objective > best.objective {
            best = c;
        }
    }
    Ok(Some(best))
}

/// Power-loading linear program for fixed directions and fixed QoS rows.
/// Returns the physical beam powers and the objective, or `None` when
/// infeasible.
fn solve_loading_lp(inst: &Instance, passive: &CMat, dirs: &[CVec], rows: &[QosRow]) -> Result<Option<(Vec<f64>, f64)>> {
    let p_max = inst.p_max;
    let forms = inst.beam_forms(passive);
    let h = inst.h_matrices(passive);
    // gain of unit-power beam j in each form
    let beam_gain: Vec<Vec<f64>> = forms.iter().map(|b| dirs.iter().map(|u| linalg::hermitian_form(b, u)).collect()).collect();
    let scale = beam_gain.iter().flatten().fold(0.0, |m: f64, &g| m.max(g)) * p_max;
    let scale = if scale > 0.0 { scale } else { 1.0 };

    let mut p = ConicProgram::new();
    let x: Vec<_> = (0..dirs.len()).map(|j| p.add_scalar(format!("x{j}"), Some(0.0), None)).collect();
    let chi = p.add_scalar("chi", Some(inst.config.algorithm.strict_margin), None);
    for (q, gains) in beam_gain.iter().enumerate() {
        let mut e = LinExpr::zero().plus_scalar(chi, -1.0);
        for (j, g) in gains.iter().enumerate() {
            e = e.plus_scalar(x[j], g * p_max / scale);
        }
        p.constrain(format!("beampattern{q}"), e, Cmp::Ge, 0.0);
    }
    let budget = x.iter().fold(LinExpr::zero(), |e, &xj| e.plus_scalar(xj, 1.0));
    p.constrain("power", budget, Cmp::Le, 1.0);
    for row in rows {
        let coef: Vec<(usize, f64)> = row.terms.iter().map(|t| (t.beam, t.coef * p_max * linalg::hermitian_form(&h[t.cluster][t.role.index()], &dirs[t.beam]))).collect();
        let bound = coef.iter().map(|(_, c)| c.abs()).fold(row.noise_coef * inst.noise, f64::max);
        let s = if bound > 0.0 { bound } else { 1.0 };
        let e = coef.iter().fold(LinExpr::zero(), |e, &(j, c)| e.plus_scalar(x[j], c / s));
        p.constrain(row.label.clone(), e, Cmp::Ge, row.noise_coef * inst.noise / s);
    }
    p.maximize(LinExpr::scalar(chi));
    let report = inst.backend.solve(&p)?;
    match report.status {
        SolveStatus::Optimal => {
            let powers = x.iter().map(|&xj| report.values.scalar(xj).max(0.0) * p_max).collect();
            Ok(Some((powers, report.values.scalar(chi) * scale)))
        }
        SolveStatus::Infeasible => Ok(None),
        SolveStatus::NumericalFailure => {
            log::debug!("power loading skipped: {}", report.raw_status);
            Ok(None)
        }
    }
}

/// Candidate value of the active block proposed by one scheme step.
struct Candidate {
    beams: Vec<CVec>,
    mats: Vec<CMat>,
    ratios: Vec<f64>,
    rel: f64,
    power: Vec<PowerSplit>,
    note: String,
}

type Proposal = std::result::Result<Candidate, String>;

/// Maps a solver outcome without a usable point to a rejected proposal.
fn unusable(what: &str, report: &crate::conic::SolveReport) -> Proposal {
    Err(match report.status {
        SolveStatus::Infeasible => format!("{what} infeasible"),
        _ => format!("{what}: {}", report.raw_status),
    })
}

/// Scheme-specific part of the alternating loop.
trait ActiveBlock {
    /// Proposes new active variables for the given phases, or the reason the
    /// step produced none (infeasible or a solver failure).
    fn propose(&self, inst: &Instance, phases: &CVec, passive: &CMat) -> Result<Proposal>;
    /// QoS rows of the scheme at the given power split and SINR floors.
    fn rows(&self, inst: &Instance, power: &[PowerSplit], r_near: f64, r_far: f64) -> Vec<QosRow>;
}

/// Random initial phases tried before a scheme is declared infeasible.
/// Initial phases at which the scheme's active block is feasible: the seed's
/// random phases, then fresh random draws up to [`MAX_STARTS`] in total.
fn feasible_start(inst: &Instance, seed: u64, block: &dyn ActiveBlock, from: usize, trace: &mut RunTrace) -> Result<(usize, CVec, Candidate)> {
    for attempt in from..MAX_STARTS {
        let phases = start_phases(inst.m(), seed, attempt);
        let passive = passive_mat_from_phases(&phases);
        match block.propose(inst, &phases, &passive)? {
            Ok(c) => return Ok((attempt, phases, c)),
            Err(reason) => {
                let mut e = TraceEntry::new(Phase::Active, 0, attempt);
                e.accepted = Some(false);
                e.note = Some(format!("initial phases rejected: {reason}"));
                trace.push(e);
            }
        }
    }
    Err(Error::InfeasibleScenario { delta: f64::NAN, reason: format!("active block infeasible at {MAX_STARTS} random initial phases") })
}

/// Alternates the scheme's active block with guarded SRCR passive updates
/// until the outer objective settles. When the first passive update is
/// rejected the loop is run once more from the next feasible random phases
/// and the better of the two results is returned.
fn alternate(inst: &Instance, seed: u64, block: &dyn ActiveBlock) -> Result<SchemeOutput> {
    let start = Instant::now();
    let (out, stuck_at) = alternate_from(inst, seed, block, 0, start)?;
    let Some(attempt) = stuck_at.filter(|a| a + 1 < MAX_STARTS) else { return Ok(out) };
    let retry = match alternate_from(inst, seed, block, attempt + 1, start) {
        Ok((retry, _)) => retry,
        Err(Error::InfeasibleScenario { .. }) => return Ok(out),
        Err(e) => return Err(e),
    };
    let (mut best, other) = if retry.objective > out.objective { (retry, out) } else { (out, retry) };
    let mut e = TraceEntry::new(Phase::Outer, 0, attempt + 1);
    e.note = Some(format!("first passive update rejected; restarted, kept objective {:.6e} over {:.6e}", best.objective, other.objective));
    best.trace.push(e);
    best.wall_time = start.elapsed().as_secs_f64();
    Ok(best)
}

/// One alternating run from the first feasible start at or after attempt
/// `from`. Also returns that attempt when the first passive update left the
/// phases unchanged.
fn alternate_from(inst: &Instance, seed: u64, block: &dyn ActiveBlock, from: usize, start: Instant) -> Result<(SchemeOutput, Option<usize>)> {
    let alg = &inst.config.algorithm;
    let mut trace = RunTrace::default();
    let (r_n, r_f) = inst.guarded_thresholds();
    let (attempt, phases, first) = feasible_start(inst, seed, block, from, &mut trace)?;
    let mut stuck = false;
    let mut first = Some(first);
    let mut blocks: Option<Blocks> = None;
    let mut prev_obj = f64::NAN;
    let mut is_converged = false;
    let mut outer = 0;
    for t in 1..=alg.outer_max_iter {
        outer = t;
        let iter_start = Instant::now();
        let (cur_phases, cur_passive) = match &blocks {
            Some(b) => (b.phases.clone(), b.passive.clone()),
            None => (phases.clone(), passive_mat_from_phases(&phases)),
        };

        let mut e = TraceEntry::new(Phase::Active, t, 0);
        let proposal = match first.take() {
            Some(c) => Ok(c),
            None => block.propose(inst, &cur_phases, &cur_passive)?,
        };
        match proposal {
            Ok(c) => {
                let exact = block.rows(inst, &c.power, inst.r_near, inst.r_far);
                let gain = inst.min_gain(&cur_passive, &c.mats);
                let ok = qos_ok(inst, &cur_passive, &c.mats, &exact);
                let accept = match &blocks {
                    None => ok,
                    Some(b) => ok && gain >= inst.min_gain(&b.passive, &b.mats) * (1.0 - GUARD_SLACK),
                };
                e.objective = Some(gain);
                e.accepted = Some(accept);
                e.eigen_ratios = c.ratios.clone();
                e.note = Some(c.note);
                trace.push(e);
                if accept {
                    blocks = Some(Blocks {
                        beams: c.beams,
                        mats: c.mats,
                        w_ratios: c.ratios,
                        w_rel_error: c.rel,
                        phases: cur_phases,
                        passive: cur_passive,
                        v_ratio: blocks.as_ref().map_or(f64::INFINITY, |b| b.v_ratio),
                        v_rel_error: blocks.as_ref().map_or(0.0, |b| b.v_rel_error),
                        power: c.power,
                    });
                } else if blocks.is_none() {
                    return Err(Error::NumericalFailure("active block of the first iteration violates QoS".into()));
                }
            }
            Err(reason) => {
                e.accepted = Some(false);
                e.note = Some(reason);
                trace.push(e);
            }
        }
        let b = blocks.as_mut().expect("the first active step is feasible");
        let rows = block.rows(inst, &b.power, r_n, r_f);
        let exact = block.rows(inst, &b.power, inst.r_near, inst.r_far);
        let before = b.phases.clone();
        passive_step(inst, b, rows, &exact, t, &mut trace)?;
        if t == 1 {
            stuck = b.phases == before;
        }

        let obj = inst.min_gain(&b.passive, &b.mats);
        trace.push(outer_entry(t, obj, b, iter_start));
        if t > 1 && crate::algorithms::converged(prev_obj, obj, alg.outer_tolerance) {
            is_converged = true;
            break;
        }
        prev_obj = obj;
    }
    let out = finish(inst, blocks.expect("at least one outer iteration"), trace, outer, is_converged, start)?;
    Ok((out, stuck.then_some(attempt)))
}

/// Fixed-direction beams with optimized powers and a shared power split.
struct FixedDirections {
    directions: fn(&Instance, &CVec) -> Result<Vec<CVec>>,
    label: &'static str,
}

impl ActiveBlock for FixedDirections {
    fn propose(&self, inst: &Instance, phases: &CVec, passive: &CMat) -> Result<Proposal> {
        let dirs = (self.directions)(inst, phases)?;
        let (r_n, r_f) = inst.guarded_thresholds();
        let k = inst.k();
        let loading = optimize_power_loading(inst, passive, &dirs, |share| noma_rows(k, &vec![PowerSplit::from_far(share); k], r_n, r_f))?;
        Ok(loading.ok_or_else(|| "no power split admits a feasible loading".to_string()).map(|l| {
            let beams: Vec<CVec> = dirs.iter().zip(&l.powers).map(|(u, &p)| u.scale(p.sqrt())).collect();
            let mats = beams.iter().map(linalg::outer).collect();
            Candidate {
                beams,
                mats,
                ratios: vec![f64::INFINITY; k],
                rel: 0.0,
                power: vec![PowerSplit::from_far(l.far_share); k],
                note: format!("{} directions, shared far share {:.6}", self.label, l.far_share),
            }
        }))
    }

    fn rows(&self, inst: &Instance, power: &[PowerSplit], r_near: f64, r_far: f64) -> Vec<QosRow> {
        noma_rows(inst.k(), power, r_near, r_far)
    }
}

/// One beam per user without NOMA, solved by semidefinite relaxation.
struct Orthogonal;

impl Orthogonal {
    fn floors(inst: &Instance, r_near: f64, r_far: f64) -> Vec<f64> {
        (0..2 * inst.k()).map(|u| if u % 2 == 0 { r_near } else { r_far }).collect()
    }
}

impl ActiveBlock for Orthogonal {
    fn propose(&self, inst: &Instance, _phases: &CVec, passive: &CMat) -> Result<Proposal> {
        let (r_n, r_f) = inst.guarded_thresholds();
        let rows = self.rows(inst, &[], r_n, r_f);
        let (relaxed, _, report) = solve_active(inst, passive, 2 * inst.k(), &rows)?;
        if report.status != SolveStatus::Optimal {
            return Ok(unusable("orthogonal beamforming", &report));
        }
        let (beams, mats, ratios, rel) = rounded_beams(&relaxed);
        Ok(Ok(Candidate { beams, mats, ratios, rel, power: Vec::new(), note: "orthogonal beams".into() }))
    }

    fn rows(&self, inst: &Instance, _power: &[PowerSplit], r_near: f64, r_far: f64) -> Vec<QosRow> {
        orthogonal_rows(2 * inst.k(), &Self::floors(inst, r_near, r_far))
    }
}

/// A single transmit covariance matrix with no communication constraints.
struct SensingOnly;

impl ActiveBlock for SensingOnly {
    fn propose(&self, inst: &Instance, _phases: &CVec, passive: &CMat) -> Result<Proposal> {
        let (relaxed, _, report) = solve_active(inst, passive, 1, &[])?;
        if report.status != SolveStatus::Optimal {
            return Ok(unusable("sensing covariance", &report));
        }
        let ratios = relaxed.iter().map(|r| crate::conic::extract_rank_one(r).ratio).collect();
        Ok(Ok(Candidate { beams: Vec::new(), mats: relaxed, ratios, rel: 0.0, power: Vec::new(), note: "sensing covariance".into() }))
    }

    fn rows(&self, _inst: &Instance, _power: &[PowerSplit], _r_near: f64, _r_far: f64) -> Vec<QosRow> {
        Vec::new()
    }
}

/// Zero-forcing directions towards the near users.
pub fn baseline_zf(inst: &Instance, seed: u64) -> Result<SchemeOutput> {
    alternate(inst, seed, &FixedDirections { directions: zf_directions, label: "zero-forcing" })
}

/// Maximum-ratio directions towards the far users.
pub fn baseline_mrt(inst: &Instance, seed: u64) -> Result<SchemeOutput> {
    alternate(inst, seed, &FixedDirections { directions: mrt_directions, label: "maximum-ratio" })
}

/// `2K` users served by their own beams without NOMA. The interference
/// term of user `u` sums the leakage of beam `u` into the other users'
/// channels.
pub fn ris_isac_no_noma(inst: &Instance, seed: u64) -> Result<SchemeOutput> {
    alternate(inst, seed, &Orthogonal)
}

/// Radar-only operation: beampattern maximization under the power budget.
pub fn ris_sensing(inst: &Instance, seed: u64) -> Result<SchemeOutput> {
    alternate(inst, seed, &SensingOnly)
}

/// Rates of the orthogonal users (`2K` entries ordered near, far per
/// cluster) for a solution of [`ris_isac_no_noma`].
pub fn orthogonal_rates(inst: &Instance, solution: &Solution) -> Result<Vec<f64>> {
    let n_users = 2 * inst.k();
    if solution.active_mats.len() != n_users {
        return Err(invalid(format!("expected {n_users} beams, got {}", solution.active_mats.len())));
    }
    let h = inst.h_matrices(&solution.passive_mat);
    let user = |u: usize| (u / 2, if u % 2 == 0 { Role::Near } else { Role::Far });
    Ok((0..n_users)
        .map(|u| {
            let w = &solution.active_mats[u];
            let (c, r) = user(u);
            let signal = linalg::trace_product_re(w, &h[c][r.index()]);
            let leak: f64 = (0..n_users).filter(|&i| i != u).map(|i| {
                let (ci, ri) = user(i);
                linalg::trace_product_re(w, &h[ci][ri.index()])
            }).sum();
            (1.0 + signal / (leak + inst.noise)).log2()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::random_phases;
    use crate::ScenarioConfig;

    fn small(k: usize, n: usize) -> Instance {
        let mut cfg = ScenarioConfig::default();
        cfg.k_clusters = k;
        cfg.n_antennas = n;
        cfg.m_elements = 4;
        Instance::realize(&cfg, 3).unwrap()
    }

    #[test]
    fn scheme_names_round_trip() {
        for id in SchemeId::ALL {
            assert_eq!(id.name().parse::<SchemeId>().unwrap(), id);
            assert_eq!(serde_json::to_string(&id).unwrap(), format!("\"{}\"", id.name()));
        }
        assert!("nope".parse::<SchemeId>().is_err());
    }

    #[test]
    fn zf_nulls_other_near_users() {
        let inst = small(2, 4);
        let phases = random_phases(4, 1);
        let dirs = zf_directions(&inst, &phases).unwrap();
        for (j, u) in dirs.iter().enumerate() {
            assert!((u.norm() - 1.0).abs() < 1e-12);
            let own = combined_channel(&inst, &phases, j, Role::Near).transpose() * u;
            for k in (0..2).filter(|&k| k != j) {
                let leak = combined_channel(&inst, &phases, k, Role::Near).transpose() * u;
                assert!(leak[0].norm() / own[0].norm() < 1e-8);
            }
        }
    }

    #[test]
    fn zf_single_cluster_is_matched_filter() {
        let inst = small(1, 3);
        let phases = random_phases(4, 2);
        let zf = &zf_directions(&inst, &phases).unwrap()[0];
        let c = combined_channel(&inst, &phases, 0, Role::Near);
        let mf = c.conjugate().normalize();
        let overlap = (zf.dotc(&mf)).norm();
        assert!((overlap - 1.0).abs() < 1e-10);
    }

    #[test]
    fn zf_rejects_overloaded_antennas() {
        let inst = small(3, 2);
        assert!(matches!(zf_directions(&inst, &random_phases(4, 0)), Err(Error::DegenerateChannel(_))));
    }

    #[test]
    fn mrt_maximizes_far_user_gain() {
        let inst = small(2, 4);
        let phases = random_phases(4, 5);
        let dirs = mrt_directions(&inst, &phases).unwrap();
        for (k, u) in dirs.iter().enumerate() {
            let c = combined_channel(&inst, &phases, k, Role::Far);
            let got = (c.transpose() * u)[0].norm();
            assert!((got - c.norm()).abs() <= 1e-12 * c.norm());
        }
    }
}

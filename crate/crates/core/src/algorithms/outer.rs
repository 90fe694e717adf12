//! The two alternating outer loops: IBCD (joint SCA step for beamformers and
//! power coefficients, then SRCR) and IAO (beamformer SDR, SRCR, closed-form
//! power allocation).
//!
//! Every block update is accepted only if it keeps all QoS constraints and
//! does not lower the minimum beampattern gain; otherwise the previous block
//! is kept and the rejection is recorded in the trace.

use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::joint::{find_feasible_init, solve_joint_sca, ScaState};
use super::passive::{solve_passive_srcr, PassiveQos};
use super::power::{closed_form_power, power_feasibility_bounds};
use super::qos::{noma_rows, QosRow};
use super::trace::{Phase, RunTrace, TraceEntry};
use super::{extract_beams, solve_active, Instance};
use crate::conic::SolveStatus;
use crate::error::{Error, Result};
use crate::geometry::Role;
use crate::linalg::{self, cis, CMat, CVec};
use crate::metrics::{passive_mat_from_phases, PowerSplit, Solution};
use crate::rng::{self, Stream};
use crate::serde_util::{inf_f64, inf_f64_vec};

/// Relative decrease of the objective tolerated by the improvement guard,
/// covering solver tolerance in otherwise monotone steps.
pub(crate) const GUARD_SLACK: f64 = 1e-9;

/// Result of one scheme run with its rank diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SchemeOutput {
    #[serde(skip)]
    pub solution: Option<Solution>,
    /// Minimum beampattern gain at the returned solution.
    pub objective: f64,
    /// Eigen-ratios of the relaxed beamforming matrices the returned beams
    /// were extracted from.
    #[serde(with = "inf_f64_vec")]
    pub w_ratios: Vec<f64>,
    /// Worst `||W - w w^H||_F / ||W||_F` over the relaxed matrices.
    pub w_rel_error: f64,
    /// Eigen-ratio of the final relaxed passive matrix.
    #[serde(with = "inf_f64")]
    pub v_ratio: f64,
    pub v_rel_error: f64,
    pub outer_iterations: usize,
    pub converged: bool,
    pub wall_time: f64,
    pub trace: RunTrace,
}

/// Number of random initial phase draws tried before a scheme gives up on
/// a channel realization.
pub const MAX_STARTS: usize = 20;

/// Random unit-modulus phases uniform on [0, 2 pi).
pub fn random_phases(m: usize, seed: u64) -> CVec {
    let mut rng = rng::stream(seed, Stream::PassiveInit);
    CVec::from_fn(m, |_, _| cis(rng.random::<f64>() * std::f64::consts::TAU))
}

/// Initial phases of start `attempt`: the seed's random phases first, then
/// independent draws from the restart stream.
pub fn start_phases(m: usize, seed: u64, attempt: usize) -> CVec {
    if attempt == 0 {
        return random_phases(m, seed);
    }
    let mut rng = rng::stream(seed, Stream::PassiveRestart { attempt });
    CVec::from_fn(m, |_, _| cis(rng.random::<f64>() * std::f64::consts::TAU))
}

/// First-iteration failure that a fresh start may avoid.
type StartFailure = Error;

/// Runs `body` from successive initial phases until its first block update
/// succeeds, recording every rejected start in the trace.
fn with_restarts(inst: &Instance, seed: u64, mut body: impl FnMut(CVec, RunTrace) -> Result<std::result::Result<SchemeOutput, (StartFailure, RunTrace)>>) -> Result<SchemeOutput> {
    let mut trace = RunTrace::default();
    let mut last_error = None;
    for attempt in 0..MAX_STARTS {
        match body(start_phases(inst.m(), seed, attempt), trace)? {
            Ok(out) => return Ok(out),
            Err((reason, mut t)) => {
                let mut e = TraceEntry::new(Phase::Outer, 0, attempt);
                e.accepted = Some(false);
                e.note = Some(format!("initial phases rejected: {reason}"));
                t.push(e);
                trace = t;
                last_error = Some(reason);
            }
        }
    }
    Err(last_error.unwrap_or_else(|| Error::NumericalFailure("no start attempted".into())))
}

/// Received power `|g_u^H Theta G w_j|^2` through the trace form.
pub(crate) fn received<'a>(h: &'a [[CMat; 2]], active: &'a [CMat]) -> impl Fn(usize, Role, usize) -> f64 + 'a {
    move |k, role, j| linalg::trace_product_re(&active[j], &h[k][role.index()])
}

/// Smallest relative QoS slack over `rows` (negative when violated),
/// expressed as the SINR shortfall divided by the noise term.
pub(crate) fn qos_ok(inst: &Instance, passive: &CMat, active: &[CMat], rows: &[QosRow]) -> bool {
    let h = inst.h_matrices(passive);
    let power = received(&h, active);
    rows.iter().all(|row| {
        let s = row.slack(inst.noise, &power);
        // allow a tiny violation relative to the constraint's own scale
        let scale = row.terms.iter().map(|t| (t.coef * power(t.cluster, t.role, t.beam)).abs()).sum::<f64>() + row.noise_coef * inst.noise;
        s >= -1e-9 * scale
    })
}

/// Accepted block values carried between outer iterations. `beams` is
/// empty when the active block is a general covariance matrix.
#[derive(Debug, Clone)]
pub(crate) struct Blocks {
    pub beams: Vec<CVec>,
    pub mats: Vec<CMat>,
    pub w_ratios: Vec<f64>,
    pub w_rel_error: f64,
    pub phases: CVec,
    pub passive: CMat,
    pub v_ratio: f64,
    pub v_rel_error: f64,
    pub power: Vec<PowerSplit>,
}

impl Blocks {
    pub fn solution(&self) -> Solution {
        Solution {
            active_mats: self.mats.clone(),
            active_vecs: (!self.beams.is_empty()).then(|| self.beams.clone()),
            power_coeffs: self.power.clone(),
            passive_mat: self.passive.clone(),
            passive_vec: Some(self.phases.clone()),
        }
    }
}

pub(crate) fn rounded_beams(relaxed: &[CMat]) -> (Vec<CVec>, Vec<CMat>, Vec<f64>, f64) {
    let (beams, ratios, rel) = extract_beams(relaxed);
    let mats = beams.iter().map(linalg::outer).collect();
    (beams, mats, ratios, rel)
}

pub(crate) fn outer_entry(outer: usize, objective: f64, b: &Blocks, start: Instant) -> TraceEntry {
    let mut e = TraceEntry::new(Phase::Outer, outer, outer);
    e.objective = Some(objective);
    e.eigen_ratios = b.w_ratios.iter().copied().chain(std::iter::once(b.v_ratio)).collect();
    e.wall_time = start.elapsed().as_secs_f64();
    e
}

/// SRCR step under the guarded QoS `rows`; the rounded phases are kept only
/// if they meet the unguarded `exact_rows` and do not lower the objective.
pub(crate) fn passive_step(inst: &Instance, b: &mut Blocks, rows: Vec<QosRow>, exact_rows: &[QosRow], outer: usize, trace: &mut RunTrace) -> Result<()> {
    let current = inst.min_gain(&b.passive, &b.mats);
    let out = match solve_passive_srcr(inst, &b.mats, &PassiveQos { rows }, &b.phases, outer) {
        Ok(out) => out,
        Err(Error::StalledRankReduction { rho }) => {
            let mut e = TraceEntry::new(Phase::Outer, outer, outer);
            e.accepted = Some(false);
            e.note = Some(format!("passive update stalled (rho {rho:.1e}); phases kept"));
            trace.push(e);
            return Ok(());
        }
        Err(e) => return Err(e),
    };
    trace.extend(out.trace.clone());
    let candidate = passive_mat_from_phases(&out.phases);
    let gain = inst.min_gain(&candidate, &b.mats);
    let accept = gain >= current * (1.0 - GUARD_SLACK) && qos_ok(inst, &candidate, &b.mats, exact_rows);
    let mut e = TraceEntry::new(Phase::Passive, outer, 0);
    e.objective = Some(gain);
    e.accepted = Some(accept);
    e.eigen_ratios = vec![out.eigen_ratio];
    e.note = Some(if accept { "rounded passive update accepted" } else { "rounded passive update rejected" }.into());
    trace.push(e);
    if accept {
        b.phases = out.phases;
        b.passive = candidate;
        b.v_ratio = out.eigen_ratio;
        b.v_rel_error = crate::conic::extract_rank_one(&out.relaxed).relative_error(&out.relaxed);
    }
    Ok(())
}

pub(crate) fn converged(prev: f64, now: f64, tol: f64) -> bool {
    (now - prev).abs() <= tol * prev.abs().max(f64::MIN_POSITIVE)
}

/// IBCD: joint SCA beamforming and power step alternated with SRCR. `seed`
/// drives the random initial phases and the random fixed points of the
/// feasibility search. A start whose first joint step cannot be rounded to
/// QoS-feasible beams is replaced by fresh random phases.
pub fn run_ibcd(inst: &Instance, seed: u64) -> Result<SchemeOutput> {
    let start = Instant::now();
    with_restarts(inst, seed, |phases, trace| ibcd_from(inst, seed, phases, trace, start))
}

fn ibcd_from(inst: &Instance, seed: u64, phases: CVec, mut trace: RunTrace, start: Instant) -> Result<std::result::Result<SchemeOutput, (StartFailure, RunTrace)>> {
    let alg = &inst.config.algorithm;
    let passive = passive_mat_from_phases(&phases);
    let (init, feas) = match find_feasible_init(inst, &passive, seed) {
        Ok(found) => found,
        Err(e @ Error::InfeasibleScenario { .. }) => return Ok(Err((e, trace))),
        Err(e) => return Err(e),
    };
    trace.extend(feas);
    let (r_n, r_f) = inst.guarded_thresholds();

    let mut sca = init;
    let mut blocks: Option<Blocks> = None;
    let mut prev_obj = f64::NAN;
    let mut is_converged = false;
    let mut outer = 0;
    for t in 1..=alg.outer_max_iter {
        outer = t;
        let iter_start = Instant::now();
        let cur_passive = blocks.as_ref().map_or(passive.clone(), |b| b.passive.clone());
        let cur_phases = blocks.as_ref().map_or(phases.clone(), |b| b.phases.clone());

        // joint beamforming and power step; fixed points re-tightened at new
        // phases can leave the subproblem without an interior, in which case
        // the feasibility search restarts them once
        let joint = match solve_joint_sca(inst, &cur_passive, &sca, t) {
            Err(err @ (Error::NumericalFailure(_) | Error::NeedsInitialization)) if blocks.is_some() => {
                let mut e = TraceEntry::new(Phase::Joint, t, 0);
                e.accepted = Some(false);
                e.note = Some(format!("joint step failed ({err}); restarting fixed points"));
                trace.push(e);
                find_feasible_init(inst, &cur_passive, seed).and_then(|(init, feas)| {
                    trace.extend(feas);
                    solve_joint_sca(inst, &cur_passive, &init, t)
                })
            }
            other => other,
        };
        match joint {
            Ok(joint) => {
                trace.extend(joint.trace.clone());
                let (beams, mats, ratios, rel) = rounded_beams(&joint.active_mats);
                let power: Vec<PowerSplit> = joint.a_near.iter().map(|&a| PowerSplit { near: a, far: 1.0 - a }).collect();
                let rows = noma_rows(inst.k(), &power, inst.r_near, inst.r_far);
                let gain = inst.min_gain(&cur_passive, &mats);
                let accept = match &blocks {
                    None => qos_ok(inst, &cur_passive, &mats, &rows),
                    Some(b) => gain >= inst.min_gain(&b.passive, &b.mats) * (1.0 - GUARD_SLACK) && qos_ok(inst, &cur_passive, &mats, &rows),
                };
                let mut e = TraceEntry::new(Phase::Joint, t, 0);
                e.objective = Some(gain);
                e.accepted = Some(accept);
                e.eigen_ratios = ratios.clone();
                e.note = Some(if accept { "rank-one beams accepted" } else { "rank-one beams rejected" }.into());
                trace.push(e);
                if accept {
                    blocks = Some(Blocks {
                        beams,
                        mats,
                        w_ratios: ratios,
                        w_rel_error: rel,
                        phases: cur_phases,
                        passive: cur_passive,
                        v_ratio: blocks.as_ref().map_or(f64::INFINITY, |b| b.v_ratio),
                        v_rel_error: blocks.as_ref().map_or(0.0, |b| b.v_rel_error),
                        power,
                    });
                } else if blocks.is_none() {
                    return Ok(Err((Error::NumericalFailure("rank-one beams from the first joint step violate QoS".into()), trace)));
                }
            }
            Err(err @ (Error::NumericalFailure(_) | Error::NeedsInitialization | Error::InfeasibleScenario { .. })) if blocks.is_some() => {
                let mut e = TraceEntry::new(Phase::Joint, t, 0);
                e.accepted = Some(false);
                e.note = Some(format!("joint step failed: {err}"));
                trace.push(e);
            }
            Err(e @ (Error::NumericalFailure(_) | Error::NeedsInitialization)) => return Ok(Err((e, trace))),
            Err(e) => return Err(e),
        }
        let b = blocks.as_mut().expect("first joint step accepted");

        // passive step
        let rows = noma_rows(inst.k(), &b.power, r_n, r_f);
        let exact = noma_rows(inst.k(), &b.power, inst.r_near, inst.r_far);
        passive_step(inst, b, rows, &exact, t, &mut trace)?;

        let obj = inst.min_gain(&b.passive, &b.mats);
        trace.push(outer_entry(t, obj, b, iter_start));
        let a_near: Vec<f64> = b.power.iter().map(|a| a.near).collect();
        sca = ScaState::tight_at(&inst.h_matrices(&b.passive), &b.mats, &a_near);
        if t > 1 && converged(prev_obj, obj, alg.outer_tolerance) {
            is_converged = true;
            break;
        }
        prev_obj = obj;
    }
    finish(inst, blocks.expect("at least one outer iteration"), trace, outer, is_converged, start).map(Ok)
}

pub(crate) fn finish(inst: &Instance, b: Blocks, trace: RunTrace, outer: usize, converged: bool, start: Instant) -> Result<SchemeOutput> {
    let solution = b.solution();
    Ok(SchemeOutput {
        objective: inst.min_gain(&solution.passive_mat, &solution.active_mats),
        solution: Some(solution),
        w_ratios: b.w_ratios,
        w_rel_error: b.w_rel_error,
        v_ratio: b.v_ratio,
        v_rel_error: b.v_rel_error,
        outer_iterations: outer,
        converged,
        wall_time: start.elapsed().as_secs_f64(),
        trace,
    })
}

/// IAO: beamformer SDR, SRCR and closed-form power allocation in turn.
/// Restarts from fresh random phases like [`run_ibcd`].
pub fn run_iao(inst: &Instance, seed: u64) -> Result<SchemeOutput> {
    let start = Instant::now();
    with_restarts(inst, seed, |phases, trace| iao_from(inst, phases, trace, start))
}

fn iao_from(inst: &Instance, phases: CVec, mut trace: RunTrace, start: Instant) -> Result<std::result::Result<SchemeOutput, (StartFailure, RunTrace)>> {
    let alg = &inst.config.algorithm;
    let (r_n, r_f) = inst.guarded_thresholds();
    let mut power = vec![PowerSplit::from_far(alg.iao_initial_far_share); inst.k()];
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

        // beamforming step
        let rows = noma_rows(inst.k(), &power, r_n, r_f);
        let (relaxed, _, report) = solve_active(inst, &cur_passive, inst.k(), &rows)?;
        let mut e = TraceEntry::new(Phase::Active, t, 0);
        e.wall_time = report.solve_time;
        if report.status != SolveStatus::Optimal {
            e.accepted = Some(false);
            e.note = Some(format!("beamforming step ended with {}", report.raw_status));
            trace.push(e);
            if blocks.is_none() {
                return Ok(Err((
                    match report.status {
                        SolveStatus::Infeasible => Error::InfeasibleScenario { delta: f64::NAN, reason: "beamforming problem infeasible for the initial power split".into() },
                        _ => Error::NumericalFailure(format!("beamforming step: {}", report.raw_status)),
                    },
                    trace,
                )));
            }
        } else {
            let (beams, mats, ratios, rel) = rounded_beams(&relaxed);
            let exact_rows = noma_rows(inst.k(), &power, inst.r_near, inst.r_far);
            let gain = inst.min_gain(&cur_passive, &mats);
            let ok = qos_ok(inst, &cur_passive, &mats, &exact_rows);
            let accept = match &blocks {
                None => ok,
                Some(b) => ok && gain >= inst.min_gain(&b.passive, &b.mats) * (1.0 - GUARD_SLACK),
            };
            e.objective = Some(gain);
            e.accepted = Some(accept);
            e.eigen_ratios = ratios.clone();
            trace.push(e);
            if accept {
                blocks = Some(Blocks {
                    beams,
                    mats,
                    w_ratios: ratios,
                    w_rel_error: rel,
                    phases: cur_phases,
                    passive: cur_passive,
                    v_ratio: blocks.as_ref().map_or(f64::INFINITY, |b| b.v_ratio),
                    v_rel_error: blocks.as_ref().map_or(0.0, |b| b.v_rel_error),
                    power: power.clone(),
                });
            } else if blocks.is_none() {
                return Ok(Err((Error::NumericalFailure("rank-one beams from the first beamforming step violate QoS".into()), trace)));
            }
        }
        let b = blocks.as_mut().expect("first beamforming step accepted");

        // passive step
        let exact = noma_rows(inst.k(), &b.power, inst.r_near, inst.r_far);
        passive_step(inst, b, noma_rows(inst.k(), &b.power, r_n, r_f), &exact, t, &mut trace)?;

        // power step
        let pstart = Instant::now();
        let h = inst.h_matrices(&b.passive);
        let bounds = power_feasibility_bounds(&h, &b.mats, r_n, r_f, inst.noise)?;
        let mut e = TraceEntry::new(Phase::Power, t, 0);
        match closed_form_power(&bounds) {
            Ok(new_power) => {
                b.power = new_power.clone();
                power = new_power;
                e.accepted = Some(true);
            }
            Err(err) => {
                e.accepted = Some(false);
                e.note = Some(format!("closed-form allocation skipped: {err}"));
            }
        }
        e.wall_time = pstart.elapsed().as_secs_f64();
        trace.push(e);

        let obj = inst.min_gain(&b.passive, &b.mats);
        trace.push(outer_entry(t, obj, b, iter_start));
        if t > 1 && converged(prev_obj, obj, alg.outer_tolerance) {
            is_converged = true;
            break;
        }
        prev_obj = obj;
    }
    finish(inst, blocks.expect("at least one outer iteration"), trace, outer, is_converged, start).map(Ok)
}

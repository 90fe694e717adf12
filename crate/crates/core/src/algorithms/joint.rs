//! Joint active beamforming and power allocation by successive convex
//! approximation, and the infeasibility-indicator search that provides its
//! starting fixed points.

use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::trace::{Phase, RunTrace, TraceEntry};
use super::{extract_beams, Instance, Normalization};
use crate::conic::{Cmp, ConicProgram, LinExpr, MatVar, ScalarVar, SolveStatus, Values};
use crate::error::{Error, Result};
use crate::geometry::Role;
use crate::linalg::{self, CMat};
use crate::rng::{self, Stream};

/// Fixed points of the Taylor and arithmetic-geometric-mean bounds, in
/// physical units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaState {
    /// AGM weight of the RNU's copy of the RFU constraint.
    pub beta1: Vec<f64>,
    /// AGM weight of the RFU constraint.
    pub beta2: Vec<f64>,
    /// Taylor expansion point of the slack `eta`.
    pub eta_tilde: Vec<f64>,
    /// Last slack values.
    pub eta: Vec<f64>,
}

impl ScaState {
    /// Fixed points that make both bounds tight at `(W, a_near)`.
    pub fn tight_at(h: &[[CMat; 2]], active: &[CMat], a_near: &[f64]) -> Self {
        let k = active.len();
        let mut s = Self { beta1: vec![0.0; k], beta2: vec![0.0; k], eta_tilde: vec![0.0; k], eta: vec![0.0; k] };
        for c in 0..k {
            let tn = linalg::trace_product_re(&active[c], &h[c][0]).max(0.0);
            let tf = linalg::trace_product_re(&active[c], &h[c][1]).max(0.0);
            s.beta1[c] = tn / a_near[c];
            s.beta2[c] = tf / a_near[c];
            s.eta[c] = (a_near[c] * tn).sqrt();
            s.eta_tilde[c] = s.eta[c];
        }
        s
    }
}

/// Variables of the joint subproblem.
#[derive(Debug, Clone)]
pub(crate) struct JointVars {
    pub w: Vec<MatVar>,
    pub a_near: Vec<ScalarVar>,
    pub eta: Vec<ScalarVar>,
    pub chi: ScalarVar,
    pub delta: Option<ScalarVar>,
}

/// Relative decrease of the infeasibility indicator below which the search
/// is considered stalled.
const STALL_TOLERANCE: f64 = 1e-6;

/// Smallest AGM weight used in normalized units, keeping the cone finite.
const MIN_BETA: f64 = 1e-9;

fn interference(norm: &Normalization, w: &[MatVar], k: usize, role: Role) -> LinExpr {
    let mut e = LinExpr::zero();
    for (j, &wj) in w.iter().enumerate() {
        if j != k {
            e = e.plus_trace(wj, norm.h_hat[k][role.index()].clone());
        }
    }
    e
}

fn build(inst: &Instance, norm: &Normalization, sca: &ScaState, feasibility: bool) -> (ConicProgram, JointVars) {
    let alg = &inst.config.algorithm;
    let margin = alg.strict_margin;
    let (r_n, r_f) = inst.guarded_thresholds();
    let kc = inst.k();
    let mut p = ConicProgram::new();
    let w: Vec<MatVar> = (0..kc).map(|k| p.add_matrix(format!("W{k}"), inst.n())).collect();
    let a_near: Vec<ScalarVar> = (0..kc).map(|k| p.add_scalar(format!("a_near{k}"), Some(margin), Some(1.0 - margin))).collect();
    let eta: Vec<ScalarVar> = (0..kc).map(|k| p.add_scalar(format!("eta{k}"), Some(margin), None)).collect();
    let chi = p.add_scalar("chi", Some(margin), None);
    let delta = feasibility.then(|| p.add_scalar("delta", Some(0.0), None));
    let pad = |e: LinExpr| match delta {
        Some(d) => e.plus_scalar(d, 1.0),
        None => e,
    };

    for (q, b) in norm.beam_hat.iter().enumerate() {
        let mut e = LinExpr::zero().plus_scalar(chi, -1.0);
        for &wk in &w {
            e = e.plus_trace(wk, b.clone());
        }
        p.constrain(format!("beampattern{q}"), pad(e), Cmp::Ge, 0.0);
    }
    let mut power = LinExpr::zero();
    for &wk in &w {
        power = power.plus_trace(wk, CMat::identity(inst.n(), inst.n()));
    }
    let power = match delta {
        Some(d) => power.plus_scalar(d, -1.0),
        None => power,
    };
    p.constrain("power", power, Cmp::Le, 1.0);

    for k in 0..kc {
        let hn = &norm.h_hat[k][0];
        let hf = &norm.h_hat[k][1];
        let cn = norm.comm[k][0];
        let cf = norm.comm[k][1];
        let tn = LinExpr::trace(w[k], hn.clone());
        let tf = LinExpr::trace(w[k], hf.clone());

        p.constrain_psd(format!("schur{k}"), 2, vec![LinExpr::scalar(a_near[k]), LinExpr::scalar(eta[k]), tn.clone()]);

        // eta~^2 + 2 eta~ (eta - eta~) >= r_n (I + sigma^2)
        let et = sca.eta_tilde[k] / cn.sqrt();
        let lhs = LinExpr::zero()
            .plus_scalar(eta[k], 2.0 * et)
            .plus_const(-et * et)
            .plus(interference(norm, &w, k, Role::Near).scaled(-r_n));
        p.constrain(format!("taylor{k}"), pad(lhs), Cmp::Ge, r_n * norm.noise_hat(inst.noise, k, Role::Near));

        for (label, role, t, beta, c) in [("agm_near", Role::Near, &tn, sca.beta1[k], cn), ("agm_far", Role::Far, &tf, sca.beta2[k], cf)] {
            let b = (beta / c).max(MIN_BETA);
            let rhs = t
                .clone()
                .plus(interference(norm, &w, k, role).scaled(-r_f))
                .plus_const(-r_f * norm.noise_hat(inst.noise, k, role))
                .scaled(1.0 / (r_f + 1.0));
            let xs = vec![LinExpr::scalar(a_near[k]).scaled((b / 2.0).sqrt()), t.clone().scaled(1.0 / (2.0 * b).sqrt())];
            p.constrain_sum_squares(format!("{label}{k}"), xs, pad(rhs));
        }
    }
    match delta {
        Some(d) => p.minimize(LinExpr::scalar(d)),
        None => p.maximize(LinExpr::scalar(chi)),
    }
    (p, JointVars { w, a_near, eta, chi, delta })
}

/// The convexified joint problem for fixed `V` (supplied through `H` and the
/// beampattern forms) and fixed SCA points. Returns the program in
/// normalized units.
pub fn build_joint_subproblem(inst: &Instance, passive: &CMat, sca: &ScaState) -> Result<ConicProgram> {
    let norm = Normalization::new(inst, &inst.h_matrices(passive), &inst.beam_forms(passive))?;
    Ok(build(inst, &norm, sca, false).0)
}

/// The infeasibility-indicator version of the joint problem.
pub fn build_feasibility_subproblem(inst: &Instance, passive: &CMat, sca: &ScaState) -> Result<ConicProgram> {
    let norm = Normalization::new(inst, &inst.h_matrices(passive), &inst.beam_forms(passive))?;
    Ok(build(inst, &norm, sca, true).0)
}

struct Iterate {
    w: Vec<CMat>,
    a_near: Vec<f64>,
    eta: Vec<f64>,
    chi: f64,
    delta: Option<f64>,
}

fn decode(norm: &Normalization, vars: &JointVars, values: &Values) -> Iterate {
    let w = vars.w.iter().map(|&x| values.matrix(x).scale(norm.p)).collect();
    let a_near = vars.a_near.iter().map(|&s| values.scalar(s)).collect();
    let eta = vars.eta.iter().enumerate().map(|(k, &s)| values.scalar(s) * norm.comm[k][0].sqrt()).collect();
    Iterate { w, a_near, eta, chi: values.scalar(vars.chi) * norm.beam, delta: vars.delta.map(|d| values.scalar(d)) }
}

/// Fixed-point update: `eta~ = eta`, `beta = Tr(W H) / a_near`.
fn update(h: &[[CMat; 2]], it: &Iterate) -> ScaState {
    let mut s = ScaState::tight_at(h, &it.w, &it.a_near);
    s.eta = it.eta.clone();
    s.eta_tilde = it.eta.clone();
    s
}

fn ratios(w: &[CMat]) -> Vec<f64> {
    extract_beams(w).1
}

/// Output of the joint SCA loop.
#[derive(Debug, Clone)]
pub struct JointOutcome {
    pub active_mats: Vec<CMat>,
    pub a_near: Vec<f64>,
    pub sca: ScaState,
    /// Final subproblem objective (minimum beampattern gain, physical units).
    pub objective: f64,
    pub iterations: usize,
    pub trace: RunTrace,
}

/// Repeatedly solves the convexified joint problem and refreshes
/// the fixed points until the objective settles.
pub fn solve_joint_sca(inst: &Instance, passive: &CMat, init: &ScaState, outer: usize) -> Result<JointOutcome> {
    let alg = &inst.config.algorithm;
    let h = inst.h_matrices(passive);
    let norm = Normalization::new(inst, &h, &inst.beam_forms(passive))?;
    let mut sca = init.clone();
    let mut trace = RunTrace::default();
    let mut best: Option<Iterate> = None;
    let mut iterations = 0;
    for t in 1..=alg.inner_max_iter {
        let start = Instant::now();
        let (program, vars) = build(inst, &norm, &sca, false);
        let report = inst.backend.solve(&program)?;
        let mut entry = TraceEntry::new(Phase::Joint, outer, t);
        entry.wall_time = start.elapsed().as_secs_f64();
        match report.status {
            SolveStatus::Optimal => {}
            status => {
                entry.accepted = Some(false);
                entry.note = Some(format!("solver status {}", report.raw_status));
                trace.push(entry);
                if best.is_none() {
                    return Err(if status == SolveStatus::Infeasible {
                        Error::NeedsInitialization
                    } else {
                        Error::NumericalFailure(format!("joint subproblem: {}", report.raw_status))
                    });
                }
                log::debug!("joint SCA stopped at iteration {t}: {}", report.raw_status);
                break;
            }
        }
        let it = decode(&norm, &vars, &report.values);
        entry.objective = Some(it.chi);
        entry.eigen_ratios = ratios(&it.w);
        entry.accepted = Some(true);
        trace.push(entry);
        iterations = t;
        let prev = best.as_ref().map(|b| b.chi);
        sca = update(&h, &it);
        best = Some(it);
        if let Some(prev) = prev {
            let now = best.as_ref().unwrap().chi;
            if (now - prev).abs() <= alg.inner_tolerance * prev.abs().max(f64::MIN_POSITIVE) {
                break;
            }
        }
    }
    let best = best.expect("at least one iteration succeeded");
    Ok(JointOutcome { objective: best.chi, active_mats: best.w, a_near: best.a_near, sca, iterations, trace })
}

/// Random positive fixed points used to start the feasibility search.
pub(crate) fn random_sca(k: usize, norm: &Normalization, seed: u64) -> ScaState {
    let mut rng = rng::stream(seed, Stream::FeasibilityInit);
    let mut s = ScaState { beta1: vec![0.0; k], beta2: vec![0.0; k], eta_tilde: vec![0.0; k], eta: vec![0.0; k] };
    for c in 0..k {
        // normalized draws in (0, 1], mapped to physical units
        s.beta1[c] = rng.random_range(0.05..1.0) * norm.comm[c][0];
        s.beta2[c] = rng.random_range(0.05..1.0) * norm.comm[c][1];
        s.eta_tilde[c] = rng.random_range(0.05..1.0) * norm.comm[c][0].sqrt();
        s.eta[c] = s.eta_tilde[c];
    }
    s
}

/// Drives the infeasibility indicator to zero from random fixed
/// points and returns fixed points from which the joint SCA loop can start.
pub fn find_feasible_init(inst: &Instance, passive: &CMat, seed: u64) -> Result<(ScaState, RunTrace)> {
    let alg = &inst.config.algorithm;
    let h = inst.h_matrices(passive);
    let norm = Normalization::new(inst, &h, &inst.beam_forms(passive))?;
    let mut sca = random_sca(inst.k(), &norm, seed);
    let mut trace = RunTrace::default();
    let mut last_delta = f64::INFINITY;
    for t in 1..=alg.feasibility_max_iter {
        let start = Instant::now();
        let (program, vars) = build(inst, &norm, &sca, true);
        let report = inst.backend.solve(&program)?;
        let mut entry = TraceEntry::new(Phase::Feasibility, 0, t);
        entry.wall_time = start.elapsed().as_secs_f64();
        if report.status != SolveStatus::Optimal {
            entry.note = Some(format!("solver status {}", report.raw_status));
            trace.push(entry);
            return Err(Error::InfeasibleScenario { delta: last_delta, reason: format!("feasibility subproblem ended with {}", report.raw_status) });
        }
        let it = decode(&norm, &vars, &report.values);
        let delta = it.delta.unwrap_or(0.0).max(0.0);
        entry.delta = Some(delta);
        entry.eigen_ratios = ratios(&it.w);
        trace.push(entry);
        sca = update(&h, &it);
        if delta < alg.feasibility_threshold {
            return Ok((sca, trace));
        }
        if last_delta.is_finite() && last_delta - delta <= STALL_TOLERANCE * last_delta {
            return Err(Error::InfeasibleScenario { delta, reason: format!("indicator stalled at {delta:.3e} after {t} iterations") });
        }
        last_delta = delta;
    }
    Err(Error::InfeasibleScenario { delta: last_delta, reason: format!("indicator still above {:.1e} after {} iterations", alg.feasibility_threshold, alg.feasibility_max_iter) })
}

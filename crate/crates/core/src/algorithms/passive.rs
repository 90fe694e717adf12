//! Passive beamforming by sequential rank-one constraint relaxation (SRCR).

use std::time::Instant;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::qos::QosRow;
use super::trace::{Phase, RunTrace, TraceEntry};
use super::Instance;
use crate::conic::{extract_rank_one, Cmp, ConicProgram, LinExpr, MatVar, ScalarVar, SolveStatus};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec};
use crate::metrics::{passive_mat_from_phases, phases_from_principal};

/// State of the rank-one relaxation loop.
#[derive(Debug, Clone, PartialEq)]
pub struct SrcrState {
    pub epsilon: f64,
    pub rho: f64,
    pub v_current: CMat,
}

/// QoS constraints that the passive matrix must respect, with the active
/// beamformers they refer to.
#[derive(Debug, Clone)]
pub struct PassiveQos {
    pub rows: Vec<QosRow>,
}

/// Output of the SRCR loop.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PassiveOutcome {
    /// Unit-modulus phases rounded from the final iterate.
    #[serde(skip)]
    pub phases: CVec,
    /// Final SDP iterate before rounding.
    #[serde(skip)]
    pub relaxed: CMat,
    /// `lambda_max / lambda_2` of the final iterate.
    #[serde(with = "crate::serde_util::inf_f64")]
    pub eigen_ratio: f64,
    /// `Tr(V) / lambda_max(V)` of the final iterate.
    pub trace_ratio: f64,
    /// Objective of the final accepted SDP.
    pub relaxed_objective: f64,
    pub iterations: usize,
    pub converged: bool,
    #[serde(skip)]
    pub trace: RunTrace,
}

struct PassiveVars {
    v: MatVar,
    chi: ScalarVar,
}

struct PassiveScales {
    beam: f64,
}

/// `Gamma_u W_j Gamma_u^H` for a term of a QoS row.
fn term_matrix(inst: &Instance, active: &[CMat], cluster: usize, role: crate::geometry::Role, beam: usize) -> CMat {
    let g = &inst.effective.gamma[cluster][role.index()];
    linalg::hermitian_part(&(g * &active[beam] * g.adjoint()))
}

fn build(inst: &Instance, active: &[CMat], qos: &PassiveQos, direction: Option<(&CVec, f64)>) -> (ConicProgram, PassiveVars, PassiveScales) {
    let m = inst.m();
    let margin = inst.config.algorithm.strict_margin;
    let mut p = ConicProgram::new();
    let v = p.add_matrix("V", m);
    let chi = p.add_scalar("chi", Some(margin), None);

    for i in 0..m {
        let mut e = CMat::zeros(m, m);
        e[(i, i)] = linalg::ONE;
        p.constrain(format!("unit_modulus{i}"), LinExpr::trace(v, e), Cmp::Eq, 1.0);
    }

    let n = inst.n();
    let sum = active.iter().fold(CMat::zeros(n, n), |acc, w| acc + w);
    let forms: Vec<CMat> = inst.effective.upsilon.iter().map(|u| linalg::hermitian_part(&(u * &sum * u.adjoint()))).collect();
    let lmax = forms.iter().map(linalg::lambda_max).fold(0.0, f64::max);
    let beam = if lmax > 0.0 { m as f64 * lmax } else { 1.0 };
    for (q, d) in forms.iter().enumerate() {
        p.constrain(format!("beampattern{q}"), LinExpr::trace(v, d.scale(1.0 / beam)).plus_scalar(chi, -1.0), Cmp::Ge, 0.0);
    }

    for row in &qos.rows {
        let mats: Vec<(f64, CMat)> = row.terms.iter().map(|t| (t.coef, term_matrix(inst, active, t.cluster, t.role, t.beam))).collect();
        let bound = mats.iter().map(|(c, a)| c.abs() * m as f64 * a.trace().re).fold(row.noise_coef * inst.noise, f64::max);
        let s = if bound > 0.0 { bound } else { 1.0 };
        let mut e = LinExpr::zero();
        for (c, a) in mats {
            e = e.plus_trace(v, a.scale(c / s));
        }
        p.constrain(row.label.clone(), e, Cmp::Ge, row.noise_coef * inst.noise / s);
    }

    if let Some((dir, eps)) = direction {
        // e^H V e >= eps Tr(V)
        let mut coeff = linalg::outer(dir);
        for i in 0..m {
            coeff[(i, i)] -= Complex64::new(eps, 0.0);
        }
        p.constrain("rank_relaxation", LinExpr::trace(v, coeff), Cmp::Ge, 0.0);
    }
    p.maximize(LinExpr::scalar(chi));
    (p, PassiveVars { v, chi }, PassiveScales { beam })
}

/// The SRCR subproblem for fixed active beamformers. `direction` is the
/// principal eigenvector of the current iterate with the relaxation
/// parameter; `None` gives the plain semidefinite relaxation.
pub fn build_passive_subproblem(inst: &Instance, active: &[CMat], qos: &PassiveQos, direction: Option<(&CVec, f64)>) -> ConicProgram {
    build(inst, active, qos, direction).0
}

fn unit_principal(v: &CMat) -> CVec {
    let (_, vecs) = linalg::eigh_desc(v);
    vecs.column(0).into_owned()
}

/// SRCR: tightens `e_max^H V e_max >= eps Tr(V)` until the iterate is
/// numerically rank one, then rounds it to unit-modulus phases.
pub fn solve_passive_srcr(inst: &Instance, active: &[CMat], qos: &PassiveQos, v_init: &CVec, outer: usize) -> Result<PassiveOutcome> {
    let alg = &inst.config.algorithm;
    let mut state = SrcrState { epsilon: 0.0, rho: alg.srcr_rho0, v_current: passive_mat_from_phases(v_init) };
    let mut trace = RunTrace::default();
    let mut accepted_any = false;
    let mut objective = f64::NAN;
    let mut prev_objective = f64::NAN;
    let mut converged = false;
    let mut iterations = 0;
    for t in 1..=alg.srcr_max_iter {
        iterations = t;
        let start = Instant::now();
        let dir = unit_principal(&state.v_current);
        let (program, vars, scales) = build(inst, active, qos, Some((&dir, state.epsilon)));
        let report = inst.backend.solve(&program)?;
        let mut entry = TraceEntry::new(Phase::Passive, outer, t);
        entry.epsilon = Some(state.epsilon);
        let solvable = report.status == SolveStatus::Optimal;
        if solvable {
            state.v_current = report.values.matrix(vars.v).clone();
            state.rho = alg.srcr_rho0;
            prev_objective = objective;
            objective = report.values.scalar(vars.chi) * scales.beam;
            accepted_any = true;
        } else {
            state.rho /= 2.0;
        }
        let lmax = linalg::lambda_max(&state.v_current);
        let tr = state.v_current.trace().re;
        let tried = state.epsilon;
        state.epsilon = (lmax / tr + state.rho).min(1.0);
        if !solvable {
            // While the halved step still saturates the relaxation parameter the
            // next program would be identical to the one just rejected, so
            // those halvings are applied without re-solving.
            let mut skipped = 0;
            while state.epsilon == tried && state.rho >= alg.srcr_rho_min {
                state.rho /= 2.0;
                state.epsilon = (lmax / tr + state.rho).min(1.0);
                skipped += 1;
            }
            if skipped > 0 {
                entry.note = Some(format!("{skipped} identical retries skipped"));
            }
        }
        entry.rho = Some(state.rho);
        entry.accepted = Some(solvable);
        entry.objective = solvable.then_some(objective);
        entry.eigen_ratios = vec![extract_rank_one(&state.v_current).ratio];
        entry.wall_time = start.elapsed().as_secs_f64();
        trace.push(entry);

        let rank_ok = tr / lmax < 1.0 + alg.srcr_rank_tolerance;
        let obj_ok = prev_objective.is_finite() && (objective - prev_objective).abs() <= alg.srcr_objective_tolerance * prev_objective.abs();
        if accepted_any && rank_ok && obj_ok {
            converged = true;
            break;
        }
        if state.rho < alg.srcr_rho_min {
            if !accepted_any {
                return Err(Error::StalledRankReduction { rho: alg.srcr_rho_min });
            }
            // no admissible step is left; the iterate is final
            converged = rank_ok;
            log::debug!("SRCR step size underflow (rank reached: {rank_ok})");
            break;
        }
    }
    if !accepted_any {
        return Err(Error::StalledRankReduction { rho: state.rho });
    }
    let rank = extract_rank_one(&state.v_current);
    let lmax = rank.lambda_max;
    Ok(PassiveOutcome {
        phases: phases_from_principal(&rank.vector),
        eigen_ratio: rank.ratio,
        trace_ratio: state.v_current.trace().re / lmax,
        relaxed: state.v_current,
        relaxed_objective: objective,
        iterations,
        converged,
        trace,
    })
}

//! Active beamforming by semidefinite relaxation for fixed power
//! coefficients (or for orthogonal users), with linear QoS constraints.

use super::qos::{noma_rows, QosRow};
use super::Instance;
use crate::conic::{Cmp, ConicProgram, LinExpr, MatVar, ScalarVar, SolveReport};
use crate::error::Result;
use crate::linalg::{self, CMat};
use crate::metrics::PowerSplit;

pub(crate) struct ActiveVars {
    pub w: Vec<MatVar>,
    pub chi: ScalarVar,
    pub beam_scale: f64,
    pub p: f64,
}

/// Maximizes the minimum beampattern gain over `n_beams` PSD matrices under
/// the power budget and the given QoS rows, in normalized units.
pub(crate) fn build_rows(inst: &Instance, passive: &CMat, n_beams: usize, rows: &[QosRow]) -> (ConicProgram, ActiveVars) {
    let n = inst.n();
    let p_max = inst.p_max;
    let margin = inst.config.algorithm.strict_margin;
    let h = inst.h_matrices(passive);
    let forms = inst.beam_forms(passive);
    let lmax = forms.iter().map(linalg::lambda_max).fold(0.0, f64::max);
    let beam_scale = if lmax > 0.0 { p_max * lmax } else { 1.0 };

    let mut p = ConicProgram::new();
    let w: Vec<MatVar> = (0..n_beams).map(|j| p.add_matrix(format!("W{j}"), n)).collect();
    let chi = p.add_scalar("chi", Some(margin), None);
    for (q, b) in forms.iter().enumerate() {
        let mut e = LinExpr::zero().plus_scalar(chi, -1.0);
        for &wj in &w {
            e = e.plus_trace(wj, b.scale(p_max / beam_scale));
        }
        p.constrain(format!("beampattern{q}"), e, Cmp::Ge, 0.0);
    }
    let mut power = LinExpr::zero();
    for &wj in &w {
        power = power.plus_trace(wj, CMat::identity(n, n));
    }
    p.constrain("power", power, Cmp::Le, 1.0);

    for row in rows {
        let bound = row
            .terms
            .iter()
            .map(|t| t.coef.abs() * p_max * linalg::lambda_max(&h[t.cluster][t.role.index()]))
            .fold(row.noise_coef * inst.noise, f64::max);
        let s = if bound > 0.0 { bound } else { 1.0 };
        let mut e = LinExpr::zero();
        for t in &row.terms {
            e = e.plus_trace(w[t.beam], h[t.cluster][t.role.index()].scale(t.coef * p_max / s));
        }
        p.constrain(row.label.clone(), e, Cmp::Ge, row.noise_coef * inst.noise / s);
    }
    p.maximize(LinExpr::scalar(chi));
    (p, ActiveVars { w, chi, beam_scale, p: p_max })
}

/// Semidefinite relaxation of the beamforming problem with fixed power
/// coefficients and passive matrix (normalized units).
pub fn build_active_subproblem(inst: &Instance, passive: &CMat, power: &[PowerSplit]) -> ConicProgram {
    let (r_n, r_f) = inst.guarded_thresholds();
    build_rows(inst, passive, inst.k(), &noma_rows(inst.k(), power, r_n, r_f)).0
}

/// Solves the relaxation over `n_beams` matrices and returns the physical
/// beamforming matrices, the objective and the solver report.
pub fn solve_active(inst: &Instance, passive: &CMat, n_beams: usize, rows: &[QosRow]) -> Result<(Vec<CMat>, f64, SolveReport)> {
    let (program, vars) = build_rows(inst, passive, n_beams, rows);
    let report = inst.backend.solve(&program)?;
    let w = vars.w.iter().map(|&x| report.values.matrix(x).scale(vars.p)).collect();
    let chi = report.values.scalar(vars.chi) * vars.beam_scale;
    Ok((w, chi, report))
}

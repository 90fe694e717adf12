use std::panic::AssertUnwindSafe;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::embed::{decode_embedded, embed_unchecked};
use super::program::{Cmp, ConicProgram, LinExpr, Sense, Values};
use crate::error::{Error, Result};

/// Installs a panic hook that drops the messages of solver panics, which
/// [`ClarabelBackend`] catches and reports as numerical failures. Panics
/// raised anywhere else still reach the previous hook. Idempotent.
pub fn silence_solver_panics() {
    static ONCE: std::sync::Once = std::sync::Once::new();
    ONCE.call_once(|| {
        let previous = std::panic::take_hook();
        std::panic::set_hook(Box::new(move |info| {
            if !info.location().is_some_and(|l| l.file().contains("clarabel")) {
                previous(info);
            }
        }));
    });
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    NumericalFailure,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub status: SolveStatus,
    /// Backend's own status label, kept for diagnostics.
    pub raw_status: String,
    pub objective: f64,
    pub values: Values,
    pub iterations: u32,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub solve_time: f64,
}

impl SolveReport {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    /// Converts a non-optimal report into an error.
    pub fn require_optimal(self) -> Result<Self> {
        match self.status {
            SolveStatus::Optimal => Ok(self),
            _ => Err(Error::NumericalFailure(format!(
                "solver ended with status {} after {} iterations (primal residual {:.2e}, dual residual {:.2e})",
                self.raw_status, self.iterations, self.primal_residual, self.dual_residual
            ))),
        }
    }
}

/// Interior-point backend able to solve a [`ConicProgram`].
pub trait ConicBackend: Send + Sync {
    fn solve(&self, program: &ConicProgram) -> Result<SolveReport>;
}

/// Clarabel interior-point solver.
#[derive(Debug, Clone)]
pub struct ClarabelBackend {
    pub tolerance: f64,
    pub max_iter: u32,
}

impl Default for ClarabelBackend {
    fn default() -> Self {
        Self { tolerance: 1e-8, max_iter: 200 }
    }
}

impl ClarabelBackend {
    pub fn new(tolerance: f64, max_iter: u32) -> Self {
        Self { tolerance, max_iter }
    }
}

/// Column layout: scalars first, then the upper triangle (column-major) of
/// each embedded `2n x 2n` matrix variable.
struct Layout {
    n_scalars: usize,
    offsets: Vec<usize>,
    dims: Vec<usize>,
    total: usize,
}

fn tri(n: usize) -> usize {
    n * (n + 1) / 2
}

impl Layout {
    fn new(p: &ConicProgram) -> Self {
        let n_scalars = p.scalars.len();
        let mut offsets = Vec::with_capacity(p.matrices.len());
        let mut dims = Vec::with_capacity(p.matrices.len());
        let mut at = n_scalars;
        for m in &p.matrices {
            offsets.push(at);
            dims.push(2 * m.dim);
            at += tri(2 * m.dim);
        }
        Self { n_scalars, offsets, dims, total: at }
    }

    /// Dense coefficient row of an expression, plus its constant.
    fn row(&self, e: &LinExpr) -> (Vec<(usize, f64)>, f64) {
        let mut out = Vec::new();
        for &(s, c) in &e.scalars {
            out.push((s.0, c));
        }
        for (x, a) in &e.traces {
            // Re Tr(A X) = Tr(embed(A) embed(X)) / 2 over the stored upper triangle
            let emb = embed_unchecked(a);
            let base = self.offsets[x.0];
            let d = self.dims[x.0];
            let mut k = base;
            for j in 0..d {
                for i in 0..=j {
                    let c = if i == j { 0.5 * emb[(i, j)] } else { emb[(i, j)] };
                    if c != 0.0 {
                        out.push((k, c));
                    }
                    k += 1;
                }
            }
        }
        (out, e.constant)
    }
}

struct Rows {
    i: Vec<usize>,
    j: Vec<usize>,
    v: Vec<f64>,
    b: Vec<f64>,
}

impl Rows {
    fn push(&mut self, coeffs: &[(usize, f64)], scale: f64, b: f64) {
        let r = self.b.len();
        for &(j, c) in coeffs {
            self.i.push(r);
            self.j.push(j);
            self.v.push(scale * c);
        }
        self.b.push(b);
    }
}

impl ConicBackend for ClarabelBackend {
    fn solve(&self, p: &ConicProgram) -> Result<SolveReport> {
        p.validate()?;
        let layout = Layout::new(p);
        let mut rows = Rows { i: Vec::new(), j: Vec::new(), v: Vec::new(), b: Vec::new() };
        let mut cones = Vec::new();

        // equalities: a x + c = rhs  ->  a x + s = rhs - c, s = 0
        let mut n_eq = 0;
        for c in p.linear.iter().filter(|c| c.cmp == Cmp::Eq) {
            let (a, k) = layout.row(&c.lhs);
            rows.push(&a, 1.0, c.rhs - k);
            n_eq += 1;
        }
        if n_eq > 0 {
            cones.push(SupportedConeT::ZeroConeT(n_eq));
        }

        // inequalities and bounds as a x + s = b, s >= 0
        let mut n_nn = 0;
        for c in p.linear.iter().filter(|c| c.cmp != Cmp::Eq) {
            let (a, k) = layout.row(&c.lhs);
            match c.cmp {
                Cmp::Le => rows.push(&a, 1.0, c.rhs - k),
                Cmp::Ge => rows.push(&a, -1.0, k - c.rhs),
                Cmp::Eq => unreachable!(),
            }
            n_nn += 1;
        }
        for (idx, s) in p.scalars.iter().enumerate() {
            if let Some(l) = s.lower {
                rows.push(&[(idx, -1.0)], 1.0, -l);
                n_nn += 1;
            }
            if let Some(u) = s.upper {
                rows.push(&[(idx, 1.0)], 1.0, u);
                n_nn += 1;
            }
        }
        if n_nn > 0 {
            cones.push(SupportedConeT::NonnegativeConeT(n_nn));
        }

        // second-order cones: s = (t, xs) = b - A x
        for soc in &p.socs {
            for e in std::iter::once(&soc.t).chain(soc.xs.iter()) {
                let (a, k) = layout.row(e);
                rows.push(&a, -1.0, k);
            }
            cones.push(SupportedConeT::SecondOrderConeT(soc.xs.len() + 1));
        }

        // small PSD blocks of affine entries, scaled upper triangle
        let sqrt2 = std::f64::consts::SQRT_2;
        for blk in &p.psd_blocks {
            let mut k = 0;
            for j in 0..blk.dim {
                for i in 0..=j {
                    let scale = if i == j { 1.0 } else { sqrt2 };
                    let (a, c) = layout.row(&blk.entries[k]);
                    rows.push(&a, -scale, scale * c);
                    k += 1;
                }
            }
            cones.push(SupportedConeT::PSDTriangleConeT(blk.dim));
        }

        // matrix variables themselves
        for (m, &d) in layout.dims.iter().enumerate() {
            let mut k = layout.offsets[m];
            for j in 0..d {
                for i in 0..=j {
                    let scale = if i == j { 1.0 } else { sqrt2 };
                    rows.push(&[(k, 1.0)], -scale, 0.0);
                    k += 1;
                }
            }
            cones.push(SupportedConeT::PSDTriangleConeT(d));
        }

        let (obj, obj_const) = layout.row(&p.objective);
        let sign = if p.sense == Sense::Maximize { -1.0 } else { 1.0 };
        let mut q = vec![0.0; layout.total];
        for (j, c) in obj {
            q[j] += sign * c;
        }

        let m = rows.b.len();
        let a = CscMatrix::new_from_triplets(m, layout.total, rows.i, rows.j, rows.v);
        let pmat = CscMatrix::zeros((layout.total, layout.total));
        let settings = DefaultSettingsBuilder::default()
            .verbose(false)
            .max_iter(self.max_iter)
            .tol_gap_abs(self.tolerance)
            .tol_gap_rel(self.tolerance)
            .tol_feas(self.tolerance)
            .direct_solve_method("faer".to_owned())
            .max_threads(1)
            .build()
            .map_err(|e| Error::NumericalFailure(format!("solver settings: {e}")))?;
        let mut solver = DefaultSolver::new(&pmat, &q, &a, &rows.b, &cones, settings)
            .map_err(|e| Error::NumericalFailure(format!("solver setup: {e}")))?;
        // the solver's internal eigensolver can abort on badly conditioned
        // iterates; that is reported as a numerical failure of this solve
        let panicked = std::panic::catch_unwind(AssertUnwindSafe(|| solver.solve())).err().map(|e| {
            e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default()
        });
        let sol = &solver.solution;

        let status = match (sol.status, &panicked) {
            (_, Some(_)) => SolveStatus::NumericalFailure,
            (SolverStatus::Solved, None) => SolveStatus::Optimal,
            (SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible, None) => SolveStatus::Infeasible,
            _ => SolveStatus::NumericalFailure,
        };
        let scalars = sol.x[..layout.n_scalars].to_vec();
        let matrices = layout
            .offsets
            .iter()
            .zip(&layout.dims)
            .map(|(&off, &d)| {
                let mut x = DMatrix::zeros(d, d);
                let mut k = off;
                for j in 0..d {
                    for i in 0..=j {
                        x[(i, j)] = sol.x[k];
                        x[(j, i)] = sol.x[k];
                        k += 1;
                    }
                }
                decode_embedded(&x)
            })
            .collect();
        let values = Values { matrices, scalars };
        let objective = p.objective.eval(&values);
        debug_assert!(obj_const == p.objective.constant);
        Ok(SolveReport {
            status,
            raw_status: panicked.map_or_else(|| format!("{:?}", sol.status), |msg| format!("aborted: {msg}")),
            objective,
            values,
            iterations: sol.iterations,
            primal_residual: sol.r_prim,
            dual_residual: sol.r_dual,
            solve_time: sol.solve_time,
        })
    }
}

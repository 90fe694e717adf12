use std::fmt;

use crate::error::{invalid, Result};
use crate::linalg::{self, is_hermitian, CMat};

/// Handle to a Hermitian PSD matrix variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MatVar(pub(crate) usize);

/// Handle to a real scalar variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ScalarVar(pub(crate) usize);

/// `constant + sum_j c_j s_j + sum_j Re Tr(A_j X_j)`.
#[derive(Debug, Clone, Default)]
pub struct LinExpr {
    pub constant: f64,
    pub scalars: Vec<(ScalarVar, f64)>,
    pub traces: Vec<(MatVar, CMat)>,
}

impl LinExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self { constant: c, ..Self::default() }
    }

    pub fn scalar(s: ScalarVar) -> Self {
        Self::zero().plus_scalar(s, 1.0)
    }

    pub fn trace(x: MatVar, coeff: CMat) -> Self {
        Self::zero().plus_trace(x, coeff)
    }

    pub fn plus_const(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    pub fn plus_scalar(mut self, s: ScalarVar, c: f64) -> Self {
        self.scalars.push((s, c));
        self
    }

    pub fn plus_trace(mut self, x: MatVar, coeff: CMat) -> Self {
        self.traces.push((x, coeff));
        self
    }

    pub fn plus(mut self, other: LinExpr) -> Self {
        self.constant += other.constant;
        self.scalars.extend(other.scalars);
        self.traces.extend(other.traces);
        self
    }

    pub fn scaled(mut self, f: f64) -> Self {
        self.constant *= f;
        self.scalars.iter_mut().for_each(|(_, c)| *c *= f);
        self.traces.iter_mut().for_each(|(_, a)| *a *= num_complex::Complex64::new(f, 0.0));
        self
    }

    pub fn eval(&self, values: &Values) -> f64 {
        let s: f64 = self.scalars.iter().map(|&(v, c)| c * values.scalars[v.0]).sum();
        let t: f64 = self.traces.iter().map(|(v, a)| linalg::trace_product_re(a, &values.matrices[v.0])).sum();
        self.constant + s + t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmp {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Maximize,
    Minimize,
}

#[derive(Debug, Clone)]
pub(crate) struct MatrixDecl {
    pub name: String,
    pub dim: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct ScalarDecl {
    pub name: String,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct Linear {
    pub label: String,
    pub lhs: LinExpr,
    pub cmp: Cmp,
    pub rhs: f64,
}

/// Small real symmetric matrix of affine expressions constrained PSD.
/// `entries` holds the upper triangle in column-major order.
#[derive(Debug, Clone)]
pub(crate) struct PsdBlock {
    pub label: String,
    pub dim: usize,
    pub entries: Vec<LinExpr>,
}

/// `|| xs || <= t`.
#[derive(Debug, Clone)]
pub(crate) struct Soc {
    pub label: String,
    pub t: LinExpr,
    pub xs: Vec<LinExpr>,
}

/// Trace-affine semidefinite program over Hermitian PSD matrix variables and
/// bounded real scalars.
#[derive(Debug, Clone)]
pub struct ConicProgram {
    pub(crate) matrices: Vec<MatrixDecl>,
    pub(crate) scalars: Vec<ScalarDecl>,
    pub(crate) linear: Vec<Linear>,
    pub(crate) psd_blocks: Vec<PsdBlock>,
    pub(crate) socs: Vec<Soc>,
    pub(crate) sense: Sense,
    pub(crate) objective: LinExpr,
}

impl Default for ConicProgram {
    fn default() -> Self {
        Self::new()
    }
}

impl ConicProgram {
    pub fn new() -> Self {
        Self {
            matrices: Vec::new(),
            scalars: Vec::new(),
            linear: Vec::new(),
            psd_blocks: Vec::new(),
            socs: Vec::new(),
            sense: Sense::Minimize,
            objective: LinExpr::zero(),
        }
    }

    pub fn add_matrix(&mut self, name: impl Into<String>, dim: usize) -> MatVar {
        self.matrices.push(MatrixDecl { name: name.into(), dim });
        MatVar(self.matrices.len() - 1)
    }

    pub fn add_scalar(&mut self, name: impl Into<String>, lower: Option<f64>, upper: Option<f64>) -> ScalarVar {
        self.scalars.push(ScalarDecl { name: name.into(), lower, upper });
        ScalarVar(self.scalars.len() - 1)
    }

    pub fn constrain(&mut self, label: impl Into<String>, lhs: LinExpr, cmp: Cmp, rhs: f64) {
        self.linear.push(Linear { label: label.into(), lhs, cmp, rhs });
    }

    /// Constrains the symmetric matrix with the given upper-triangle entries
    /// (column-major) to be positive semidefinite.
    pub fn constrain_psd(&mut self, label: impl Into<String>, dim: usize, upper: Vec<LinExpr>) {
        assert_eq!(upper.len(), dim * (dim + 1) / 2, "upper triangle size mismatch");
        self.psd_blocks.push(PsdBlock { label: label.into(), dim, entries: upper });
    }

    /// `|| xs || <= t`.
    pub fn constrain_norm(&mut self, label: impl Into<String>, xs: Vec<LinExpr>, t: LinExpr) {
        self.socs.push(Soc { label: label.into(), t, xs });
    }

    /// `sum_i xs_i^2 <= r`, written as a rotated second-order cone.
    pub fn constrain_sum_squares(&mut self, label: impl Into<String>, xs: Vec<LinExpr>, r: LinExpr) {
        let mut parts: Vec<LinExpr> = xs.into_iter().collect();
        parts.push(r.clone().plus_const(-1.0).scaled(0.5));
        self.constrain_norm(label, parts, r.plus_const(1.0).scaled(0.5));
    }

    pub fn maximize(&mut self, objective: LinExpr) {
        self.sense = Sense::Maximize;
        self.objective = objective;
    }

    pub fn minimize(&mut self, objective: LinExpr) {
        self.sense = Sense::Minimize;
        self.objective = objective;
    }

    pub fn matrix_dim(&self, x: MatVar) -> usize {
        self.matrices[x.0].dim
    }

    pub fn n_matrices(&self) -> usize {
        self.matrices.len()
    }

    pub fn n_scalars(&self) -> usize {
        self.scalars.len()
    }

    /// Number of constraints, excluding variable cones and scalar bounds.
    pub fn constraint_count(&self) -> usize {
        self.linear.len() + self.psd_blocks.len() + self.socs.len()
    }

    pub fn constraint_labels(&self) -> Vec<&str> {
        self.linear
            .iter()
            .map(|c| c.label.as_str())
            .chain(self.psd_blocks.iter().map(|c| c.label.as_str()))
            .chain(self.socs.iter().map(|c| c.label.as_str()))
            .collect()
    }

    fn exprs(&self) -> impl Iterator<Item = &LinExpr> {
        self.linear
            .iter()
            .map(|c| &c.lhs)
            .chain(self.psd_blocks.iter().flat_map(|b| b.entries.iter()))
            .chain(self.socs.iter().flat_map(|s| std::iter::once(&s.t).chain(s.xs.iter())))
            .chain(std::iter::once(&self.objective))
    }

    /// Checks that every coefficient matrix is Hermitian and sized to its variable.
    pub fn validate(&self) -> Result<()> {
        for e in self.exprs() {
            for (v, a) in &e.traces {
                let decl = self.matrices.get(v.0).ok_or_else(|| invalid("unknown matrix variable"))?;
                if a.nrows() != decl.dim || a.ncols() != decl.dim {
                    return Err(invalid(format!("coefficient of `{}` has the wrong size", decl.name)));
                }
                if !is_hermitian(a, 1e-9 * a.norm().max(1.0)) {
                    return Err(invalid(format!("coefficient of `{}` is not Hermitian", decl.name)));
                }
            }
            if e.scalars.iter().any(|(s, _)| s.0 >= self.scalars.len()) {
                return Err(invalid("unknown scalar variable"));
            }
        }
        Ok(())
    }

    /// Largest violation of any constraint or bound at `values` (0 when feasible).
    pub fn max_violation(&self, values: &Values) -> f64 {
        let mut worst: f64 = 0.0;
        for c in &self.linear {
            let d = c.lhs.eval(values) - c.rhs;
            worst = worst.max(match c.cmp {
                Cmp::Le => d,
                Cmp::Ge => -d,
                Cmp::Eq => d.abs(),
            });
        }
        for (i, s) in self.scalars.iter().enumerate() {
            let x = values.scalars[i];
            if let Some(l) = s.lower {
                worst = worst.max(l - x);
            }
            if let Some(u) = s.upper {
                worst = worst.max(x - u);
            }
        }
        for b in &self.psd_blocks {
            let m = b.eval(values);
            worst = worst.max(-m.symmetric_eigen().eigenvalues.min());
        }
        for s in &self.socs {
            let norm = s.xs.iter().map(|x| x.eval(values).powi(2)).sum::<f64>().sqrt();
            worst = worst.max(norm - s.t.eval(values));
        }
        for m in &values.matrices {
            worst = worst.max(-linalg::lambda_min(m));
        }
        worst
    }
}

impl PsdBlock {
    pub(crate) fn eval(&self, values: &Values) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.dim, self.dim);
        let mut k = 0;
        for j in 0..self.dim {
            for i in 0..=j {
                let v = self.entries[k].eval(values);
                m[(i, j)] = v;
                m[(j, i)] = v;
                k += 1;
            }
        }
        m
    }
}

/// Values of all program variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Values {
    pub matrices: Vec<CMat>,
    pub scalars: Vec<f64>,
}

impl Values {
    pub fn matrix(&self, x: MatVar) -> &CMat {
        &self.matrices[x.0]
    }

    pub fn scalar(&self, s: ScalarVar) -> f64 {
        self.scalars[s.0]
    }
}

fn write_expr(f: &mut fmt::Formatter<'_>, p: &ConicProgram, e: &LinExpr) -> fmt::Result {
    write!(f, "{:e}", e.constant)?;
    for (s, c) in &e.scalars {
        write!(f, " + {:e}*{}", c, p.scalars[s.0].name)?;
    }
    for (x, a) in &e.traces {
        write!(f, " + tr(<{}x{} coeff, |A|={:e}> {})", a.nrows(), a.ncols(), a.norm(), p.matrices[x.0].name)?;
    }
    Ok(())
}

/// Self-describing text dump: variables, constraints and objective.
impl fmt::Display for ConicProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "# conic program")?;
        writeln!(f, "[variables]")?;
        for m in &self.matrices {
            writeln!(f, "hermitian_psd {} {}", m.name, m.dim)?;
        }
        for s in &self.scalars {
            let lo = s.lower.map_or("-inf".to_string(), |v| format!("{v:e}"));
            let hi = s.upper.map_or("inf".to_string(), |v| format!("{v:e}"));
            writeln!(f, "scalar {} [{lo}, {hi}]", s.name)?;
        }
        writeln!(f, "[constraints]")?;
        for c in &self.linear {
            write!(f, "{}: ", c.label)?;
            write_expr(f, self, &c.lhs)?;
            let op = match c.cmp {
                Cmp::Le => "<=",
                Cmp::Ge => ">=",
                Cmp::Eq => "==",
            };
            writeln!(f, " {op} {:e}", c.rhs)?;
        }
        for b in &self.psd_blocks {
            writeln!(f, "{}: psd block of size {}", b.label, b.dim)?;
            for e in &b.entries {
                write!(f, "  ")?;
                write_expr(f, self, e)?;
                writeln!(f)?;
            }
        }
        for s in &self.socs {
            write!(f, "{}: norm of {} terms <= ", s.label, s.xs.len())?;
            write_expr(f, self, &s.t)?;
            writeln!(f)?;
        }
        writeln!(f, "[objective]")?;
        write!(f, "{} ", if self.sense == Sense::Maximize { "maximize" } else { "minimize" })?;
        write_expr(f, self, &self.objective)?;
        writeln!(f)
    }
}

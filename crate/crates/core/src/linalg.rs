//! Small dense complex linear-algebra helpers shared by every module.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

pub fn cis(phase: f64) -> Complex64 {
    Complex64::from_polar(1.0, phase)
}

/// Frobenius norm of `m - m^H`.
pub fn hermitian_defect(m: &CMat) -> f64 {
    (m - m.adjoint()).norm()
}

/// True when `m` is square and Hermitian to within `tol` relative to its norm.
pub fn is_hermitian(m: &CMat, tol: f64) -> bool {
    m.is_square() && hermitian_defect(m) <= tol * m.norm().max(1.0)
}

pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()).scale(0.5)
}

pub fn outer(v: &CVec) -> CMat {
    v * v.adjoint()
}

/// `Re Tr(a b)`, without forming the product.
pub fn trace_product_re(a: &CMat, b: &CMat) -> f64 {
    debug_assert_eq!(a.ncols(), b.nrows());
    debug_assert_eq!(a.nrows(), b.ncols());
    let mut acc = 0.0;
    for i in 0..a.nrows() {
        for l in 0..a.ncols() {
            acc += (a[(i, l)] * b[(l, i)]).re;
        }
    }
    acc
}

/// Full `Tr(a b)` as a complex number.
pub fn trace_product(a: &CMat, b: &CMat) -> Complex64 {
    let mut acc = ZERO;
    for i in 0..a.nrows() {
        for l in 0..a.ncols() {
            acc += a[(i, l)] * b[(l, i)];
        }
    }
    acc
}

/// `diag(d) * m`.
pub fn diag_mul(d: &CVec, m: &CMat) -> CMat {
    let mut out = m.clone();
    for (i, mut row) in out.row_iter_mut().enumerate() {
        row *= d[i];
    }
    out
}

/// Eigen-decomposition of a Hermitian matrix with eigenvalues sorted descending.
pub fn eigh_desc(m: &CMat) -> (Vec<f64>, CMat) {
    let eig = SymmetricEigen::new(hermitian_part(m));
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

pub fn lambda_max(m: &CMat) -> f64 {
    eigh_desc(m).0.first().copied().unwrap_or(0.0)
}

pub fn lambda_min(m: &CMat) -> f64 {
    eigh_desc(m).0.last().copied().unwrap_or(0.0)
}

/// Real part of a Hermitian quadratic form `x^H a x`, checking the imaginary residue.
pub fn hermitian_form(a: &CMat, x: &CVec) -> f64 {
    (x.adjoint() * a * x)[(0, 0)].re
}

/// Drops the imaginary residue of a value that should be real. `scale` is the
/// magnitude the residue is judged against.
pub fn real_part_checked(z: Complex64, scale: f64) -> f64 {
    debug_assert!(
        z.im.abs() <= 1e-10 * scale.max(z.re.abs()) + f64::MIN_POSITIVE,
        "imaginary residue {} too large for {}",
        z.im,
        z.re
    );
    z.re
}

use nalgebra::DMatrix;

use crate::error::{invalid, Result};
use crate::linalg::{is_hermitian, CMat};
use num_complex::Complex64;

/// Real symmetric embedding `[[Re h, -Im h], [Im h, Re h]]` of a Hermitian matrix.
///
/// The embedding has every eigenvalue of `h` twice, so it preserves
/// semidefiniteness, and `Tr(embed(a) embed(x)) = 2 Re Tr(a x)`.
pub fn embed_hermitian(h: &CMat) -> Result<DMatrix<f64>> {
    if !h.is_square() || !is_hermitian(h, 1e-10) {
        return Err(invalid("embedding requires a Hermitian matrix"));
    }
    Ok(embed_unchecked(h))
}

pub(crate) fn embed_unchecked(h: &CMat) -> DMatrix<f64> {
    let n = h.nrows();
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    for j in 0..n {
        for i in 0..n {
            let z = h[(i, j)];
            out[(i, j)] = z.re;
            out[(i + n, j + n)] = z.re;
            out[(i, j + n)] = -z.im;
            out[(i + n, j)] = z.im;
        }
    }
    out
}

/// Recovers a Hermitian matrix from a real symmetric `2n x 2n` matrix,
/// averaging the two copies of the real and imaginary blocks.
pub fn decode_embedded(x: &DMatrix<f64>) -> CMat {
    let n = x.nrows() / 2;
    let mut out = CMat::from_fn(n, n, |i, j| {
        let re = 0.5 * (x[(i, j)] + x[(i + n, j + n)]);
        let im = 0.5 * (x[(i + n, j)] - x[(i, j + n)]);
        Complex64::new(re, im)
    });
    // symmetrize away floating-point residue
    let adj = out.adjoint();
    out = (out + adj).scale(0.5);
    out
}

//! Rank-one extraction and eigen-ratio diagnostics.

use crate::linalg::{eigh_desc, CMat, CVec};

/// Eigenvalues at or below this are treated as zero when forming ratios.
pub const ZERO_EIGENVALUE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct RankOne {
    /// `sqrt(lambda_max) e_max`.
    pub vector: CVec,
    /// `lambda_max / lambda_2`, infinite when `lambda_2 <= 1e-12`.
    pub ratio: f64,
    /// `|| X - v v^H ||_F`.
    pub reconstruction_error: f64,
    pub lambda_max: f64,
    pub lambda_2: f64,
}

impl RankOne {
    pub fn relative_error(&self, x: &CMat) -> f64 {
        let n = x.norm();
        if n == 0.0 {
            0.0
        } else {
            self.reconstruction_error / n
        }
    }
}

/// Principal component of a Hermitian PSD matrix.
pub fn extract_rank_one(x: &CMat) -> RankOne {
    let (vals, vecs) = eigh_desc(x);
    let lambda_max = vals.first().copied().unwrap_or(0.0).max(0.0);
    let lambda_2 = vals.get(1).copied().unwrap_or(0.0);
    let vector = if vecs.ncols() > 0 { vecs.column(0).into_owned() * num_complex::Complex64::new(lambda_max.sqrt(), 0.0) } else { CVec::zeros(0) };
    let ratio = eigen_ratio(lambda_max, lambda_2);
    let reconstruction_error = (x - &vector * vector.adjoint()).norm();
    RankOne { vector, ratio, reconstruction_error, lambda_max, lambda_2 }
}

pub fn eigen_ratio(lambda_max: f64, lambda_2: f64) -> f64 {
    if lambda_2 <= ZERO_EIGENVALUE {
        f64::INFINITY
    } else {
        lambda_max / lambda_2
    }
}

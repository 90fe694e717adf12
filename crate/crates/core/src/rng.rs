//! Named, seedable random streams. Every consumer of randomness draws from its
//! own ChaCha stream so that adding a draw in one place never perturbs another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::linalg::{CMat, CVec};
use num_complex::Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Positions,
    BsRisChannel,
    RisUserChannel { cluster: usize, far: bool },
    PassiveInit,
    FeasibilityInit,
    /// Fresh initial phases after `attempt` infeasible starts.
    PassiveRestart { attempt: usize },
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::Positions => 1,
            Stream::BsRisChannel => 2,
            Stream::PassiveInit => 3,
            Stream::FeasibilityInit => 4,
            Stream::RisUserChannel { cluster, far } => 1024 + 2 * cluster as u64 + far as u64,
            Stream::PassiveRestart { attempt } => 1 << 20 | attempt as u64,
        }
    }
}

pub fn stream(seed: u64, which: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which.id());
    rng
}

/// One draw of a circularly-symmetric complex Gaussian with unit variance.
pub fn complex_normal<R: rand::Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn complex_normal_vec<R: rand::Rng + ?Sized>(rng: &mut R, n: usize) -> CVec {
    CVec::from_fn(n, |_, _| complex_normal(rng))
}

pub fn complex_normal_mat<R: rand::Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMat {
    // column-major fill keeps the draw order independent of nalgebra internals
    let mut m = CMat::zeros(rows, cols);
    for c in 0..cols {
        for r in 0..rows {
            m[(r, c)] = complex_normal(rng);
        }
    }
    m
}

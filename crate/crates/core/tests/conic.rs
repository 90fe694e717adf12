//! Conic layer: real embedding, solver round trips against eigenvalue
//! oracles, and rank-one extraction.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use risnoma::conic::{decode_embedded, embed_hermitian, extract_rank_one, ClarabelBackend, Cmp, ConicBackend, ConicProgram, LinExpr, SolveStatus};

type CMat = DMatrix<Complex64>;

fn random_hermitian(seed: u64, n: usize) -> CMat {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = CMat::from_fn(n, n, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    (&a + a.adjoint()).scale(0.5)
}

fn random_psd(seed: u64, n: usize) -> CMat {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = CMat::from_fn(n, n, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    &a * a.adjoint()
}

fn eigenvalues(h: &CMat) -> Vec<f64> {
    let mut v: Vec<f64> = h.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn embedding_preserves_psd_and_round_trips(seed in any::<u64>(), n in 1usize..6) {
        let h = random_psd(seed, n);
        let e = embed_hermitian(&h).unwrap();
        prop_assert_eq!(e.nrows(), 2 * n);
        let min = e.clone().symmetric_eigen().eigenvalues.min();
        prop_assert!(min >= -1e-10 * h.norm().max(1.0));
        prop_assert!((decode_embedded(&e) - &h).norm() < 1e-9);
    }

    #[test]
    fn embedded_trace_is_twice_the_real_trace(s1 in any::<u64>(), s2 in any::<u64>(), n in 1usize..6) {
        let a = random_hermitian(s1, n);
        let b = random_hermitian(s2, n);
        let lhs = (embed_hermitian(&a).unwrap() * embed_hermitian(&b).unwrap()).trace();
        let rhs = 2.0 * (&a * &b).trace().re;
        prop_assert!((lhs - rhs).abs() < 1e-10 * (1.0 + rhs.abs()));
    }

    #[test]
    fn embedding_doubles_each_eigenvalue(seed in any::<u64>(), n in 1usize..5) {
        let h = random_hermitian(seed, n);
        let complex = eigenvalues(&h);
        let e = embed_hermitian(&h).unwrap();
        let mut real: Vec<f64> = e.symmetric_eigen().eigenvalues.iter().copied().collect();
        real.sort_by(f64::total_cmp);
        for (i, l) in complex.iter().enumerate() {
            prop_assert!((real[2 * i] - l).abs() < 1e-9 && (real[2 * i + 1] - l).abs() < 1e-9);
        }
    }
}

#[test]
fn maximizing_a_hermitian_form_over_unit_trace_gives_its_top_eigenvalue() {
    for seed in 0..10 {
        let c = random_hermitian(seed, 3);
        let mut p = ConicProgram::new();
        let x = p.add_matrix("X", 3);
        p.constrain("trace", LinExpr::trace(x, CMat::identity(3, 3)), Cmp::Eq, 1.0);
        p.maximize(LinExpr::trace(x, c.clone()));
        let r = ClarabelBackend::default().solve(&p).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        let top = *eigenvalues(&c).last().unwrap();
        assert!((r.objective - top).abs() < 1e-6, "seed {seed}: {} vs {top}", r.objective);
        // the maximizer is the top eigenvector's projector
        let rank = extract_rank_one(r.values.matrix(x));
        assert!(rank.ratio > 1e6);
        assert!(p.max_violation(&r.values) < 1e-7);
    }
}

#[test]
fn minimizing_matches_negated_maximization() {
    let c = random_hermitian(42, 4);
    let build = |maximize: bool| {
        let mut p = ConicProgram::new();
        let x = p.add_matrix("X", 4);
        p.constrain("trace", LinExpr::trace(x, CMat::identity(4, 4)), Cmp::Le, 2.0);
        if maximize {
            p.maximize(LinExpr::trace(x, c.scale(-1.0)));
        } else {
            p.minimize(LinExpr::trace(x, c.clone()));
        }
        ClarabelBackend::default().solve(&p).unwrap().objective
    };
    let lowest = eigenvalues(&c)[0].min(0.0) * 2.0;
    assert!((build(false) - lowest).abs() < 1e-6);
    assert!((build(true) + lowest).abs() < 1e-6);
}

#[test]
fn identical_programs_solve_identically() {
    let c = random_hermitian(7, 3);
    let mut p = ConicProgram::new();
    let x = p.add_matrix("X", 3);
    let t = p.add_scalar("t", Some(0.0), Some(4.0));
    p.constrain("budget", LinExpr::trace(x, CMat::identity(3, 3)).plus_scalar(t, 1.0), Cmp::Le, 3.0);
    p.maximize(LinExpr::trace(x, c).plus_scalar(t, 0.5));
    let a = ClarabelBackend::default().solve(&p).unwrap();
    let b = ClarabelBackend::default().solve(&p).unwrap();
    assert_eq!(a.objective.to_bits(), b.objective.to_bits());
    assert_eq!(a.values.matrices, b.values.matrices);
    assert_eq!(a.values.scalars, b.values.scalars);
}

#[test]
fn rank_one_extraction_of_outer_product() {
    let u = DVector::from_vec(vec![Complex64::new(0.3, -1.0), Complex64::new(2.0, 0.5)]);
    let x = &u * u.adjoint();
    let r = extract_rank_one(&x);
    assert!(r.ratio.is_infinite());
    assert!(r.reconstruction_error < 1e-10);
    assert!((r.vector.norm() - u.norm()).abs() < 1e-10);
}

#[test]
fn rank_one_extraction_of_diag_two_one() {
    let x = CMat::from_diagonal(&DVector::from_vec(vec![Complex64::new(2.0, 0.0), Complex64::new(1.0, 0.0)]));
    let r = extract_rank_one(&x);
    assert!((r.ratio - 2.0).abs() < 1e-12);
    assert!((r.vector[0].norm() - 2f64.sqrt()).abs() < 1e-12);
    assert!(r.vector[1].norm() < 1e-12);
}

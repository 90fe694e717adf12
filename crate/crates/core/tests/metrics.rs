//! Cross-form and edge-case checks of the communication and sensing metrics.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use risnoma::geometry::{ChannelSet, Role};
use risnoma::metrics::{
    achievable_rates, beampattern_gain_direct, beampattern_gain_trace, build_effective_matrices, build_sensing_spec, illumination_power, passive_mat_from_phases, rates_from_gains, sinr_terms,
    ChannelGains, PowerSplit, Solution,
};

type CVec = DVector<Complex64>;
type CMat = DMatrix<Complex64>;

fn gaussian(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
}

struct Random {
    channels: ChannelSet,
    phases: CVec,
    beams: Vec<CVec>,
}

fn random_instance(seed: u64, n: usize, m: usize, k: usize) -> Random {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g_bs_ris = CMat::from_fn(m, n, |_, _| gaussian(&mut rng));
    let g_ris_user = (0..k).map(|_| [CVec::from_fn(m, |_, _| gaussian(&mut rng)), CVec::from_fn(m, |_, _| gaussian(&mut rng))]).collect();
    let phases = CVec::from_fn(m, |_, _| Complex64::from_polar(1.0, rng.random::<f64>() * std::f64::consts::TAU));
    let beams = (0..k).map(|_| CVec::from_fn(n, |_, _| gaussian(&mut rng))).collect();
    Random { channels: ChannelSet { g_bs_ris, g_ris_user }, phases, beams }
}

/// `|sum_m conj(u_m) v_m (G w)_m|^2`, evaluated element by element.
fn cascaded_power(u: &CVec, phases: &CVec, g: &CMat, w: &CVec) -> f64 {
    let gw = g * w;
    (0..u.len()).map(|i| u[i].conj() * phases[i] * gw[i]).sum::<Complex64>().norm_sqr()
}

fn steering(theta_deg: f64, m: usize) -> CVec {
    CVec::from_fn(m, |p, _| Complex64::from_polar(1.0, std::f64::consts::PI * p as f64 * theta_deg.to_radians().sin()))
}

fn outer(v: &CVec) -> CMat {
    v * v.adjoint()
}

fn rel_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn beampattern_direct_and_trace_forms_agree(seed in any::<u64>(), theta in -90.0f64..90.0) {
        let r = random_instance(seed, 3, 4, 2);
        let g = &r.channels.g_bs_ris;
        let direct = beampattern_gain_direct(&r.phases, g, &r.beams, theta, 0.5).unwrap();
        let a = steering(theta, 4);
        let upsilon = CMat::from_fn(4, 3, |i, j| a[i].conj() * g[(i, j)]);
        let mats: Vec<CMat> = r.beams.iter().map(outer).collect();
        let trace = beampattern_gain_trace(&passive_mat_from_phases(&r.phases), &upsilon, &mats).unwrap();
        let oracle: f64 = r.beams.iter().map(|w| cascaded_power(&a, &r.phases, g, w)).sum();
        prop_assert!(rel_gap(direct, trace) < 1e-8);
        prop_assert!(rel_gap(direct, oracle) < 1e-8);
    }

    #[test]
    fn received_powers_direct_and_trace_forms_agree(seed in any::<u64>()) {
        let r = random_instance(seed, 3, 4, 2);
        let spec = build_sensing_spec(&[0.0], 6.0, 1.8).unwrap();
        let passive = passive_mat_from_phases(&r.phases);
        let eff = build_effective_matrices(&r.channels, &spec, 0.5, Some(&passive)).unwrap();
        let mats: Vec<CMat> = r.beams.iter().map(outer).collect();
        let trace = ChannelGains::from_trace(&eff, &mats);
        let direct = ChannelGains::from_vectors(&r.channels, &r.phases, &r.beams);
        for k in 0..2 {
            for role in Role::BOTH {
                for j in 0..2 {
                    let oracle = cascaded_power(&r.channels.g_ris_user[k][role.index()], &r.phases, &r.channels.g_bs_ris, &r.beams[j]);
                    prop_assert!(rel_gap(trace.0[k][role.index()][j], oracle) < 1e-8);
                    prop_assert!(rel_gap(direct.0[k][role.index()][j], oracle) < 1e-8);
                }
            }
        }
    }

    #[test]
    fn far_rate_is_the_smaller_decoding_rate(seed in any::<u64>(), far in 0.01f64..0.99, noise in 1e-3f64..10.0) {
        let r = random_instance(seed, 2, 3, 2);
        let gains = ChannelGains::from_vectors(&r.channels, &r.phases, &r.beams);
        let power = vec![PowerSplit::from_far(far); 2];
        for c in rates_from_gains(&gains, &power, noise) {
            prop_assert!(c.far <= c.far_at_near && c.far <= c.far_at_far);
            prop_assert!(c.far == c.far_at_near.min(c.far_at_far));
        }
    }

    #[test]
    fn larger_far_share_helps_far_and_hurts_near(seed in any::<u64>(), lo in 0.01f64..0.5, step in 0.01f64..0.49) {
        let r = random_instance(seed, 2, 3, 2);
        let gains = ChannelGains::from_vectors(&r.channels, &r.phases, &r.beams);
        let a = sinr_terms(&gains, 0, PowerSplit::from_far(lo), 0.1);
        let b = sinr_terms(&gains, 0, PowerSplit::from_far(lo + step), 0.1);
        prop_assert!(b[2].signal >= a[2].signal);
        prop_assert!(b[1].signal <= a[1].signal);
    }
}

#[test]
fn hundred_random_rank_one_solutions_report_tiny_cross_form_gap() {
    for seed in 0..100 {
        let r = random_instance(seed, 3, 4, 2);
        let sol = Solution::from_vectors(r.beams.clone(), vec![PowerSplit::from_far(0.7); 2], r.phases.clone());
        let report = achievable_rates(&r.channels, &sol, 0.05).unwrap();
        assert!(report.cross_form_gap.unwrap() < 1e-8, "seed {seed}: gap {:?}", report.cross_form_gap);
    }
}

#[test]
fn unit_snr_near_user_gets_one_bit() {
    // one cluster, scalar channels with |g^H Theta G w|^2 = 1
    let one = CVec::from_element(1, Complex64::new(1.0, 0.0));
    let channels = ChannelSet { g_bs_ris: CMat::from_element(1, 1, Complex64::new(1.0, 0.0)), g_ris_user: vec![[one.clone(), one.clone()]] };
    let sol = Solution::from_vectors(vec![one.clone()], vec![PowerSplit { near: 0.5, far: 0.5 }], one.clone());
    let report = achievable_rates(&channels, &sol, 0.5).unwrap();
    assert!((report.clusters[0].near - 1.0).abs() < 1e-12);
}

#[test]
fn all_power_to_near_user_gives_far_user_nothing_at_the_near_receiver() {
    let r = random_instance(3, 2, 3, 1);
    let gains = ChannelGains::from_vectors(&r.channels, &r.phases, &r.beams);
    let rates = rates_from_gains(&gains, &[PowerSplit { near: 1.0, far: 0.0 }], 0.1);
    assert_eq!(rates[0].far_at_near, 0.0);
}

#[test]
fn probe_along_steering_vector_reproduces_beampattern() {
    let r = random_instance(11, 3, 4, 2);
    let passive = passive_mat_from_phases(&r.phases);
    let mats: Vec<CMat> = r.beams.iter().map(outer).collect();
    let gain = 0.3;
    let probe = steering(30.0, 4) * Complex64::new(gain, 0.0);
    let lit = illumination_power(&passive, &mats, &r.channels.g_bs_ris, &probe).unwrap();
    let beam = beampattern_gain_direct(&r.phases, &r.channels.g_bs_ris, &r.beams, 30.0, 0.5).unwrap();
    assert!(rel_gap(lit, beam * gain * gain) < 1e-10);
}

#[test]
fn reference_sensing_grid_and_interest_set() {
    let spec = build_sensing_spec(&[-45.0, 0.0, 45.0], 6.0, 1.8).unwrap();
    assert_eq!(spec.angle_grid.len(), 101);
    // oracle: enumerate the grid directly
    let expected: Vec<usize> = (0..101).filter(|&i| {
        let theta = -90.0 + 1.8 * i as f64;
        [-45.0f64, 0.0, 45.0].iter().any(|t| (theta - t).abs() <= 3.0 + 1e-9)
    }).collect();
    assert_eq!(spec.interest_set, expected);
    for (i, &m) in spec.desired_mask.iter().enumerate() {
        assert_eq!(m == 1, expected.contains(&i));
    }
}

#[test]
fn narrow_single_target_interest_set() {
    let spec = build_sensing_spec(&[0.0], 3.6, 1.8).unwrap();
    let angles = spec.interest_angles();
    assert_eq!(angles.len(), 3);
    for (a, e) in angles.iter().zip([-1.8, 0.0, 1.8]) {
        assert!((a - e).abs() < 1e-9);
    }
    assert!(build_sensing_spec(&[1.0], 0.5, 1.8).is_err());
    assert!(build_sensing_spec(&[0.0], 0.0, 1.8).is_err());
}

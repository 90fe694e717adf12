//! Acceptance suite. Runs without the libtest harness and prints one
//! PASS/FAIL line per criterion; exits non-zero if any criterion fails.
//!
//! Expected values come from independent oracles written here: element-wise
//! sums for the cascaded channel, direct SINR formulas, grid searches and
//! exhaustive enumeration. Trend checks run at desk scale (N = 4, M = 8,
//! K = 2, ten seeds) and compare medians over seeds where both schemes
//! succeeded.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};
use std::path::Path;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use risnoma::algorithms::{closed_form_power, power_feasibility_bounds, qos_rate_thresholds, run_ibcd, Instance};
use risnoma::baselines::{orthogonal_rates, SchemeId};
use risnoma::geometry::ChannelSet;
use risnoma::harness::{emit, illumination_rows, run_sweep, target_illumination, write_csv, EmitKind, ExperimentResult, RunRecord, Sweep, SweepOptions, SweepParam, SweepPlan};
use risnoma::metrics::{
    achievable_rates, beampattern_gain_direct, beampattern_gain_trace, build_effective_matrices, build_sensing_spec, passive_mat_from_phases, sinr_terms, ChannelGains,
    PowerSplit, Solution,
};
use risnoma::ScenarioConfig;

type CVec = DVector<Complex64>;
type CMat = DMatrix<Complex64>;

const SEEDS: u64 = 10;
/// Relative slack of every trend comparison.
const TREND_SLACK: f64 = 0.01;

struct Verdict {
    id: usize,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn report(verdicts: &mut Vec<Verdict>, id: usize, name: &'static str, pass: bool, detail: String) {
    println!("[{}] {id:>2} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    verdicts.push(Verdict { id, name, pass, detail });
}

// ---------------------------------------------------------------- oracles

fn gaussian(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> CVec {
    CVec::from_fn(n, |_, _| gaussian(rng))
}

fn random_phases(rng: &mut ChaCha8Rng, m: usize) -> CVec {
    CVec::from_fn(m, |_, _| Complex64::from_polar(1.0, rng.random::<f64>() * TAU))
}

/// `|sum_m conj(u_m) v_m (G w)_m|^2`, element by element.
fn cascaded_power(u: &CVec, phases: &CVec, g: &CMat, w: &CVec) -> f64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..u.len() {
        let mut gw = Complex64::new(0.0, 0.0);
        for j in 0..w.len() {
            gw += g[(i, j)] * w[j];
        }
        acc += u[i].conj() * phases[i] * gw;
    }
    acc.norm_sqr()
}

/// Uniform linear array steering vector written out directly.
fn steering(theta_deg: f64, m: usize, spacing: f64) -> CVec {
    CVec::from_fn(m, |p, _| Complex64::from_polar(1.0, 2.0 * PI * spacing * p as f64 * theta_deg.to_radians().sin()))
}

fn rel_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// Received powers `p[k][role][j]` of beam `j` at each user.
fn received_powers(ch: &ChannelSet, phases: &CVec, beams: &[CVec]) -> Vec<[Vec<f64>; 2]> {
    ch.g_ris_user.iter().map(|pair| [0, 1].map(|r| beams.iter().map(|w| cascaded_power(&pair[r], phases, &ch.g_bs_ris, w)).collect())).collect()
}

/// Rates of cluster `k` from the NOMA SINR formulas: (far decoded at near,
/// near, far decoded at far), in bits/s/Hz.
fn oracle_rates(p: &[[Vec<f64>; 2]], k: usize, a_far: f64, noise: f64) -> [f64; 3] {
    let a_near = 1.0 - a_far;
    let other = |r: usize| p[k][r].iter().enumerate().filter(|&(j, _)| j != k).map(|(_, x)| x).sum::<f64>();
    let (s_n, s_f, i_n, i_f) = (p[k][0][k], p[k][1][k], other(0), other(1));
    let rate = |sinr: f64| (1.0 + sinr).log2();
    [rate(a_far * s_n / (a_near * s_n + i_n + noise)), rate(a_near * s_n / (i_n + noise)), rate(a_far * s_f / (a_near * s_f + i_f + noise))]
}

fn oracle_feasible(p: &[[Vec<f64>; 2]], k: usize, a_far: f64, noise: f64, floor_near: f64, floor_far: f64) -> bool {
    let [fn_, n, ff] = oracle_rates(p, k, a_far, noise);
    n >= floor_near && fn_ >= floor_far && ff >= floor_far
}

/// `H = c c^H` with `c = G^H Theta^H g`, so `Tr(w w^H H) = |g^H Theta G w|^2`.
fn h_matrices(ch: &ChannelSet, phases: &CVec) -> Vec<[CMat; 2]> {
    let theta = CMat::from_diagonal(phases);
    ch.g_ris_user
        .iter()
        .map(|pair| {
            pair.clone().map(|g| {
                let c = ch.g_bs_ris.adjoint() * theta.adjoint() * g;
                &c * c.adjoint()
            })
        })
        .collect()
}

struct PowerCase {
    channels: ChannelSet,
    phases: CVec,
    beams: Vec<CVec>,
    noise: f64,
    floors: [f64; 2],
}

fn power_case(rng: &mut ChaCha8Rng, k: usize, noise_range: (f64, f64)) -> PowerCase {
    let (n, m) = (3, 4);
    let g_bs_ris = CMat::from_fn(m, n, |_, _| gaussian(rng));
    let g_ris_user = (0..k).map(|_| [random_vec(rng, m), random_vec(rng, m)]).collect();
    let phases = random_phases(rng, m);
    let beams = (0..k).map(|_| random_vec(rng, n)).collect();
    let noise = 10f64.powf(noise_range.0 + (noise_range.1 - noise_range.0) * rng.random::<f64>());
    let floors = [0.1 + 0.9 * rng.random::<f64>(), 0.05 + 0.45 * rng.random::<f64>()];
    PowerCase { channels: ChannelSet { g_bs_ris, g_ris_user }, phases, beams, noise, floors }
}

// ------------------------------------------------------------ sweep data

fn base_config() -> ScenarioConfig {
    ScenarioConfig { n_antennas: 4, m_elements: 8, k_clusters: 2, ..ScenarioConfig::default() }
}

fn workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn sweep(config: &ScenarioConfig, sweep: Sweep, schemes: &[SchemeId], seeds: u64, dir: Option<&Path>) -> ExperimentResult {
    let plan = SweepPlan { sweep, schemes: schemes.to_vec(), seeds: (0..seeds).collect() };
    let options = SweepOptions { workers: workers(), out_dir: dir.map(Path::to_path_buf), resume: false };
    run_sweep(config, &plan, &options).expect("sweep runs")
}

/// Objective per seed of one cell (failed runs omitted).
fn objectives(result: &ExperimentResult, scheme: SchemeId, value_index: usize) -> BTreeMap<u64, f64> {
    result.select(scheme, value_index).filter_map(|r| r.objective.map(|o| (r.seed, o))).collect()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Medians of two per-seed maps over their common seeds.
fn matched(a: &BTreeMap<u64, f64>, b: &BTreeMap<u64, f64>) -> (f64, f64, usize) {
    let seeds: Vec<u64> = a.keys().filter(|s| b.contains_key(s)).copied().collect();
    (median(seeds.iter().map(|s| a[s]).collect()), median(seeds.iter().map(|s| b[s]).collect()), seeds.len())
}

/// `upper >= (1 - slack) lower` on matched medians, with a readable note.
fn at_least(label: &str, upper: &BTreeMap<u64, f64>, lower: &BTreeMap<u64, f64>, notes: &mut Vec<String>) -> bool {
    let (u, l, n) = matched(upper, lower);
    let ok = n > 0 && u >= (1.0 - TREND_SLACK) * l;
    notes.push(format!("{label} {u:.4e}/{l:.4e} (n={n}){}", if ok { "" } else { " VIOLATED" }));
    ok
}

// --------------------------------------------------------------- criteria

fn cross_form(verdicts: &mut Vec<Verdict>) {
    let cfg = base_config();
    let spacing = cfg.channel.element_spacing_ratio;
    let spec = build_sensing_spec(&cfg.geometry.target_angles, cfg.sensing.beam_width_deg, cfg.sensing.grid_step_deg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut beam_gap, mut sinr_gap) = (0.0f64, 0.0f64);
    for seed in 0..100 {
        let inst = Instance::realize(&cfg, seed).unwrap();
        let ch = &inst.channels;
        let phases = random_phases(&mut rng, cfg.m_elements);
        let beams: Vec<CVec> = (0..cfg.k_clusters).map(|_| random_vec(&mut rng, cfg.n_antennas)).collect();
        let mats: Vec<CMat> = beams.iter().map(|w| w * w.adjoint()).collect();
        let passive = passive_mat_from_phases(&phases);
        let theta = -90.0 + 180.0 * rng.random::<f64>();
        let a = steering(theta, cfg.m_elements, spacing);
        let upsilon = CMat::from_fn(cfg.m_elements, cfg.n_antennas, |i, j| a[i].conj() * ch.g_bs_ris[(i, j)]);
        let direct = beampattern_gain_direct(&phases, &ch.g_bs_ris, &beams, theta, spacing).unwrap();
        let trace = beampattern_gain_trace(&passive, &upsilon, &mats).unwrap();
        let oracle: f64 = beams.iter().map(|w| cascaded_power(&a, &phases, &ch.g_bs_ris, w)).sum();
        beam_gap = beam_gap.max(rel_gap(direct, trace)).max(rel_gap(direct, oracle));

        let eff = build_effective_matrices(ch, &spec, spacing, Some(&passive)).unwrap();
        let by_trace = ChannelGains::from_trace(&eff, &mats);
        let by_vector = ChannelGains::from_vectors(ch, &phases, &beams);
        let p = received_powers(ch, &phases, &beams);
        let split = PowerSplit::from_far(0.2 + 0.6 * rng.random::<f64>());
        for k in 0..cfg.k_clusters {
            let t = sinr_terms(&by_trace, k, split, inst.noise);
            let v = sinr_terms(&by_vector, k, split, inst.noise);
            let o = oracle_rates(&p, k, split.far, inst.noise).map(|r| r.exp2() - 1.0);
            for i in 0..3 {
                sinr_gap = sinr_gap.max(rel_gap(t[i].sinr(), v[i].sinr())).max(rel_gap(t[i].sinr(), o[i]));
            }
        }
    }
    let pass = beam_gap < 1e-8 && sinr_gap < 1e-8;
    report(verdicts, 1, "cross-form oracle", pass, format!("100 instances, worst beampattern gap {beam_gap:.2e}, worst SINR gap {sinr_gap:.2e} (limit 1e-8)"));
}

fn convergence(verdicts: &mut Vec<Verdict>, base: &ExperimentResult) {
    let mut worst = 0.0f64;
    let mut runs = 0;
    let mut failed = Vec::new();
    let mut max_iter = 0;
    let mut unconverged = Vec::new();
    for scheme in [SchemeId::Ibcd, SchemeId::Iao] {
        for r in base.select(scheme, 0) {
            if !r.is_ok() {
                failed.push(format!("{scheme}/{}", r.seed));
                continue;
            }
            runs += 1;
            worst = worst.max(r.trace.worst_relative_decrease());
            if scheme == SchemeId::Ibcd {
                max_iter = max_iter.max(r.outer_iterations);
                if !r.converged {
                    unconverged.push(r.seed);
                }
            }
        }
    }
    let pass = failed.is_empty() && worst <= 1e-6 && max_iter <= 15 && unconverged.is_empty();
    report(
        verdicts,
        2,
        "monotone convergence",
        pass,
        format!("{runs} runs, worst relative decrease {worst:.2e} (slack 1e-6), IBCD max outer iterations {max_iter} (limit 15), unconverged {unconverged:?}, failed {failed:?}"),
    );
}

fn rank_one(verdicts: &mut Vec<Verdict>, base: &ExperimentResult) {
    let mut min_w = f64::INFINITY;
    let mut min_v = f64::INFINITY;
    let mut max_err = 0.0f64;
    let mut runs = 0;
    for scheme in [SchemeId::Ibcd, SchemeId::Iao] {
        for r in base.select(scheme, 0).filter(|r| r.is_ok()) {
            runs += 1;
            min_w = r.w_ratios.iter().copied().fold(min_w, f64::min);
            min_v = min_v.min(r.v_ratio);
            max_err = max_err.max(r.w_rel_error.unwrap_or(f64::INFINITY)).max(r.v_rel_error.unwrap_or(f64::INFINITY));
        }
    }
    let pass = runs > 0 && min_w > 1e6 && min_v > 1e6 && max_err < 1e-3;
    report(verdicts, 3, "rank-one certificates", pass, format!("{runs} IBCD/IAO runs, min W ratio {min_w:.2e}, min V ratio {min_v:.2e} (limit 1e6), worst reconstruction error {max_err:.2e} (limit 1e-3)"));
}

fn constraints(verdicts: &mut Vec<Verdict>, base: &ExperimentResult) {
    let cfg = &base.config;
    let mut worst_short = f64::NEG_INFINITY;
    let mut worst_excess = f64::NEG_INFINITY;
    let mut worst_ibcd_slack = 0.0f64;
    let mut runs = 0;
    for r in base.records.iter().filter(|r| r.is_ok() && r.scheme != SchemeId::RisSensing) {
        runs += 1;
        let inst = base.instance(r).unwrap();
        let sol = r.stored_solution().unwrap();
        let rates: Vec<(f64, f64)> = if r.scheme == SchemeId::RisIsacNoNoma {
            let v = orthogonal_rates(&inst, &sol).unwrap();
            v.chunks(2).map(|c| (c[0], c[1])).collect()
        } else {
            achievable_rates(&inst.channels, &sol, inst.noise).unwrap().clusters.iter().map(|c| (c.near, c.far)).collect()
        };
        for (near, far) in rates {
            worst_short = worst_short.max(cfg.qos_rnu - near).max(cfg.qos_rfu - far);
        }
        let power: f64 = sol.active_mats.iter().map(|w| w.trace().re).sum();
        worst_excess = worst_excess.max(power / inst.p_max - 1.0);
        if r.scheme == SchemeId::Ibcd {
            worst_ibcd_slack = worst_ibcd_slack.max((power / inst.p_max - 1.0).abs());
        }
    }
    let pass = runs > 0 && worst_short <= 1e-6 && worst_excess <= 1e-6 && worst_ibcd_slack <= 1e-4;
    report(
        verdicts,
        4,
        "constraint satisfaction",
        pass,
        format!("{runs} runs, worst QoS shortfall {worst_short:.2e} bit/s/Hz (limit 1e-6), worst power excess {worst_excess:.2e} relative, IBCD budget gap {worst_ibcd_slack:.2e} (limit 1e-4)"),
    );
}

fn closed_form_oracle(verdicts: &mut Vec<Verdict>) {
    const GRID: usize = 10_000;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut instances, mut clusters, mut draws) = (0, 0, 0);
    let (mut worst_grid, mut worst_binding) = (0.0f64, 0.0f64);
    let mut missing = 0;
    while instances < 50 {
        draws += 1;
        let case = power_case(&mut rng, 2, (-3.0, -1.0));
        let r = qos_rate_thresholds(&case.floors).unwrap();
        let mats: Vec<CMat> = case.beams.iter().map(|w| w * w.adjoint()).collect();
        let bounds = power_feasibility_bounds(&h_matrices(&case.channels, &case.phases), &mats, r[0], r[1], case.noise).unwrap();
        if !bounds.iter().all(|b| b.feasible()) {
            continue;
        }
        instances += 1;
        let split = closed_form_power(&bounds).unwrap();
        let p = received_powers(&case.channels, &case.phases, &case.beams);
        for (k, s) in split.iter().enumerate() {
            clusters += 1;
            let grid_min = (1..GRID).map(|i| i as f64 / GRID as f64).find(|&a| oracle_feasible(&p, k, a, case.noise, case.floors[0], case.floors[1]));
            match grid_min {
                Some(g) => worst_grid = worst_grid.max((g - s.far).abs()),
                None => missing += 1,
            }
        }
        let sol = Solution::from_vectors(case.beams.clone(), split, case.phases.clone());
        for c in achievable_rates(&case.channels, &sol, case.noise).unwrap().clusters {
            worst_binding = worst_binding.max((c.far - case.floors[1]).abs());
        }
    }
    let pass = missing == 0 && worst_grid <= 1e-4 && worst_binding <= 1e-6;
    report(
        verdicts,
        5,
        "closed-form power oracle",
        pass,
        format!("50 feasible instances ({draws} drawn, {clusters} clusters), worst |a_f - grid min| {worst_grid:.2e} (limit 1e-4), worst binding gap {worst_binding:.2e} (limit 1e-6), grid misses {missing}"),
    );
}

fn feasibility_flag(verdicts: &mut Vec<Verdict>) {
    const GRID: usize = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut feasible, mut infeasible, mut mismatches) = (0, 0, 0);
    for i in 0..50 {
        let case = power_case(&mut rng, 1 + i % 2, (-2.0, 1.0));
        let r = qos_rate_thresholds(&case.floors).unwrap();
        let mats: Vec<CMat> = case.beams.iter().map(|w| w * w.adjoint()).collect();
        let bounds = power_feasibility_bounds(&h_matrices(&case.channels, &case.phases), &mats, r[0], r[1], case.noise).unwrap();
        let p = received_powers(&case.channels, &case.phases, &case.beams);
        for (k, b) in bounds.iter().enumerate() {
            let brute = (1..GRID).any(|j| oracle_feasible(&p, k, j as f64 / GRID as f64, case.noise, case.floors[0], case.floors[1]));
            if brute {
                feasible += 1;
            } else {
                infeasible += 1;
            }
            if brute != b.feasible() {
                mismatches += 1;
            }
        }
    }
    let pass = mismatches == 0 && feasible > 0 && infeasible > 0;
    report(verdicts, 6, "feasibility flag oracle", pass, format!("50 instances, {feasible} feasible and {infeasible} infeasible clusters by scan, {mismatches} mismatches"));
}

/// Exhaustive search for `K = 1`, `N = 2`, `M = 2` and one interest angle:
/// the relative RIS phase, the beam direction at full power and the power
/// split on coarse grids.
fn exhaustive_optimum(inst: &Instance) -> f64 {
    let cfg = &inst.config;
    let ch = &inst.channels;
    let a = steering(inst.sensing.interest_angles()[0], 2, cfg.channel.element_spacing_ratio);
    let (floor_near, floor_far) = (cfg.qos_rnu, cfg.qos_rfu);
    let amp = inst.p_max.sqrt();
    let splits: Vec<f64> = (1..200).map(|i| i as f64 / 200.0).collect();
    let mut best = 0.0f64;
    for ip in 0..180 {
        let phases = CVec::from_vec(vec![Complex64::new(1.0, 0.0), Complex64::from_polar(1.0, ip as f64 * TAU / 180.0)]);
        for ia in 0..=90 {
            let alpha = ia as f64 * PI / 180.0;
            for ib in 0..180 {
                let w = CVec::from_vec(vec![Complex64::new(amp * alpha.cos(), 0.0), Complex64::from_polar(amp * alpha.sin(), ib as f64 * TAU / 180.0)]);
                let gain = cascaded_power(&a, &phases, &ch.g_bs_ris, &w);
                if gain <= best {
                    continue;
                }
                let p = received_powers(ch, &phases, std::slice::from_ref(&w));
                if splits.iter().any(|&s| oracle_feasible(&p, 0, s, inst.noise, floor_near, floor_far)) {
                    best = gain;
                }
            }
        }
    }
    best
}

fn global_oracle(verdicts: &mut Vec<Verdict>) {
    let mut cfg = ScenarioConfig { n_antennas: 2, m_elements: 2, k_clusters: 1, ..ScenarioConfig::default() };
    cfg.geometry.target_angles = vec![0.0];
    cfg.geometry.target_radii = vec![90.0];
    cfg.sensing.beam_width_deg = cfg.sensing.grid_step_deg;
    cfg.p_max_dbm = 60.0;
    let mut notes = Vec::new();
    let mut pass = true;
    for seed in 0..3 {
        let inst = Instance::realize(&cfg, seed).unwrap();
        assert_eq!(inst.sensing.interest_set.len(), 1);
        let exhaustive = exhaustive_optimum(&inst);
        let ibcd = run_ibcd(&inst, seed).map(|o| o.objective).unwrap_or(0.0);
        let ratio = ibcd / exhaustive;
        pass &= ratio >= 0.98;
        notes.push(format!("seed {seed} ratio {ratio:.4}"));
    }
    report(verdicts, 7, "small-instance global oracle", pass, format!("IBCD / exhaustive optimum (limit 0.98): {}", notes.join(", ")));
}

struct TrendData {
    base: ExperimentResult,
    m: ExperimentResult,
    n: ExperimentResult,
    p: ExperimentResult,
}

fn trends(verdicts: &mut Vec<Verdict>, d: &TrendData) {
    use SchemeId::*;
    let mut notes = Vec::new();
    let mut ok = true;
    let ibcd_base = objectives(&d.base, Ibcd, 0);
    // objective non-decreasing in M, N and P_max
    ok &= at_least("M 8->12", &objectives(&d.m, Ibcd, 0), &ibcd_base, &mut notes);
    ok &= at_least("N 3->4", &ibcd_base, &objectives(&d.n, Ibcd, 0), &mut notes);
    ok &= at_least("N 4->5", &objectives(&d.n, Ibcd, 1), &ibcd_base, &mut notes);
    ok &= at_least("P 30->35", &ibcd_base, &objectives(&d.p, Ibcd, 0), &mut notes);
    ok &= at_least("P 35->40", &objectives(&d.p, Ibcd, 1), &ibcd_base, &mut notes);
    // sensing only >= ibcd >= baselines at every scenario
    let cells = [("base", &d.base, 0), ("N=3", &d.n, 0), ("N=5", &d.n, 1), ("P=30", &d.p, 0), ("P=40", &d.p, 1)];
    for (label, result, vi) in cells {
        let ibcd = objectives(result, Ibcd, vi);
        ok &= at_least(&format!("{label} sensing>=ibcd"), &objectives(result, RisSensing, vi), &ibcd, &mut notes);
        for b in [BaselineZf, BaselineMrt] {
            ok &= at_least(&format!("{label} ibcd>={b}"), &ibcd, &objectives(result, b, vi), &mut notes);
        }
    }
    // NOMA against orthogonal access in the over- and underloaded regimes
    for (label, vi) in [("N=3", 0), ("N=5", 1)] {
        ok &= at_least(&format!("{label} ibcd>=no_noma"), &objectives(&d.n, Ibcd, vi), &objectives(&d.n, RisIsacNoNoma, vi), &mut notes);
    }
    // per-target illumination sums
    let targets = |scheme: SchemeId| -> Vec<BTreeMap<u64, f64>> {
        let mut per_target = vec![BTreeMap::new(); d.base.config.geometry.target_angles.len()];
        for r in d.base.select(scheme, 0).filter(|r| r.is_ok()) {
            let inst = d.base.instance(r).unwrap();
            let map = illumination_rows(&inst, &r.stored_solution().unwrap()).unwrap();
            for (t, s) in target_illumination(&inst, &map).into_iter().enumerate() {
                per_target[t].insert(r.seed, s);
            }
        }
        per_target
    };
    for (t, (noma, oma)) in targets(Ibcd).iter().zip(targets(RisIsacNoNoma).iter()).enumerate() {
        ok &= at_least(&format!("target {t} illumination noma>=no_noma"), noma, oma, &mut notes);
    }
    report(verdicts, 8, "trend suite", ok, notes.join("; "));
}

fn iao_vs_ibcd(verdicts: &mut Vec<Verdict>, base: &ExperimentResult) {
    let ibcd = objectives(base, SchemeId::Ibcd, 0);
    let iao = objectives(base, SchemeId::Iao, 0);
    let (m_iao, m_ibcd, n) = matched(&iao, &ibcd);
    let times = |s: SchemeId| median(base.select(s, 0).filter(|r| r.is_ok() && iao.contains_key(&r.seed) && ibcd.contains_key(&r.seed)).map(|r: &RunRecord| r.wall_time).collect());
    let (t_iao, t_ibcd) = (times(SchemeId::Iao), times(SchemeId::Ibcd));
    let gap = 1.0 - m_iao / m_ibcd;
    let pass = n > 0 && gap <= 0.05 && t_iao < t_ibcd;
    report(
        verdicts,
        9,
        "IAO against IBCD",
        pass,
        format!("matched seeds {n}, median objective IAO {m_iao:.4e} vs IBCD {m_ibcd:.4e} (shortfall {:.2}%, limit 5%), median wall time IAO {t_iao:.2}s vs IBCD {t_ibcd:.2}s", 100.0 * gap),
    );
}

fn determinism(verdicts: &mut Vec<Verdict>) {
    let cfg = ScenarioConfig { n_antennas: 3, m_elements: 4, k_clusters: 2, ..ScenarioConfig::default() };
    let schemes = [SchemeId::Ibcd, SchemeId::Iao, SchemeId::BaselineMrt, SchemeId::RisSensing];
    let root = tempfile::tempdir().unwrap();
    let emit_all = |run: &str| -> Vec<Vec<u8>> {
        let dir = root.path().join(run);
        let first = sweep(&cfg, Sweep::single(), &schemes, 3, Some(&dir));
        let loaded = ExperimentResult::load(&dir).unwrap();
        let mut files = Vec::new();
        for kind in EmitKind::ALL {
            for (tag, result) in [("mem", &first), ("disk", &loaded)] {
                let path = dir.join(format!("{}_{tag}.csv", kind.name()));
                write_csv(&emit(result, kind, None).unwrap(), &path).unwrap();
                files.push(std::fs::read(&path).unwrap());
            }
        }
        files
    };
    let a = emit_all("a");
    let b = emit_all("b");
    let differing = a.iter().zip(&b).filter(|(x, y)| x != y).count() + a.chunks(2).filter(|p| p[0] != p[1]).count();
    let pass = differing == 0 && a.iter().all(|f| !f.is_empty());
    report(verdicts, 10, "determinism", pass, format!("{} CSV files from two identical sweeps and their reloads, {differing} differ", a.len() + b.len()));
}

fn main() {
    risnoma::conic::silence_solver_panics();
    let started = Instant::now();
    let mut verdicts = Vec::new();
    cross_form(&mut verdicts);
    closed_form_oracle(&mut verdicts);
    feasibility_flag(&mut verdicts);
    global_oracle(&mut verdicts);
    determinism(&mut verdicts);

    use SchemeId::*;
    let base_cfg = base_config();
    let base = sweep(&base_cfg, Sweep::single(), &SchemeId::ALL, SEEDS, None);
    convergence(&mut verdicts, &base);
    rank_one(&mut verdicts, &base);
    constraints(&mut verdicts, &base);
    iao_vs_ibcd(&mut verdicts, &base);
    let data = TrendData {
        m: sweep(&base_cfg, Sweep::over(SweepParam::MElements, vec![12.0]), &[Ibcd], SEEDS, None),
        n: sweep(&base_cfg, Sweep::over(SweepParam::NAntennas, vec![3.0, 5.0]), &[Ibcd, BaselineZf, BaselineMrt, RisIsacNoNoma, RisSensing], SEEDS, None),
        p: sweep(&base_cfg, Sweep::over(SweepParam::PMaxDbm, vec![30.0, 40.0]), &[Ibcd, BaselineZf, BaselineMrt, RisSensing], SEEDS, None),
        base,
    };
    trends(&mut verdicts, &data);

    verdicts.sort_by_key(|v| v.id);
    let failed: Vec<&Verdict> = verdicts.iter().filter(|v| !v.pass).collect();
    println!("acceptance: {}/{} criteria passed in {:.0}s", verdicts.len() - failed.len(), verdicts.len(), started.elapsed().as_secs_f64());
    for v in &failed {
        println!("  failed {} {}: {}", v.id, v.name, v.detail);
    }
    if !failed.is_empty() {
        std::process::exit(1);
    }
}

//! Plot-ready tables computed from persisted runs. Every emitter is a pure
//! function of its inputs, and floats are written in shortest round-trip form,
//! so re-emitting from the same runs reproduces the files byte for byte.
//! Wall-clock times are deliberately left out of every table.

use std::path::Path;

use super::record::RunRecord;
use super::ExperimentResult;
use crate::algorithms::Instance;
use crate::baselines::SchemeId;
use crate::error::{invalid, Result};
use crate::geometry::los_probe_channel;
use crate::metrics::{angle_grid, illumination_power, Solution};
use crate::serde_util::render;

/// A CSV table of already rendered fields.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| invalid(format!("csv buffer: {e}")))?;
        String::from_utf8(bytes).map_err(|e| invalid(format!("csv is not utf-8: {e}")))
    }
}

/// Writes a table as RFC-4180 CSV.
pub fn write_csv(table: &Table, path: &Path) -> Result<()> {
    std::fs::write(path, table.to_csv_string()?)?;
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map(render).unwrap_or_default()
}

/// Linear-interpolation quantile (`q` in [0, 1]) of finite values; sorts
/// `values` in place. `None` for an empty slice.
pub fn quantile(values: &mut [f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (values.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(values[lo] + (values[hi] - values[lo]) * (pos - lo as f64))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeampatternRow {
    pub angle_deg: f64,
    pub gain: f64,
    pub normalized: f64,
}

/// Beampattern gain at every grid angle, normalized by its maximum.
pub fn beampattern_rows(inst: &Instance, solution: &Solution) -> Result<Vec<BeampatternRow>> {
    let g = &inst.channels.g_bs_ris;
    let m = inst.m();
    let mut rows = Vec::with_capacity(inst.sensing.angle_grid.len());
    for &angle in &inst.sensing.angle_grid {
        let a = crate::geometry::steering_vector(angle, m, inst.config.channel.element_spacing_ratio)?;
        let upsilon = crate::linalg::diag_mul(&a.conjugate(), g);
        let gain = crate::metrics::beampattern_gain_trace(&solution.passive_mat, &upsilon, &solution.active_mats)?;
        rows.push(BeampatternRow { angle_deg: angle, gain, normalized: 0.0 });
    }
    let peak = rows.iter().map(|r| r.gain).fold(0.0, f64::max);
    if peak > 0.0 {
        for r in &mut rows {
            r.normalized = r.gain / peak;
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IlluminationRow {
    pub angle_deg: f64,
    pub radius: f64,
    pub x: f64,
    pub y: f64,
    pub power: f64,
}

/// Illumination power over the configured polar grid with line-of-sight
/// probe channels; `x = r sin(theta)`, `y = r cos(theta)` relative to the RIS.
pub fn illumination_rows(inst: &Instance, solution: &Solution) -> Result<Vec<IlluminationRow>> {
    let ic = &inst.config.illumination;
    if !(ic.radius_step > 0.0 && ic.radius_min > 0.0 && ic.radius_max >= ic.radius_min) {
        return Err(invalid("illumination radii must be positive with a positive step"));
    }
    let n_radii = ((ic.radius_max - ic.radius_min) / ic.radius_step + 1e-9).floor() as usize + 1;
    let mut rows = Vec::new();
    for angle in angle_grid(ic.angle_step_deg)? {
        for i in 0..n_radii {
            let radius = ic.radius_min + i as f64 * ic.radius_step;
            let probe = los_probe_channel(angle, radius, inst.m(), &inst.config.channel)?;
            let power = illumination_power(&solution.passive_mat, &solution.active_mats, &inst.channels.g_bs_ris, &probe)?;
            let t = angle.to_radians();
            rows.push(IlluminationRow { angle_deg: angle, radius, x: radius * t.sin(), y: radius * t.cos(), power });
        }
    }
    Ok(rows)
}

/// Illumination summed over each target's sector (angles within half the
/// beam width of the target), all radii.
pub fn target_illumination(inst: &Instance, map: &[IlluminationRow]) -> Vec<f64> {
    let half = inst.config.sensing.beam_width_deg / 2.0 + 1e-9;
    inst.config
        .geometry
        .target_angles
        .iter()
        .map(|&t| map.iter().filter(|r| (r.angle_deg - t).abs() <= half).map(|r| r.power).sum())
        .collect()
}

fn run_keys(r: &RunRecord) -> Vec<String> {
    vec![r.scheme.name().to_string(), opt(r.value), r.seed.to_string()]
}

fn selected<'a>(result: &'a ExperimentResult, scheme: Option<SchemeId>) -> impl Iterator<Item = &'a RunRecord> {
    result.records.iter().filter(move |r| r.is_ok() && r.solution.is_some() && scheme.is_none_or(|s| s == r.scheme))
}

/// Beampattern sweeps of every successful run (optionally one scheme).
pub fn beampattern_table(result: &ExperimentResult, scheme: Option<SchemeId>) -> Result<Table> {
    let mut t = Table::new(&["scheme", "value", "seed", "angle_deg", "gain", "normalized_gain"]);
    for r in selected(result, scheme) {
        let inst = result.instance(r)?;
        for row in beampattern_rows(&inst, &r.stored_solution()?)? {
            let mut f = run_keys(r);
            f.extend([render(row.angle_deg), render(row.gain), render(row.normalized)]);
            t.rows.push(f);
        }
    }
    Ok(t)
}

/// Illumination maps of every successful run.
pub fn illumination_table(result: &ExperimentResult, scheme: Option<SchemeId>) -> Result<Table> {
    let mut t = Table::new(&["scheme", "value", "seed", "angle_deg", "radius", "x", "y", "power"]);
    for r in selected(result, scheme) {
        let inst = result.instance(r)?;
        for row in illumination_rows(&inst, &r.stored_solution()?)? {
            let mut f = run_keys(r);
            f.extend([row.angle_deg, row.radius, row.x, row.y, row.power].map(render));
            t.rows.push(f);
        }
    }
    Ok(t)
}

/// Per-target illumination sums of every successful run.
pub fn target_table(result: &ExperimentResult, scheme: Option<SchemeId>) -> Result<Table> {
    let mut t = Table::new(&["scheme", "value", "seed", "target_angle_deg", "power"]);
    for r in selected(result, scheme) {
        let inst = result.instance(r)?;
        let map = illumination_rows(&inst, &r.stored_solution()?)?;
        for (angle, power) in inst.config.geometry.target_angles.iter().zip(target_illumination(&inst, &map)) {
            let mut f = run_keys(r);
            f.extend([render(*angle), render(power)]);
            t.rows.push(f);
        }
    }
    Ok(t)
}

/// Mean eigen-ratio of each beamforming matrix and of the passive matrix per
/// `(scheme, N, M)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RankRow {
    pub scheme: SchemeId,
    pub n_antennas: usize,
    pub m_elements: usize,
    pub runs: usize,
    pub w_ratios: Vec<f64>,
    pub v_ratio: f64,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn rank_rows(records: &[RunRecord]) -> Vec<RankRow> {
    let mut keys: Vec<(SchemeId, usize, usize)> = records.iter().filter(|r| r.is_ok()).map(|r| (r.scheme, r.n_antennas, r.m_elements)).collect();
    keys.sort();
    keys.dedup();
    keys.into_iter()
        .map(|(scheme, n, m)| {
            let runs: Vec<&RunRecord> = records.iter().filter(|r| r.is_ok() && (r.scheme, r.n_antennas, r.m_elements) == (scheme, n, m)).collect();
            let width = runs.iter().map(|r| r.w_ratios.len()).max().unwrap_or(0);
            let w_ratios = (0..width)
                .map(|j| mean(&runs.iter().filter_map(|r| r.w_ratios.get(j).copied()).collect::<Vec<_>>()))
                .collect();
            RankRow { scheme, n_antennas: n, m_elements: m, runs: runs.len(), w_ratios, v_ratio: mean(&runs.iter().map(|r| r.v_ratio).collect::<Vec<_>>()) }
        })
        .collect()
}

/// Eigen-ratio table; infinite ratios (exactly rank one) render as `inf`.
pub fn rank_table(records: &[RunRecord]) -> Table {
    let rows = rank_rows(records);
    let width = rows.iter().map(|r| r.w_ratios.len()).max().unwrap_or(0);
    let mut header = vec!["scheme".to_string(), "n_antennas".into(), "m_elements".into(), "runs".into()];
    header.extend((1..=width).map(|j| format!("w{j}_ratio")));
    header.push("v_ratio".into());
    let rows = rows
        .iter()
        .map(|r| {
            let mut f = vec![r.scheme.name().to_string(), r.n_antennas.to_string(), r.m_elements.to_string(), r.runs.to_string()];
            f.extend((0..width).map(|j| r.w_ratios.get(j).map(|&x| render(x)).unwrap_or_default()));
            f.push(render(r.v_ratio));
            f
        })
        .collect();
    Table { header, rows }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub scheme: SchemeId,
    pub value: Option<f64>,
    pub seed: u64,
    pub entry: crate::algorithms::TraceEntry,
}

pub fn trace_rows(records: &[RunRecord]) -> Vec<TraceRow> {
    records
        .iter()
        .flat_map(|r| r.trace.entries.iter().map(move |e| TraceRow { scheme: r.scheme, value: r.value, seed: r.seed, entry: e.clone() }))
        .collect()
}

/// Iteration histories of all runs, without timing columns.
pub fn trace_table(records: &[RunRecord]) -> Table {
    let mut t = Table::new(&["scheme", "value", "seed", "phase", "outer", "iteration", "objective", "delta", "epsilon", "rho", "accepted", "eigen_ratios", "note"]);
    for row in trace_rows(records) {
        let e = &row.entry;
        let phase = serde_json::to_value(e.phase).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
        t.rows.push(vec![
            row.scheme.name().to_string(),
            opt(row.value),
            row.seed.to_string(),
            phase,
            e.outer.to_string(),
            e.iteration.to_string(),
            opt(e.objective),
            opt(e.delta),
            opt(e.epsilon),
            opt(e.rho),
            e.accepted.map(|a| a.to_string()).unwrap_or_default(),
            e.eigen_ratios.iter().map(|&x| render(x)).collect::<Vec<_>>().join(";"),
            e.note.clone().unwrap_or_default(),
        ]);
    }
    t
}

/// Objective statistics of one `(value, scheme)` cell over seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub value: Option<f64>,
    pub scheme: SchemeId,
    pub runs: usize,
    pub failed: usize,
    pub mean: Option<f64>,
    pub median: Option<f64>,
    pub q25: Option<f64>,
    pub q75: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
}

pub fn summary_rows(records: &[RunRecord]) -> Vec<SummaryRow> {
    let mut keys: Vec<(usize, SchemeId)> = records.iter().map(|r| (r.value_index, r.scheme)).collect();
    keys.sort();
    keys.dedup();
    keys.into_iter()
        .map(|(vi, scheme)| {
            let cell: Vec<&RunRecord> = records.iter().filter(|r| r.value_index == vi && r.scheme == scheme).collect();
            let mut obj: Vec<f64> = cell.iter().filter_map(|r| r.objective).collect();
            let failed = cell.iter().filter(|r| !r.is_ok()).count();
            SummaryRow {
                value: cell[0].value,
                scheme,
                runs: cell.len(),
                failed,
                mean: (!obj.is_empty()).then(|| mean(&obj)),
                median: quantile(&mut obj, 0.5),
                q25: quantile(&mut obj, 0.25),
                q75: quantile(&mut obj, 0.75),
                min: quantile(&mut obj, 0.0),
                max: quantile(&mut obj, 1.0),
            }
        })
        .collect()
}

/// Aggregated objective statistics; recomputable from the per-run rows.
pub fn summary_table(records: &[RunRecord]) -> Table {
    let mut t = Table::new(&["value", "scheme", "runs", "failed", "mean", "median", "q25", "q75", "min", "max"]);
    for r in summary_rows(records) {
        t.rows.push(vec![
            opt(r.value),
            r.scheme.name().to_string(),
            r.runs.to_string(),
            r.failed.to_string(),
            opt(r.mean),
            opt(r.median),
            opt(r.q25),
            opt(r.q75),
            opt(r.min),
            opt(r.max),
        ]);
    }
    t
}

//! Experiment harness: factorial sweeps over one scenario parameter, seeds
//! and schemes, with one JSON-lines file per run and CSV emitters that are
//! pure functions of the persisted runs.
//!
//! Output directory layout:
//! - `config.toml`: the base scenario;
//! - `sweep.json`: swept parameter, values, schemes and seeds;
//! - `runs/<scheme>_v<value index>_s<seed>.jsonl`: one [`RunRecord`] per file.

mod emit;
mod record;

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use emit::{
    beampattern_rows, beampattern_table, illumination_rows, illumination_table, quantile, rank_rows, rank_table, summary_rows, summary_table,
    target_illumination, target_table, trace_rows, trace_table, write_csv, BeampatternRow, IlluminationRow, RankRow, SummaryRow, Table, TraceRow,
};
pub use record::{RunRecord, RunStatus, StoredMatrix, StoredSolution};

use crate::algorithms::Instance;
use crate::baselines::{run_scheme, SchemeId};
use crate::config::ScenarioConfig;
use crate::error::{invalid, Error, Result};

/// Scenario parameters that can be swept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    NAntennas,
    MElements,
    KClusters,
    PMaxDbm,
    NoisePowerDbm,
    QosRnu,
    QosRfu,
}

impl SweepParam {
    pub const ALL: [SweepParam; 7] = [Self::NAntennas, Self::MElements, Self::KClusters, Self::PMaxDbm, Self::NoisePowerDbm, Self::QosRnu, Self::QosRfu];

    /// Name of the corresponding configuration field.
    pub fn name(self) -> &'static str {
        match self {
            Self::NAntennas => "n_antennas",
            Self::MElements => "m_elements",
            Self::KClusters => "k_clusters",
            Self::PMaxDbm => "p_max_dbm",
            Self::NoisePowerDbm => "noise_power_dbm",
            Self::QosRnu => "qos_rnu",
            Self::QosRfu => "qos_rfu",
        }
    }

    /// Writes `value` into the configuration field; integer fields require
    /// integral values.
    pub fn apply(self, config: &mut ScenarioConfig, value: f64) -> Result<()> {
        let count = |v: f64| -> Result<usize> {
            if v >= 1.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
                Ok(v as usize)
            } else {
                Err(invalid(format!("{} needs a positive integer, got {v}", self.name())))
            }
        };
        match self {
            Self::NAntennas => config.n_antennas = count(value)?,
            Self::MElements => config.m_elements = count(value)?,
            Self::KClusters => config.k_clusters = count(value)?,
            Self::PMaxDbm => config.p_max_dbm = value,
            Self::NoisePowerDbm => config.noise_power_dbm = value,
            Self::QosRnu => config.qos_rnu = value,
            Self::QosRfu => config.qos_rfu = value,
        }
        config.validate()
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| invalid(format!("unknown sweep parameter `{s}` (expected one of {})", Self::ALL.map(|p| p.name()).join(", "))))
    }
}

/// Tables that can be emitted from a persisted sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmitKind {
    Beampattern,
    Illumination,
    Targets,
    Ranktable,
    Trace,
    Summary,
}

impl EmitKind {
    pub const ALL: [EmitKind; 6] = [Self::Beampattern, Self::Illumination, Self::Targets, Self::Ranktable, Self::Trace, Self::Summary];

    pub fn name(self) -> &'static str {
        match self {
            Self::Beampattern => "beampattern",
            Self::Illumination => "illumination",
            Self::Targets => "targets",
            Self::Ranktable => "ranktable",
            Self::Trace => "trace",
            Self::Summary => "summary",
        }
    }
}

impl FromStr for EmitKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| invalid(format!("unknown table kind `{s}` (expected one of {})", Self::ALL.map(|k| k.name()).join(", "))))
    }
}

/// Builds one table from a sweep, optionally restricted to one scheme.
pub fn emit(result: &ExperimentResult, kind: EmitKind, scheme: Option<SchemeId>) -> Result<Table> {
    let records: Vec<RunRecord> = result.records.iter().filter(|r| scheme.is_none_or(|s| s == r.scheme)).cloned().collect();
    match kind {
        EmitKind::Beampattern => beampattern_table(result, scheme),
        EmitKind::Illumination => illumination_table(result, scheme),
        EmitKind::Targets => target_table(result, scheme),
        EmitKind::Ranktable => Ok(rank_table(&records)),
        EmitKind::Trace => Ok(trace_table(&records)),
        EmitKind::Summary => Ok(summary_table(&records)),
    }
}

/// One swept parameter with its values; `param: None` is a single scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub param: Option<SweepParam>,
    pub values: Vec<f64>,
}

impl Sweep {
    pub fn single() -> Self {
        Self { param: None, values: Vec::new() }
    }

    pub fn over(param: SweepParam, values: Vec<f64>) -> Self {
        Self { param: Some(param), values }
    }

    /// `(value index, value)` of each scenario; a single scenario has value
    /// `None`.
    fn points(&self) -> Vec<(usize, Option<f64>)> {
        match self.param {
            Some(_) if !self.values.is_empty() => self.values.iter().copied().enumerate().map(|(i, v)| (i, Some(v))).collect(),
            _ => vec![(0, None)],
        }
    }

    /// Scenario configuration at a sweep point.
    pub fn config_at(&self, base: &ScenarioConfig, value: Option<f64>) -> Result<ScenarioConfig> {
        let mut cfg = base.clone();
        if let (Some(p), Some(v)) = (self.param, value) {
            p.apply(&mut cfg, v)?;
        }
        Ok(cfg)
    }
}

/// Everything that defines a sweep besides the base configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPlan {
    pub sweep: Sweep,
    pub schemes: Vec<SchemeId>,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone)]
pub struct SweepOptions {
    /// Concurrent runs; 0 uses all available cores.
    pub workers: usize,
    /// Directory receiving the per-run files, if any.
    pub out_dir: Option<PathBuf>,
    /// Reuse run files already present in `out_dir`.
    pub resume: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self { workers: 1, out_dir: None, resume: false }
    }
}

/// Base configuration, plan and the per-run records of a sweep, ordered by
/// value index, scheme and seed.
#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub config: ScenarioConfig,
    pub plan: SweepPlan,
    pub records: Vec<RunRecord>,
}

impl ExperimentResult {
    /// Records of one scheme at one value index.
    pub fn select(&self, scheme: SchemeId, value_index: usize) -> impl Iterator<Item = &RunRecord> {
        self.records.iter().filter(move |r| r.scheme == scheme && r.value_index == value_index)
    }

    /// Median objective over the successful runs of a cell.
    pub fn median_objective(&self, scheme: SchemeId, value_index: usize) -> Option<f64> {
        let mut v: Vec<f64> = self.select(scheme, value_index).filter_map(|r| r.objective).collect();
        quantile(&mut v, 0.5)
    }

    /// Rebuilds the channel realization of a record.
    pub fn instance(&self, record: &RunRecord) -> Result<Instance> {
        let cfg = self.plan.sweep.config_at(&self.config, record.value)?;
        Instance::realize(&cfg, record.seed)
    }

    /// Loads a sweep written by [`run_sweep`].
    pub fn load(dir: &Path) -> Result<Self> {
        let config = crate::load_config(dir.join("config.toml"))?;
        let plan: SweepPlan = serde_json::from_str(&fs::read_to_string(dir.join("sweep.json"))?)?;
        let mut records = Vec::new();
        let mut paths: Vec<PathBuf> = fs::read_dir(dir.join("runs"))?.filter_map(|e| e.ok().map(|e| e.path())).filter(|p| p.extension().is_some_and(|x| x == "jsonl")).collect();
        paths.sort();
        for path in paths {
            records.push(RunRecord::read(&path)?);
        }
        sort_records(&mut records);
        Ok(Self { config, plan, records })
    }
}

fn sort_records(records: &mut [RunRecord]) {
    records.sort_by(|a, b| (a.value_index, a.scheme, a.seed).cmp(&(b.value_index, b.scheme, b.seed)));
}

fn run_file(dir: &Path, scheme: SchemeId, value_index: usize, seed: u64) -> PathBuf {
    dir.join("runs").join(format!("{}_v{value_index}_s{seed}.jsonl", scheme.name()))
}

/// Runs one cell of the factorial design; failures become failed records.
pub fn run_cell(config: &ScenarioConfig, sweep: &Sweep, value_index: usize, value: Option<f64>, scheme: SchemeId, seed: u64) -> RunRecord {
    let outcome = sweep.config_at(config, value).and_then(|cfg| {
        let inst = Instance::realize(&cfg, seed)?;
        let out = run_scheme(&inst, scheme, seed)?;
        Ok((inst, out))
    });
    let param = sweep.param.map(|p| p.name().to_string());
    match outcome {
        Ok((inst, out)) => RunRecord::from_output(&inst, scheme, seed, param, value_index, value, &out),
        Err(e) => RunRecord::failed(config, scheme, seed, param, value_index, value, &e),
    }
}

/// Runs the full factorial design `values x schemes x seeds`. Runs execute
/// concurrently on `options.workers` threads; each finished run is written
/// to its own file immediately. Per-run failures are recorded, not fatal.
pub fn run_sweep(config: &ScenarioConfig, plan: &SweepPlan, options: &SweepOptions) -> Result<ExperimentResult> {
    config.validate()?;
    if plan.schemes.is_empty() || plan.seeds.is_empty() {
        return Err(invalid("a sweep needs at least one scheme and one seed"));
    }
    for (_, v) in plan.sweep.points() {
        plan.sweep.config_at(config, v)?;
    }
    if let Some(dir) = &options.out_dir {
        fs::create_dir_all(dir.join("runs"))?;
        fs::write(dir.join("config.toml"), config.to_toml_string())?;
        fs::write(dir.join("sweep.json"), serde_json::to_string_pretty(plan)? + "\n")?;
    }
    let mut cells = Vec::new();
    for (vi, v) in plan.sweep.points() {
        for &scheme in &plan.schemes {
            for &seed in &plan.seeds {
                cells.push((vi, v, scheme, seed));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(options.workers).build().map_err(|e| invalid(format!("worker pool: {e}")))?;
    let results: Vec<Result<RunRecord>> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(vi, v, scheme, seed)| {
                let path = options.out_dir.as_ref().map(|d| run_file(d, scheme, vi, seed));
                if let (true, Some(p)) = (options.resume, &path) {
                    if let Ok(r) = RunRecord::read(p) {
                        return Ok(r);
                    }
                }
                log::info!("running {scheme} value {v:?} seed {seed}");
                let record = run_cell(config, &plan.sweep, vi, v, scheme, seed);
                if let Some(p) = &path {
                    record.write(p)?;
                }
                Ok(record)
            })
            .collect()
    });
    let mut records = results.into_iter().collect::<Result<Vec<_>>>()?;
    sort_records(&mut records);
    Ok(ExperimentResult { config: config.clone(), plan: plan.clone(), records })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_params_parse_and_apply() {
        let mut cfg = ScenarioConfig::default();
        SweepParam::MElements.apply(&mut cfg, 12.0).unwrap();
        assert_eq!(cfg.m_elements, 12);
        assert!(SweepParam::NAntennas.apply(&mut cfg, 2.5).is_err());
        assert!(SweepParam::KClusters.apply(&mut cfg, 0.0).is_err());
        SweepParam::PMaxDbm.apply(&mut cfg, 25.0).unwrap();
        assert_eq!(cfg.p_max_dbm, 25.0);
        for p in SweepParam::ALL {
            assert_eq!(p.name().parse::<SweepParam>().unwrap(), p);
        }
        assert!("bogus".parse::<SweepParam>().is_err());
    }

    #[test]
    fn empty_sweep_is_one_scenario() {
        assert_eq!(Sweep::single().points(), vec![(0, None)]);
        assert_eq!(Sweep { param: Some(SweepParam::MElements), values: vec![] }.points(), vec![(0, None)]);
        assert_eq!(Sweep::over(SweepParam::MElements, vec![8.0, 12.0]).points().len(), 2);
    }
}

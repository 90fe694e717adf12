//! Persisted per-run results.

use std::fs;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::algorithms::{qos_shortfall, Instance, RunTrace, SchemeOutput};
use crate::baselines::{orthogonal_rates, SchemeId};
use crate::config::ScenarioConfig;
use crate::error::{invalid, Error, Result};
use crate::linalg::{CMat, CVec};
use crate::metrics::{achievable_rates, PowerSplit, Solution};
use crate::serde_util::{inf_f64, inf_f64_vec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    Failed,
}

/// Complex matrix stored column-major as separate real and imaginary parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredMatrix {
    pub rows: usize,
    pub cols: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl StoredMatrix {
    pub fn from_mat(m: &CMat) -> Self {
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            re: m.iter().map(|z| z.re).collect(),
            im: m.iter().map(|z| z.im).collect(),
        }
    }

    pub fn to_mat(&self) -> Result<CMat> {
        if self.re.len() != self.rows * self.cols || self.im.len() != self.re.len() {
            return Err(invalid("stored matrix has inconsistent dimensions"));
        }
        Ok(CMat::from_iterator(self.rows, self.cols, self.re.iter().zip(&self.im).map(|(&r, &i)| Complex64::new(r, i))))
    }
}

/// Solution variables needed to recompute every metric of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredSolution {
    /// Active beamforming matrices (rank one except for the sensing-only
    /// covariance).
    pub active: Vec<StoredMatrix>,
    /// Rank-one beams when available (N x 1 each).
    pub beams: Option<Vec<StoredMatrix>>,
    pub power: Vec<PowerSplit>,
    /// RIS reflection coefficients (M x 1).
    pub phases: StoredMatrix,
}

impl StoredSolution {
    pub fn from_solution(s: &Solution) -> Result<Self> {
        let phases = s.passive_vec.as_ref().ok_or_else(|| invalid("solution without RIS phases cannot be stored"))?;
        Ok(Self {
            active: s.active_mats.iter().map(StoredMatrix::from_mat).collect(),
            beams: s.active_vecs.as_ref().map(|v| v.iter().map(|b| StoredMatrix::from_mat(&CMat::from_column_slice(b.len(), 1, b.as_slice()))).collect()),
            power: s.power_coeffs.clone(),
            phases: StoredMatrix::from_mat(&CMat::from_column_slice(phases.len(), 1, phases.as_slice())),
        })
    }

    pub fn to_solution(&self) -> Result<Solution> {
        let column = |m: &StoredMatrix| -> Result<CVec> { Ok(m.to_mat()?.column(0).into_owned()) };
        let phases = column(&self.phases)?;
        Ok(Solution {
            active_mats: self.active.iter().map(StoredMatrix::to_mat).collect::<Result<_>>()?,
            active_vecs: self.beams.as_ref().map(|b| b.iter().map(column).collect::<Result<_>>()).transpose()?,
            power_coeffs: self.power.clone(),
            passive_mat: crate::metrics::passive_mat_from_phases(&phases),
            passive_vec: Some(phases),
        })
    }
}

/// Outcome of one `(scheme, sweep value, seed)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub scheme: SchemeId,
    pub seed: u64,
    pub param: Option<String>,
    pub value_index: usize,
    pub value: Option<f64>,
    pub n_antennas: usize,
    pub m_elements: usize,
    pub k_clusters: usize,
    pub p_max_dbm: f64,
    pub status: RunStatus,
    pub error: Option<String>,
    pub objective: Option<f64>,
    /// NOMA schemes: `[near, far]` rate per cluster; orthogonal access: one
    /// rate per user; sensing only: empty. Bits/s/Hz.
    pub rates: Vec<f64>,
    /// Largest rate shortfall below the QoS floors (negative when all hold).
    pub qos_shortfall: Option<f64>,
    pub total_power: Option<f64>,
    #[serde(with = "inf_f64_vec")]
    pub w_ratios: Vec<f64>,
    pub w_rel_error: Option<f64>,
    #[serde(with = "inf_f64")]
    pub v_ratio: f64,
    pub v_rel_error: Option<f64>,
    pub outer_iterations: usize,
    pub converged: bool,
    pub wall_time: f64,
    pub solution: Option<StoredSolution>,
    pub trace: RunTrace,
}

impl RunRecord {
    pub fn from_output(inst: &Instance, scheme: SchemeId, seed: u64, param: Option<String>, value_index: usize, value: Option<f64>, out: &SchemeOutput) -> Self {
        let cfg = &inst.config;
        let mut record = Self {
            scheme,
            seed,
            param,
            value_index,
            value,
            n_antennas: cfg.n_antennas,
            m_elements: cfg.m_elements,
            k_clusters: cfg.k_clusters,
            p_max_dbm: cfg.p_max_dbm,
            status: RunStatus::Ok,
            error: None,
            objective: Some(out.objective),
            rates: Vec::new(),
            qos_shortfall: None,
            total_power: None,
            w_ratios: out.w_ratios.clone(),
            w_rel_error: Some(out.w_rel_error),
            v_ratio: out.v_ratio,
            v_rel_error: Some(out.v_rel_error),
            outer_iterations: out.outer_iterations,
            converged: out.converged,
            wall_time: out.wall_time,
            solution: None,
            trace: out.trace.clone(),
        };
        if let Some(sol) = &out.solution {
            record.total_power = Some(sol.total_power());
            if let Err(e) = record.fill_rates(inst, sol) {
                log::warn!("rate recomputation failed for {scheme} seed {seed}: {e}");
            }
            match StoredSolution::from_solution(sol) {
                Ok(s) => record.solution = Some(s),
                Err(e) => log::warn!("solution of {scheme} seed {seed} not stored: {e}"),
            }
        }
        record
    }

    fn fill_rates(&mut self, inst: &Instance, sol: &Solution) -> Result<()> {
        match self.scheme {
            SchemeId::RisSensing => {}
            SchemeId::RisIsacNoNoma => {
                let rates = orthogonal_rates(inst, sol)?;
                let floors = [inst.config.qos_rnu, inst.config.qos_rfu];
                self.qos_shortfall = Some(rates.iter().enumerate().map(|(u, r)| floors[u % 2] - r).fold(f64::NEG_INFINITY, f64::max));
                self.rates = rates;
            }
            _ => {
                let report = achievable_rates(&inst.channels, sol, inst.noise)?;
                self.rates = report.clusters.iter().flat_map(|c| [c.near, c.far]).collect();
                self.qos_shortfall = Some(qos_shortfall(inst, sol)?);
            }
        }
        Ok(())
    }

    pub fn failed(config: &ScenarioConfig, scheme: SchemeId, seed: u64, param: Option<String>, value_index: usize, value: Option<f64>, err: &Error) -> Self {
        let mut cfg = config.clone();
        if let (Some(p), Some(v)) = (param.as_deref().and_then(|p| p.parse::<super::SweepParam>().ok()), value) {
            // the value was validated before the sweep started
            let _ = p.apply(&mut cfg, v);
        }
        Self {
            scheme,
            seed,
            param,
            value_index,
            value,
            n_antennas: cfg.n_antennas,
            m_elements: cfg.m_elements,
            k_clusters: cfg.k_clusters,
            p_max_dbm: cfg.p_max_dbm,
            status: RunStatus::Failed,
            error: Some(err.to_string()),
            objective: None,
            rates: Vec::new(),
            qos_shortfall: None,
            total_power: None,
            w_ratios: Vec::new(),
            w_rel_error: None,
            v_ratio: f64::NAN,
            v_rel_error: None,
            outer_iterations: 0,
            converged: false,
            wall_time: 0.0,
            solution: None,
            trace: RunTrace::default(),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == RunStatus::Ok
    }

    /// Writes the record as a single JSON line, replacing the file atomically.
    pub fn write(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("jsonl.tmp");
        {
            let mut f = fs::File::create(&tmp)?;
            serde_json::to_writer(&mut f, self)?;
            f.write_all(b"\n")?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let line = text.lines().next().ok_or_else(|| invalid(format!("{} is empty", path.display())))?;
        Ok(serde_json::from_str(line)?)
    }

    pub fn stored_solution(&self) -> Result<Solution> {
        self.solution.as_ref().ok_or_else(|| invalid(format!("{} seed {} has no stored solution", self.scheme, self.seed)))?.to_solution()
    }
}

use serde::{Deserialize, Serialize};

use crate::serde_util::inf_f64_vec;

/// Which step of an algorithm produced a trace entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Feasibility,
    Joint,
    Active,
    Passive,
    Power,
    Outer,
}

/// One iteration record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub phase: Phase,
    pub outer: usize,
    pub iteration: usize,
    pub objective: Option<f64>,
    pub delta: Option<f64>,
    pub epsilon: Option<f64>,
    pub rho: Option<f64>,
    /// Whether the step's result was accepted (SRCR solvability, outer guard).
    pub accepted: Option<bool>,
    #[serde(with = "inf_f64_vec")]
    pub eigen_ratios: Vec<f64>,
    pub wall_time: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl TraceEntry {
    pub fn new(phase: Phase, outer: usize, iteration: usize) -> Self {
        Self {
            phase,
            outer,
            iteration,
            objective: None,
            delta: None,
            epsilon: None,
            rho: None,
            accepted: None,
            eigen_ratios: Vec::new(),
            wall_time: 0.0,
            note: None,
        }
    }
}

/// Per-iteration history of a run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub entries: Vec<TraceEntry>,
}

impl RunTrace {
    pub fn push(&mut self, entry: TraceEntry) {
        self.entries.push(entry);
    }

    pub fn extend(&mut self, other: RunTrace) {
        self.entries.extend(other.entries);
    }

    /// Objective after each outer iteration.
    pub fn outer_objectives(&self) -> Vec<f64> {
        self.entries.iter().filter(|e| e.phase == Phase::Outer).filter_map(|e| e.objective).collect()
    }

    pub fn outer_iterations(&self) -> usize {
        self.entries.iter().filter(|e| e.phase == Phase::Outer).count()
    }

    /// Largest relative decrease between consecutive outer objectives.
    pub fn worst_relative_decrease(&self) -> f64 {
        let obj = self.outer_objectives();
        obj.windows(2).map(|w| (w[0] - w[1]) / w[0].abs().max(f64::MIN_POSITIVE)).fold(0.0, f64::max)
    }

    /// Whether the outer objective never decreases by more than `slack`
    /// relative to its previous value.
    pub fn is_monotone(&self, slack: f64) -> bool {
        self.worst_relative_decrease() <= slack
    }

    /// Outer steps whose candidate block was rejected by the improvement guard.
    pub fn guard_rejections(&self) -> usize {
        self.entries.iter().filter(|e| e.phase != Phase::Passive && e.accepted == Some(false)).count()
    }

    pub fn total_time(&self) -> f64 {
        self.entries.iter().map(|e| e.wall_time).sum()
    }
}

//! Feasibility bounds on the RFU power coefficient and the closed-form
//! allocation that gives the RFU only the power its QoS needs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::metrics::PowerSplit;

/// Bounds on `a_{k,f}` for one cluster.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerBounds {
    /// Largest RFU share that still leaves the RNU its rate floor.
    pub a_max: f64,
    /// Smallest RFU share decodable at the RNU.
    pub a_min1: f64,
    /// Smallest RFU share decodable at the RFU.
    pub a_min2: f64,
}

impl PowerBounds {
    pub fn a_min(&self) -> f64 {
        self.a_min1.max(self.a_min2)
    }

    /// `max(a_min1, a_min2) <= a_max < 1`.
    pub fn feasible(&self) -> bool {
        self.a_min() <= self.a_max && self.a_max < 1.0
    }
}

/// Bounds for every cluster given `H_{k,i}` (through `V`) and the beamformers.
/// `r_near`, `r_far` are SINR floors.
pub fn power_feasibility_bounds(h: &[[CMat; 2]], active: &[CMat], r_near: f64, r_far: f64, noise: f64) -> Result<Vec<PowerBounds>> {
    let k = active.len();
    let mut out = Vec::with_capacity(k);
    for c in 0..k {
        let recv = |role: usize, j: usize| linalg::trace_product_re(&active[j], &h[c][role]);
        let s_n = recv(0, c);
        let s_f = recv(1, c);
        if !(s_n > 0.0) || !(s_f > 0.0) {
            return Err(Error::DegenerateChannel(format!("cluster {c} receives no power from its own beam")));
        }
        let i_n: f64 = (0..k).filter(|&j| j != c).map(|j| recv(0, j)).sum();
        let i_f: f64 = (0..k).filter(|&j| j != c).map(|j| recv(1, j)).sum();
        let a_max = 1.0 - r_near * (i_n + noise) / s_n;
        // (S + I + sigma^2) / ((1 + 1/r) S), written to stay finite as r -> 0
        let a_min1 = r_far * (s_n + i_n + noise) / ((r_far + 1.0) * s_n);
        let a_min2 = r_far * (s_f + i_f + noise) / ((r_far + 1.0) * s_f);
        out.push(PowerBounds { a_max, a_min1, a_min2 });
    }
    Ok(out)
}

/// RFU share `max(a_min1, a_min2)`, RNU share the remainder.
pub fn closed_form_power(bounds: &[PowerBounds]) -> Result<Vec<PowerSplit>> {
    bounds
        .iter()
        .enumerate()
        .map(|(k, b)| {
            if b.feasible() {
                Ok(PowerSplit::from_far(b.a_min()))
            } else {
                Err(Error::InfeasibleScenario {
                    delta: b.a_min() - b.a_max,
                    reason: format!("cluster {k}: required RFU share {:.6} exceeds the admissible {:.6}", b.a_min(), b.a_max),
                })
            }
        })
        .collect()
}

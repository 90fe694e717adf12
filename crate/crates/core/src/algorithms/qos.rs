//! QoS constraints written as linear inequalities in received powers
//! `P(u; j) = |g_u^H Theta G w_j|^2`, which are trace-linear both in the
//! active matrices (for fixed `V`) and in the passive matrix (for fixed `W`).

use crate::geometry::Role;
use crate::metrics::PowerSplit;

/// `coef * P(user; beam)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QosTerm {
    pub cluster: usize,
    pub role: Role,
    pub beam: usize,
    pub coef: f64,
}

/// `sum_terms coef * P(user; beam) >= noise_coef * sigma^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct QosRow {
    pub label: String,
    pub terms: Vec<QosTerm>,
    pub noise_coef: f64,
}

/// The three SIC-ordered SINR constraints of every NOMA cluster with fixed
/// power coefficients. `r_near`, `r_far` are SINR floors.
pub fn noma_rows(k_clusters: usize, power: &[PowerSplit], r_near: f64, r_far: f64) -> Vec<QosRow> {
    let mut rows = Vec::with_capacity(3 * k_clusters);
    for (k, a) in power.iter().enumerate().take(k_clusters) {
        let inter = |role: Role, r: f64| (0..k_clusters).filter(move |&j| j != k).map(move |j| QosTerm { cluster: k, role, beam: j, coef: -r });
        // RNU own signal after SIC
        let mut terms = vec![QosTerm { cluster: k, role: Role::Near, beam: k, coef: a.near }];
        terms.extend(inter(Role::Near, r_near));
        rows.push(QosRow { label: format!("rate_near{k}"), terms, noise_coef: r_near });
        // RFU signal decoded at the RNU and at the RFU
        for (label, role) in [("rate_far_at_near", Role::Near), ("rate_far_at_far", Role::Far)] {
            let mut terms = vec![QosTerm { cluster: k, role, beam: k, coef: a.far - r_far * a.near }];
            terms.extend(inter(role, r_far));
            rows.push(QosRow { label: format!("{label}{k}"), terms, noise_coef: r_far });
        }
    }
    rows
}

/// Orthogonal users: user `u` is cluster `u / 2` with role near for even `u`,
/// served by beam `u`. Interference is summed over the other users' channels
/// with the user's own beam, `sum_{i != u} |g_i^H Theta G w_u|^2`.
pub fn orthogonal_rows(n_users: usize, r: &[f64]) -> Vec<QosRow> {
    let user = |u: usize| (u / 2, if u % 2 == 0 { Role::Near } else { Role::Far });
    (0..n_users)
        .map(|u| {
            let (cluster, role) = user(u);
            let mut terms = vec![QosTerm { cluster, role, beam: u, coef: 1.0 }];
            for i in (0..n_users).filter(|&i| i != u) {
                let (c, ro) = user(i);
                terms.push(QosTerm { cluster: c, role: ro, beam: u, coef: -r[u] });
            }
            QosRow { label: format!("rate_user{u}"), terms, noise_coef: r[u] }
        })
        .collect()
}

impl QosRow {
    /// Slack of the constraint for given received powers `power(cluster, role, beam)`.
    pub fn slack(&self, noise: f64, power: impl Fn(usize, Role, usize) -> f64) -> f64 {
        self.terms.iter().map(|t| t.coef * power(t.cluster, t.role, t.beam)).sum::<f64>() - self.noise_coef * noise
    }
}

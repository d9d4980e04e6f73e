use serde::{Deserialize, Serialize};

use crate::loadflow::VoltageProfile3Ph;

/// Voltage magnitude limits in pu.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VoltageLimits {
    pub min: f64,
    pub max: f64,
}

impl Default for VoltageLimits {
    fn default() -> Self {
        VoltageLimits { min: 0.95, max: 1.05 }
    }
}

impl VoltageLimits {
    pub fn contains(&self, v: f64) -> bool {
        v >= self.min && v <= self.max
    }
}

/// Voltage quality of a three-phase profile.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ViolationMetrics {
    /// Number of phase-node entries outside the limits.
    pub n_v: usize,
    /// Largest violation (pu).
    pub m_v: f64,
    /// Sum of violations (pu).
    pub s_v: f64,
    /// Mean margin to the nearer limit, counting violations as zero (pu).
    pub w_m: f64,
    /// Voltage unbalance factor (%).
    pub vuf: f64,
}

impl ViolationMetrics {
    pub fn is_clean(&self) -> bool {
        self.n_v == 0
    }
}

/// Metrics over every present phase of every bus, the slack included.
pub fn compute_metrics(v3: &VoltageProfile3Ph, limits: VoltageLimits) -> ViolationMetrics {
    compute_metrics_with_tolerance(v3, limits, 0.0)
}

/// As [`compute_metrics`], ignoring violations no larger than `tol`.
pub fn compute_metrics_with_tolerance(v3: &VoltageProfile3Ph, limits: VoltageLimits, tol: f64) -> ViolationMetrics {
    let mut m = ViolationMetrics::default();
    let mut entries = 0usize;
    let mut margin = 0.0;
    for (_, _, v) in v3.entries() {
        entries += 1;
        let excess = (v - limits.max).max(limits.min - v).max(0.0);
        if excess > tol {
            m.n_v += 1;
            m.m_v = m.m_v.max(excess);
            m.s_v += excess;
        }
        margin += (v - limits.min).min(limits.max - v).max(0.0);
    }
    if entries > 0 {
        m.w_m = margin / entries as f64;
    }
    let nodes = v3.phasors.len();
    let mut unbalance = 0.0;
    for node in 0..nodes {
        let mags: Vec<f64> = v3.phasors[node]
            .iter()
            .zip(v3.present[node])
            .filter(|(_, present)| *present)
            .map(|(v, _)| v.norm())
            .collect();
        if mags.is_empty() {
            continue;
        }
        let mean = mags.iter().sum::<f64>() / mags.len() as f64;
        if mean > 0.0 {
            unbalance += mags.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max) / mean;
        }
    }
    if nodes > 0 {
        m.vuf = 100.0 * unbalance / nodes as f64;
    }
    m
}

/// Scenario-suite summary: `W_M` and `VUF` averaged, `N_v` and `S_v`
/// summed, `M_v` the largest.
pub fn combine_scenarios(runs: &[ViolationMetrics]) -> ViolationMetrics {
    let mut m = ViolationMetrics::default();
    for r in runs {
        m.n_v += r.n_v;
        m.s_v += r.s_v;
        m.m_v = m.m_v.max(r.m_v);
        m.w_m += r.w_m;
        m.vuf += r.vuf;
    }
    if !runs.is_empty() {
        m.w_m /= runs.len() as f64;
        m.vuf /= runs.len() as f64;
    }
    m
}

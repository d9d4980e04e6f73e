//! Backward-forward sweep load flow for radial feeders.
//!
//! Loads are wye-connected constant power. Each iteration converts the net
//! nodal power to currents at the present voltages, accumulates branch
//! currents from the leaves to the root, then propagates voltage drops
//! `ΔV = z·I` from the root to the leaves. The sweep stops once the largest
//! nodal complex-power mismatch drops below the tolerance. Every solve starts
//! from a flat profile at the slack phasors.

mod csv_dump;

use num_complex::Complex64;
use thiserror::Error;

use crate::feeder::{Feeder, SinglePhaseFeeder};
use crate::phase::{PerPhase, Phase};

pub use csv_dump::{write_current_csv, write_voltage_csv};

#[derive(Debug, Error)]
pub enum LoadFlowError {
    #[error("load flow did not converge after {iterations} iterations (mismatch {mismatch:.3e} pu)")]
    NonConvergence {
        iterations: usize,
        mismatch: f64,
        last: Box<LoadFlowOutcome>,
    },
    #[error("slack voltage must be positive, got {0}")]
    SingularBase(f64),
    #[error("injection vector has {got} entries for {expected} buses")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("injection on phase {phase} at bus {bus}, where the phase is absent")]
    AbsentPhaseInjection { bus: u32, phase: Phase },
}

/// Last iterate carried by a non-converged solve.
#[derive(Debug, Clone)]
pub enum LoadFlowOutcome {
    ThreePhase(LoadFlowResult),
    SinglePhase(SinglePhaseResult),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadFlowOptions {
    /// Largest allowed nodal complex-power mismatch (pu).
    pub tolerance: f64,
    pub max_iter: usize,
}

impl Default for LoadFlowOptions {
    fn default() -> Self {
        LoadFlowOptions {
            tolerance: 1e-9,
            max_iter: 100,
        }
    }
}

/// Per-bus, per-phase voltage phasors (pu). Absent phases hold zero.
#[derive(Debug, Clone, PartialEq)]
pub struct VoltageProfile3Ph {
    pub phasors: Vec<PerPhase<Complex64>>,
    pub present: Vec<PerPhase<bool>>,
}

impl VoltageProfile3Ph {
    pub fn magnitude(&self, node: usize, phase: Phase) -> f64 {
        self.phasors[node][phase.index()].norm()
    }

    pub fn magnitudes(&self) -> Vec<PerPhase<f64>> {
        self.phasors.iter().map(|v| v.map(|x| x.norm())).collect()
    }

    /// `(node, phase, |V|)` for every present phase, in node then phase order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, Phase, f64)> + '_ {
        self.phasors.iter().enumerate().flat_map(move |(node, v)| {
            Phase::ALL
                .into_iter()
                .filter(move |p| self.present[node][p.index()])
                .map(move |p| (node, p, v[p.index()].norm()))
        })
    }
}

/// Branch current phasors, stored at the child bus of each branch
/// (parent→child positive). The slack entry is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct CurrentProfile3Ph {
    pub phasors: Vec<PerPhase<Complex64>>,
}

impl CurrentProfile3Ph {
    /// Squared current magnitude per branch and phase.
    pub fn squared(&self) -> Vec<PerPhase<f64>> {
        self.phasors.iter().map(|i| i.map(|x| x.norm_sqr())).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadFlowResult {
    pub voltages: VoltageProfile3Ph,
    pub currents: CurrentProfile3Ph,
    pub iterations: usize,
    pub max_mismatch: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SinglePhaseResult {
    pub voltages: Vec<Complex64>,
    /// Current in the branch feeding each bus (zero at the slack).
    pub currents: Vec<Complex64>,
    pub iterations: usize,
    pub max_mismatch: f64,
    pub converged: bool,
}

impl SinglePhaseResult {
    pub fn magnitudes(&self) -> Vec<f64> {
        self.voltages.iter().map(|v| v.norm()).collect()
    }
}

/// Slack phasors `V0·{1, e^{−j120°}, e^{+j120°}}`.
pub fn slack_phasors(v0: f64) -> PerPhase<Complex64> {
    Phase::ALL.map(|p| Complex64::from_polar(v0, p.nominal_angle()))
}

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Unbalanced three-phase sweep with full 3×3 coupling.
///
/// `extra_injections` (per bus, per phase, pu) are generation: the net nodal
/// consumption is `load − injection`.
pub fn solve_three_phase(
    feeder: &Feeder,
    extra_injections: &[PerPhase<Complex64>],
    opts: &LoadFlowOptions,
) -> Result<LoadFlowResult, LoadFlowError> {
    let n = feeder.len();
    if extra_injections.len() != n {
        return Err(LoadFlowError::DimensionMismatch {
            expected: n,
            got: extra_injections.len(),
        });
    }
    let v0 = feeder.slack_voltage();
    if !(v0 > 0.0) {
        return Err(LoadFlowError::SingularBase(v0));
    }
    let topo = feeder.topology();
    let present: Vec<PerPhase<bool>> = feeder.buses().iter().map(|b| b.phases).collect();
    let mut net = vec![[ZERO; 3]; n];
    for (node, bus) in feeder.buses().iter().enumerate() {
        for p in Phase::ALL {
            let k = p.index();
            let inj = extra_injections[node][k];
            if !bus.phases[k] {
                if inj != ZERO {
                    return Err(LoadFlowError::AbsentPhaseInjection { bus: bus.id, phase: p });
                }
                continue;
            }
            net[node][k] = bus.load[k] - inj;
        }
    }
    let slack = slack_phasors(v0);
    let mut v: Vec<PerPhase<Complex64>> = present
        .iter()
        .map(|ph| [0, 1, 2].map(|k| if ph[k] { slack[k] } else { ZERO }))
        .collect();
    let mut node_current = vec![[ZERO; 3]; n];
    let mut branch_current = vec![[ZERO; 3]; n];
    let root = topo.root();
    let mut mismatch = f64::INFINITY;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        iterations += 1;
        for node in 0..n {
            for k in 0..3 {
                node_current[node][k] = if present[node][k] && node != root {
                    (net[node][k] / v[node][k]).conj()
                } else {
                    ZERO
                };
            }
        }
        for &node in topo.order().iter().rev() {
            let mut acc = node_current[node];
            for &c in topo.children(node) {
                for k in 0..3 {
                    acc[k] += branch_current[c][k];
                }
            }
            branch_current[node] = acc;
        }
        branch_current[root] = [ZERO; 3];
        for &node in topo.order().iter().skip(1) {
            let parent = topo.parent(node).unwrap();
            let z = &feeder.parent_branch(node).unwrap().z;
            let drop = z.mul(&branch_current[node]);
            for k in 0..3 {
                v[node][k] = if present[node][k] { v[parent][k] - drop[k] } else { ZERO };
            }
        }
        mismatch = 0.0;
        let mut finite = true;
        for node in 0..n {
            if node == root {
                continue;
            }
            for k in 0..3 {
                if !present[node][k] {
                    continue;
                }
                let s = v[node][k] * node_current[node][k].conj();
                let err = (s - net[node][k]).norm();
                if !err.is_finite() || v[node][k].norm() < 1e-6 {
                    finite = false;
                }
                mismatch = mismatch.max(err);
            }
        }
        if !finite {
            mismatch = f64::INFINITY;
            break;
        }
        if mismatch < opts.tolerance {
            break;
        }
    }

    let result = LoadFlowResult {
        voltages: VoltageProfile3Ph { phasors: v, present },
        currents: CurrentProfile3Ph {
            phasors: branch_current,
        },
        iterations,
        max_mismatch: mismatch,
        converged: mismatch < opts.tolerance,
    };
    if result.converged {
        Ok(result)
    } else {
        Err(LoadFlowError::NonConvergence {
            iterations,
            mismatch,
            last: Box::new(LoadFlowOutcome::ThreePhase(result)),
        })
    }
}

/// Scalar sweep over one phase. Injections on inactive nodes are rejected.
pub fn solve_single_phase(
    sp: &SinglePhaseFeeder,
    extra_injections: &[Complex64],
    opts: &LoadFlowOptions,
) -> Result<SinglePhaseResult, LoadFlowError> {
    let n = sp.len();
    if extra_injections.len() != n {
        return Err(LoadFlowError::DimensionMismatch {
            expected: n,
            got: extra_injections.len(),
        });
    }
    let v0 = sp.slack_voltage;
    if !(v0 > 0.0) {
        return Err(LoadFlowError::SingularBase(v0));
    }
    let topo = &sp.topology;
    let root = topo.root();
    let net: Vec<Complex64> = (0..n).map(|i| sp.load[i] - extra_injections[i]).collect();
    let mut v = vec![Complex64::new(v0, 0.0); n];
    let mut node_current = vec![ZERO; n];
    let mut branch_current = vec![ZERO; n];
    let mut mismatch = f64::INFINITY;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        iterations += 1;
        for node in 0..n {
            node_current[node] = if node == root { ZERO } else { (net[node] / v[node]).conj() };
        }
        for &node in topo.order().iter().rev() {
            let acc: Complex64 = node_current[node] + topo.children(node).iter().map(|&c| branch_current[c]).sum::<Complex64>();
            branch_current[node] = acc;
        }
        branch_current[root] = ZERO;
        for &node in topo.order().iter().skip(1) {
            let parent = topo.parent(node).unwrap();
            v[node] = v[parent] - sp.impedance[node] * branch_current[node];
        }
        mismatch = 0.0;
        let mut finite = true;
        for node in 0..n {
            if node == root {
                continue;
            }
            let err = (v[node] * node_current[node].conj() - net[node]).norm();
            if !err.is_finite() || v[node].norm() < 1e-6 {
                finite = false;
            }
            mismatch = mismatch.max(err);
        }
        if !finite {
            mismatch = f64::INFINITY;
            break;
        }
        if mismatch < opts.tolerance {
            break;
        }
    }

    let result = SinglePhaseResult {
        voltages: v,
        currents: branch_current,
        iterations,
        max_mismatch: mismatch,
        converged: mismatch < opts.tolerance,
    };
    if result.converged {
        Ok(result)
    } else {
        Err(LoadFlowError::NonConvergence {
            iterations,
            mismatch,
            last: Box::new(LoadFlowOutcome::SinglePhase(result)),
        })
    }
}

/// Propagates `V_j = V_i − z_ij·I_ij` from the slack phasors down the tree
/// using measured three-phase branch currents.
pub fn estimate_phase_voltages(feeder: &Feeder, currents: &CurrentProfile3Ph) -> VoltageProfile3Ph {
    let topo = feeder.topology();
    let present: Vec<PerPhase<bool>> = feeder.buses().iter().map(|b| b.phases).collect();
    let slack = slack_phasors(feeder.slack_voltage());
    let mut v = vec![[ZERO; 3]; feeder.len()];
    v[topo.root()] = slack;
    for &node in topo.order().iter().skip(1) {
        let parent = topo.parent(node).unwrap();
        let drop = feeder.parent_branch(node).unwrap().z.mul(&currents.phasors[node]);
        for k in 0..3 {
            v[node][k] = if present[node][k] { v[parent][k] - drop[k] } else { ZERO };
        }
    }
    VoltageProfile3Ph { phasors: v, present }
}

/// Complex power delivered by the slack bus, summed over phases.
pub fn slack_power(feeder: &Feeder, result: &LoadFlowResult) -> Complex64 {
    let topo = feeder.topology();
    let root = topo.root();
    let mut s = ZERO;
    for &c in topo.children(root) {
        for k in 0..3 {
            s += result.voltages.phasors[root][k] * result.currents.phasors[c][k].conj();
        }
    }
    s
}

#[cfg(test)]
mod tests;

//! Feeder data model.
//!
//! All quantities inside a [`Feeder`] are per unit: power on the per-phase base
//! `s_base_mva / 3`, impedance on `v_base_kv² / s_base_mva` (three-phase power
//! base, line-to-line voltage base). Files carry SI values and explicit bases.

mod extract;
mod file;
pub mod ieee37;
mod scenario;
mod synthetic;
mod topology;

use std::collections::HashMap;

use num_complex::Complex64;
use thiserror::Error;

use crate::phase::{PerPhase, Phase, PhaseImpedance};

pub use extract::{balance_approximation, extract_phase, extract_phase_selective, BalanceVariant, ImpedanceMode};
pub use file::{parse_feeder, read_feeder, serialize_feeder, FeederFile};
pub use scenario::{apply_scenario, Scenario};
pub use synthetic::{generate_synthetic_feeder, SyntheticFeederBuilder};
pub use topology::{Topology, TreeDefect, UnionFind};

/// Tolerance (pu) for symmetric and transposed mutual impedances.
pub const MUTUAL_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum FeederError {
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("malformed feeder JSON at line {line}, column {column}: {message}")]
    Json {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("topology error: {0}")]
    Topology(String),
    #[error("unit error: {0}")]
    Unit(String),
    #[error("phase {phase} is missing on branch {from}-{to} but carries downstream load")]
    MissingPhase { from: u32, to: u32, phase: Phase },
    #[error("branch {from}-{to} is not transposed (mutual spread {spread:.3e} pu)")]
    NonTransposed { from: u32, to: u32, spread: f64 },
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn schema(path: impl Into<String>, message: impl Into<String>) -> FeederError {
    FeederError::Schema {
        path: path.into(),
        message: message.into(),
    }
}

/// A bus with wye-connected constant-power loads.
#[derive(Debug, Clone, PartialEq)]
pub struct Bus {
    pub id: u32,
    /// Phases present at the bus, derived from the feeding branch.
    pub phases: PerPhase<bool>,
    /// Per-phase consumption `p + jq` (pu), zero on absent phases.
    pub load: PerPhase<Complex64>,
    /// Optional per-phase apparent-power cap for DER injections (pu).
    pub s_max: Option<f64>,
}

impl Bus {
    pub fn new(id: u32, load: PerPhase<Complex64>) -> Self {
        Bus {
            id,
            phases: [true; 3],
            load,
            s_max: None,
        }
    }

    pub fn has_phase(&self, phase: Phase) -> bool {
        self.phases[phase.index()]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub from: u32,
    pub to: u32,
    pub z: PhaseImpedance,
}

/// Immutable radial three-phase feeder.
#[derive(Debug, Clone, PartialEq)]
pub struct Feeder {
    buses: Vec<Bus>,
    branches: Vec<Branch>,
    slack: usize,
    slack_voltage: f64,
    s_base_mva: f64,
    v_base_kv: f64,
    topology: Topology,
    index: HashMap<u32, usize>,
}

impl Feeder {
    /// Validates and builds a feeder from per-unit data. Bus phase sets are
    /// recomputed from the branches.
    pub fn new(
        mut buses: Vec<Bus>,
        branches: Vec<Branch>,
        slack_bus: u32,
        slack_voltage: f64,
        s_base_mva: f64,
        v_base_kv: f64,
    ) -> Result<Self, FeederError> {
        if !(s_base_mva.is_finite() && s_base_mva > 0.0) {
            return Err(FeederError::Unit(format!("s_base_mva must be positive, got {s_base_mva}")));
        }
        if !(v_base_kv.is_finite() && v_base_kv > 0.0) {
            return Err(FeederError::Unit(format!("v_base_kv must be positive, got {v_base_kv}")));
        }
        if !(slack_voltage.is_finite() && slack_voltage > 0.0) {
            return Err(FeederError::Unit(format!(
                "slack_voltage_pu must be positive, got {slack_voltage}"
            )));
        }

        let mut index = HashMap::with_capacity(buses.len());
        for (k, bus) in buses.iter().enumerate() {
            if index.insert(bus.id, k).is_some() {
                return Err(schema(format!("buses[{k}].id"), format!("duplicate bus id {}", bus.id)));
            }
        }
        let slack = *index
            .get(&slack_bus)
            .ok_or_else(|| schema("slack_bus", format!("bus {slack_bus} is not defined")))?;

        let mut edges = Vec::with_capacity(branches.len());
        for (k, br) in branches.iter().enumerate() {
            let from = *index
                .get(&br.from)
                .ok_or_else(|| schema(format!("branches[{k}].from"), format!("unknown bus {}", br.from)))?;
            let to = *index
                .get(&br.to)
                .ok_or_else(|| schema(format!("branches[{k}].to"), format!("unknown bus {}", br.to)))?;
            validate_impedance(k, &br.z)?;
            edges.push((from, to));
        }
        let topology = Topology::from_edges(buses.len(), slack, &edges).map_err(|d| {
            FeederError::Topology(match d {
                TreeDefect::EdgeCount { nodes, edges } => {
                    format!("{nodes} buses need {} branches, found {edges}", nodes.saturating_sub(1))
                }
                TreeDefect::SelfLoop { edge } => format!("branch {edge} connects a bus to itself"),
                TreeDefect::Cycle { edge } => format!(
                    "branch {}-{} closes a cycle",
                    branches[edge].from, branches[edge].to
                ),
                TreeDefect::Disconnected { node } => {
                    format!("bus {} is not connected to the slack bus", buses[node].id)
                }
                TreeDefect::OutOfRange { edge } => format!("branch {edge} references an unknown bus"),
            })
        })?;

        // phase sets flow down the tree
        for &node in topology.order() {
            let phases = match topology.parent_branch(node) {
                None => [true; 3],
                Some(k) => {
                    let own = branches[k].z.phases();
                    let parent = buses[topology.parent(node).unwrap()].phases;
                    for p in Phase::ALL {
                        if own[p.index()] && !parent[p.index()] {
                            return Err(FeederError::Topology(format!(
                                "branch {}-{} carries phase {p} absent upstream",
                                branches[k].from, branches[k].to
                            )));
                        }
                    }
                    own
                }
            };
            buses[node].phases = phases;
        }

        for (k, bus) in buses.iter().enumerate() {
            for p in Phase::ALL {
                let s = bus.load[p.index()];
                if !(s.re.is_finite() && s.im.is_finite()) {
                    return Err(schema(format!("buses[{k}].loads.{p}"), "non-finite load"));
                }
                if !bus.has_phase(p) && (s.re != 0.0 || s.im != 0.0) {
                    return Err(schema(
                        format!("buses[{k}].loads.{p}"),
                        format!("load on phase {p} which is absent at bus {}", bus.id),
                    ));
                }
            }
            if let Some(s) = bus.s_max {
                if !(s.is_finite() && s > 0.0) {
                    return Err(schema(format!("buses[{k}].s_max_kva"), "must be positive"));
                }
            }
        }

        Ok(Feeder {
            buses,
            branches,
            slack,
            slack_voltage,
            s_base_mva,
            v_base_kv,
            topology,
            index,
        })
    }

    pub fn buses(&self) -> &[Bus] {
        &self.buses
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn len(&self) -> usize {
        self.buses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buses.is_empty()
    }

    /// Index of the slack bus in [`Feeder::buses`].
    pub fn slack(&self) -> usize {
        self.slack
    }

    pub fn slack_bus(&self) -> u32 {
        self.buses[self.slack].id
    }

    pub fn slack_voltage(&self) -> f64 {
        self.slack_voltage
    }

    pub fn s_base_mva(&self) -> f64 {
        self.s_base_mva
    }

    pub fn v_base_kv(&self) -> f64 {
        self.v_base_kv
    }

    /// Per-phase power base in MW.
    pub fn phase_base_mw(&self) -> f64 {
        self.s_base_mva / 3.0
    }

    pub fn z_base_ohm(&self) -> f64 {
        self.v_base_kv * self.v_base_kv / self.s_base_mva
    }

    pub fn index_of(&self, id: u32) -> Option<usize> {
        self.index.get(&id).copied()
    }

    /// Branch feeding bus `node`, if `node` is not the slack.
    pub fn parent_branch(&self, node: usize) -> Option<&Branch> {
        self.topology.parent_branch(node).map(|k| &self.branches[k])
    }

    /// Total consumption over all buses and phases, in MW + jMVAr.
    pub fn total_load_mw(&self) -> Complex64 {
        let pu: Complex64 = self.buses.iter().flat_map(|b| b.load.iter()).sum();
        pu * self.phase_base_mw()
    }

    /// Copy of this feeder with every bus load replaced by `f(bus)`.
    pub fn map_loads(&self, mut f: impl FnMut(&Bus) -> PerPhase<Complex64>) -> Result<Feeder, FeederError> {
        let buses = self
            .buses
            .iter()
            .map(|b| Bus {
                load: f(b),
                ..b.clone()
            })
            .collect();
        Feeder::new(
            buses,
            self.branches.clone(),
            self.slack_bus(),
            self.slack_voltage,
            self.s_base_mva,
            self.v_base_kv,
        )
    }

    /// Copy with a different slack voltage magnitude.
    pub fn with_slack_voltage(&self, v0: f64) -> Result<Feeder, FeederError> {
        Feeder::new(
            self.buses.clone(),
            self.branches.clone(),
            self.slack_bus(),
            v0,
            self.s_base_mva,
            self.v_base_kv,
        )
    }

    /// Copy with every bus given the same DER apparent-power cap (pu per phase).
    pub fn with_uniform_s_max(&self, s_max: Option<f64>) -> Result<Feeder, FeederError> {
        let buses = self
            .buses
            .iter()
            .map(|b| Bus { s_max, ..b.clone() })
            .collect();
        Feeder::new(
            buses,
            self.branches.clone(),
            self.slack_bus(),
            self.slack_voltage,
            self.s_base_mva,
            self.v_base_kv,
        )
    }
}

fn validate_impedance(k: usize, z: &PhaseImpedance) -> Result<(), FeederError> {
    let path = format!("branches[{k}].z_ohm");
    let present = z.phases();
    if !present.iter().any(|&p| p) {
        return Err(schema(path, "branch carries no phase"));
    }
    for i in 0..3 {
        for j in 0..3 {
            let zij = z.0[i][j];
            if !(zij.re.is_finite() && zij.im.is_finite()) {
                return Err(schema(path, format!("entry [{i}][{j}] is not finite")));
            }
            if (!present[i] || !present[j]) && (zij.re != 0.0 || zij.im != 0.0) {
                return Err(schema(path, format!("entry [{i}][{j}] belongs to an absent phase")));
            }
        }
        if z.0[i][i].re < 0.0 {
            return Err(schema(path, format!("self resistance [{i}][{i}] is negative")));
        }
    }
    if z.asymmetry() > MUTUAL_TOLERANCE {
        return Err(schema(path, format!("matrix is not symmetric (spread {:.3e} pu)", z.asymmetry())));
    }
    Ok(())
}

/// Where a [`SinglePhaseFeeder`] came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseSource {
    Phase(Phase),
    Balanced(BalanceVariant),
}

/// How the branch impedances of a [`SinglePhaseFeeder`] were obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Provenance {
    pub source: PhaseSource,
    pub impedance: ImpedanceMode,
    /// Branches whose impedance was modified (all for uniform modes).
    pub modified_branches: usize,
}

/// One phase of a feeder (or a balanced stand-in) with scalar impedances.
///
/// Node-indexed vectors share the parent feeder's bus indexing; the impedance
/// stored at node `n` belongs to the branch feeding `n` (zero at the slack).
#[derive(Debug, Clone, PartialEq)]
pub struct SinglePhaseFeeder {
    pub topology: Topology,
    pub bus_ids: Vec<u32>,
    pub impedance: Vec<Complex64>,
    pub load: Vec<Complex64>,
    /// Nodes where the phase exists; inactive nodes carry no load or injection.
    pub active: Vec<bool>,
    pub s_max: Vec<Option<f64>>,
    pub slack_voltage: f64,
    /// Per-phase power base in MW.
    pub phase_base_mw: f64,
    pub provenance: Provenance,
}

impl SinglePhaseFeeder {
    pub fn len(&self) -> usize {
        self.load.len()
    }

    pub fn is_empty(&self) -> bool {
        self.load.is_empty()
    }

    pub fn slack(&self) -> usize {
        self.topology.root()
    }

    pub fn r(&self, node: usize) -> f64 {
        self.impedance[node].re
    }

    pub fn x(&self, node: usize) -> f64 {
        self.impedance[node].im
    }

    /// Checks the branch-impedance and indexing invariants.
    pub fn validate(&self) -> Result<(), FeederError> {
        let n = self.topology.len();
        if [self.bus_ids.len(), self.impedance.len(), self.load.len(), self.active.len(), self.s_max.len()]
            .iter()
            .any(|&len| len != n)
        {
            return Err(FeederError::Argument("single-phase feeder vectors differ in length".into()));
        }
        for node in 0..n {
            if node == self.slack() {
                continue;
            }
            if self.impedance[node].norm_sqr() <= 0.0 {
                return Err(FeederError::Argument(format!(
                    "branch feeding bus {} has zero impedance",
                    self.bus_ids[node]
                )));
            }
        }
        if !(self.slack_voltage > 0.0) {
            return Err(FeederError::Unit("slack voltage must be positive".into()));
        }
        Ok(())
    }
}

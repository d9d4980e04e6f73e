use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::metrics::ViolationMetrics;
use crate::cia::Direction;
use crate::feeder::Feeder;
use crate::phase::{PerPhase, Phase};

/// Hosting-capacity method.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MethodId {
    /// Balanced worst-case approximation (largest impedance, smallest load).
    M1i,
    /// Balanced average approximation.
    M1ii,
    /// One extracted phase, injections copied to all phases.
    M2i { phase: Phase },
    /// Three independent per-phase solves.
    M2ii,
    /// Per-phase solves with mutual-compensated impedance on selected lines.
    ModZ {
        #[serde(with = "epsilon_serde")]
        epsilon: f64,
    },
    /// Per-phase solves with iteratively corrected voltage bounds.
    Iterative { alpha: f64, max_iter: usize },
    /// Sampled injection directions scaled to the validated limit.
    RandomSearch { samples: usize, seed: u64 },
}

mod epsilon_serde {
    use super::*;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(v),
            Raw::Text(t) if t == "inf" => Ok(f64::INFINITY),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("invalid epsilon {t:?}"))),
        }
    }
}

impl MethodId {
    pub fn validate(&self) -> Result<(), String> {
        match *self {
            MethodId::ModZ { epsilon } if !(epsilon >= 0.0) => Err(format!("epsilon must be ≥ 0, got {epsilon}")),
            MethodId::Iterative { alpha, .. } if !(0.0..=1.0).contains(&alpha) => Err(format!("alpha must lie in [0, 1], got {alpha}")),
            MethodId::Iterative { max_iter: 0, .. } => Err("max_iter must be at least 1".into()),
            MethodId::RandomSearch { samples: 0, .. } => Err("samples must be at least 1".into()),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for MethodId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MethodId::M1i => f.write_str("1i"),
            MethodId::M1ii => f.write_str("1ii"),
            MethodId::M2i { phase } => write!(f, "2i{phase}"),
            MethodId::M2ii => f.write_str("2ii"),
            MethodId::ModZ { epsilon } => write!(f, "modz({epsilon})"),
            MethodId::Iterative { alpha, max_iter } => write!(f, "iterative(alpha={alpha}, max_iter={max_iter})"),
            MethodId::RandomSearch { samples, seed } => write!(f, "random(samples={samples}, seed={seed})"),
        }
    }
}

impl FromStr for MethodId {
    type Err = String;

    /// Parses the bare method names; parameterised methods get defaults.
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "1i" => MethodId::M1i,
            "1ii" => MethodId::M1ii,
            "2ia" => MethodId::M2i { phase: Phase::A },
            "2ib" => MethodId::M2i { phase: Phase::B },
            "2ic" => MethodId::M2i { phase: Phase::C },
            "2ii" => MethodId::M2ii,
            "modz" => MethodId::ModZ { epsilon: 0.001 },
            "iterative" => MethodId::Iterative { alpha: 0.5, max_iter: 20 },
            "random" => MethodId::RandomSearch { samples: 100, seed: 0 },
            other => return Err(format!("unknown method {other:?}")),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Feasible,
    Infeasible,
    SolverError,
}

/// Per-bus per-phase values (pu for voltages, MW for injections).
pub type BusPhaseValues = Vec<PerPhase<f64>>;

/// Outcome of one direction of a method run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionReport {
    pub direction: Direction,
    pub status: RunStatus,
    /// Total three-phase injection in MW (`None` when not feasible).
    pub hc_mw: Option<f64>,
    pub phase_totals_mw: PerPhase<f64>,
    pub injections_mw: BusPhaseValues,
    /// Three-phase validation metrics.
    pub metrics: Option<ViolationMetrics>,
    pub validation_converged: bool,
    /// Validated three-phase voltage magnitudes.
    pub voltages: BusPhaseValues,
    /// Voltage magnitudes predicted by the per-phase models.
    pub predicted: BusPhaseValues,
    /// Lines whose impedance was mutual-compensated, as `[from, to]` bus ids.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub modified_lines: Option<Vec<[u32; 2]>>,
    /// Why the direction is not feasible.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
    /// Accepted iterations of the iterative method.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub iterations: Option<usize>,
    /// Final optimizer voltage bounds (magnitude pu) of the iterative method.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub bounds: Option<IterativeBounds>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterativeBounds {
    pub v_min: BusPhaseValues,
    pub v_max: BusPhaseValues,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeederSummary {
    pub buses: usize,
    pub branches: usize,
    pub total_load_mw: f64,
    pub s_base_mva: f64,
    pub v_base_kv: f64,
}

impl FeederSummary {
    pub fn of(feeder: &Feeder) -> Self {
        FeederSummary {
            buses: feeder.len(),
            branches: feeder.branches().len(),
            total_load_mw: feeder.total_load_mw().re,
            s_base_mva: feeder.s_base_mva(),
            v_base_kv: feeder.v_base_kv(),
        }
    }
}

/// Result of a method run; `hc_lower`/`hc_upper` are `None` ("NA") when the
/// direction was not requested or not feasible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HcReport {
    pub method: MethodId,
    pub feeder: FeederSummary,
    pub bus_ids: Vec<u32>,
    pub hc_lower_mw: Option<f64>,
    pub hc_upper_mw: Option<f64>,
    pub up: Option<DirectionReport>,
    pub down: Option<DirectionReport>,
    #[serde(skip)]
    pub runtime_seconds: f64,
}

impl HcReport {
    pub fn direction(&self, d: Direction) -> Option<&DirectionReport> {
        match d {
            Direction::Maximize => self.up.as_ref(),
            Direction::Minimize => self.down.as_ref(),
        }
    }

    pub fn reports(&self) -> impl Iterator<Item = &DirectionReport> {
        self.up.iter().chain(self.down.iter())
    }

    /// Whether every validated direction is free of violations.
    pub fn is_clean(&self) -> bool {
        self.reports()
            .filter(|r| r.status == RunStatus::Feasible)
            .all(|r| r.validation_converged && r.metrics.is_some_and(|m| m.is_clean()))
    }
}

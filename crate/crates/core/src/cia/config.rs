use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::CiaError;
use crate::feeder::SinglePhaseFeeder;

/// A per-node quantity given either once for all nodes or node by node
/// (indexed like the feeder's buses).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NodeValues {
    Uniform(f64),
    PerNode(Vec<f64>),
}

impl NodeValues {
    pub fn get(&self, node: usize) -> f64 {
        match self {
            NodeValues::Uniform(v) => *v,
            NodeValues::PerNode(v) => v[node],
        }
    }

    pub fn len_matches(&self, n: usize) -> bool {
        match self {
            NodeValues::Uniform(_) => true,
            NodeValues::PerNode(v) => v.len() == n,
        }
    }

    pub fn to_vec(&self, n: usize) -> Vec<f64> {
        (0..n).map(|i| self.get(i)).collect()
    }
}

/// Cap on the squared branch current `l⁺`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurrentLimit {
    None,
    /// `|I| ≤ k·|I⁰|` for the base-case current `I⁰`. Branches without base
    /// current use the largest base current of the feeder instead, so
    /// unloaded laterals are not frozen at zero.
    BaseCurrentMultiple(f64),
    /// Same cap (pu²) on every branch.
    Uniform(f64),
    /// Per branch, indexed by the bus the branch feeds.
    PerBranch(Vec<Option<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weights {
    Uniform,
    /// Weight 2 on leaf buses, 1 elsewhere.
    LeafDoubled,
    /// Weight per bus id; unlisted buses get 1.
    PerBus(BTreeMap<u32, f64>),
}

impl Weights {
    pub fn resolve(&self, sp: &SinglePhaseFeeder) -> Vec<f64> {
        (0..sp.len())
            .map(|n| match self {
                Weights::Uniform => 1.0,
                Weights::LeafDoubled => {
                    if sp.topology.is_leaf(n) {
                        2.0
                    } else {
                        1.0
                    }
                }
                Weights::PerBus(m) => m.get(&sp.bus_ids[n]).copied().unwrap_or(1.0),
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QMode {
    /// DER reactive injection held at zero; `|p| ≤ s̄`.
    FixedAtBase,
    /// DER reactive injection is a decision variable with `p² + q² ≤ s̄²`.
    FreeWithinCone,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Largest total injection (generation), `HC̄ ≥ 0`.
    Maximize,
    /// Largest total consumption, `HC̲ ≤ 0`.
    Minimize,
}

impl Direction {
    pub const BOTH: [Direction; 2] = [Direction::Maximize, Direction::Minimize];

    pub fn sign(self) -> f64 {
        match self {
            Direction::Maximize => 1.0,
            Direction::Minimize => -1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Maximize => "up",
            Direction::Minimize => "down",
        }
    }
}

/// How the proxy propagation equalities are written.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProxyForm {
    /// Branch-by-branch recursion, O(n) nonzeros.
    Recursive,
    /// Dense sensitivity-matrix rows, O(n²) nonzeros.
    Matrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CiaConfig {
    /// Voltage magnitude limits (pu); squared inside the optimizer.
    pub v_min: NodeValues,
    pub v_max: NodeValues,
    /// Lower bound on `l⁻` (pu²); `None` leaves it free.
    pub l_min: Option<f64>,
    /// Upper bound on `l⁺`; unlimited by default.
    pub l_max: CurrentLimit,
    pub weights: Weights,
    /// Per-phase apparent-power cap in MVA for buses without their own
    /// rating; `None` disables the cap.
    pub s_max_mva: Option<f64>,
    pub q_mode: QMode,
    /// Restrict every injection to the sign of the direction (`p ≥ 0` when
    /// maximising, `p ≤ 0` when minimising).
    pub sign_restricted: bool,
    pub direction: Direction,
    pub form: ProxyForm,
}

impl Default for CiaConfig {
    fn default() -> Self {
        CiaConfig {
            v_min: NodeValues::Uniform(0.95),
            v_max: NodeValues::Uniform(1.05),
            l_min: None,
            l_max: CurrentLimit::None,
            weights: Weights::Uniform,
            s_max_mva: Some(1.5),
            q_mode: QMode::FixedAtBase,
            sign_restricted: true,
            direction: Direction::Maximize,
            form: ProxyForm::Recursive,
        }
    }
}

impl CiaConfig {
    pub fn with_direction(&self, direction: Direction) -> Self {
        CiaConfig {
            direction,
            ..self.clone()
        }
    }

    pub fn validate(&self, sp: &SinglePhaseFeeder) -> Result<(), CiaError> {
        let n = sp.len();
        let invalid = |m: String| Err(CiaError::InvalidConfig(m));
        if !self.v_min.len_matches(n) || !self.v_max.len_matches(n) {
            return Err(CiaError::DimensionMismatch {
                what: "voltage bounds",
                expected: n,
            });
        }
        for node in 0..n {
            let (lo, hi) = (self.v_min.get(node), self.v_max.get(node));
            if !(lo >= 0.0 && lo < hi && hi.is_finite()) {
                return invalid(format!("voltage bounds [{lo}, {hi}] at bus {} are not an interval", sp.bus_ids[node]));
            }
        }
        match &self.l_max {
            CurrentLimit::BaseCurrentMultiple(k) if !(*k > 0.0) => return invalid(format!("current multiple {k} must be positive")),
            CurrentLimit::Uniform(l) if !(*l > 0.0) => return invalid(format!("current cap {l} must be positive")),
            CurrentLimit::PerBranch(v) if v.len() != n => {
                return Err(CiaError::DimensionMismatch {
                    what: "current limits",
                    expected: n,
                })
            }
            _ => {}
        }
        let w = self.weights.resolve(sp);
        if w.iter().any(|&x| !(x >= 0.0)) {
            return invalid("weights must be nonnegative".into());
        }
        if !w.iter().enumerate().any(|(i, &x)| x > 0.0 && sp.active[i] && i != sp.slack()) {
            return invalid("at least one active bus needs a positive weight".into());
        }
        if let Some(s) = self.s_max_mva {
            if !(s > 0.0) {
                return invalid(format!("apparent-power cap {s} must be positive"));
            }
        }
        Ok(())
    }
}

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Feeder, FeederError};
use crate::phase::Phase;

/// Load-unbalance scenarios used to compare methods.
///
/// `I` boosts phase-c loads by 20% and cuts phase-b loads by 20%; `II` and `III`
/// start from `I` and swap b↔c and a↔b respectively. Active and reactive power
/// are scaled together so every load keeps its power factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scenario {
    #[serde(rename = "i")]
    I,
    #[serde(rename = "ii")]
    II,
    #[serde(rename = "iii")]
    III,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::I, Scenario::II, Scenario::III];
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::I => "i",
            Scenario::II => "ii",
            Scenario::III => "iii",
        })
    }
}

impl FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "i" => Ok(Scenario::I),
            "ii" => Ok(Scenario::II),
            "iii" => Ok(Scenario::III),
            other => Err(format!("unknown scenario '{other}' (expected i, ii or iii)")),
        }
    }
}

/// Returns a copy of `feeder` with the scenario's load transform applied.
/// Swaps involving a phase absent at a bus leave that bus unchanged.
pub fn apply_scenario(feeder: &Feeder, scenario: Scenario) -> Result<Feeder, FeederError> {
    feeder.map_loads(|bus| {
        let mut load = bus.load;
        load[Phase::C.index()] *= 1.2;
        load[Phase::B.index()] *= 0.8;
        let swap = match scenario {
            Scenario::I => None,
            Scenario::II => Some((Phase::B, Phase::C)),
            Scenario::III => Some((Phase::A, Phase::B)),
        };
        if let Some((x, y)) = swap {
            if bus.has_phase(x) && bus.has_phase(y) {
                load.swap(x.index(), y.index());
            }
        }
        load
    })
}

use std::collections::BTreeMap;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{schema, Branch, Bus, Feeder, FeederError};
use crate::phase::{Phase, PhaseImpedance};

/// On-disk feeder description (SI units with explicit bases).
///
/// `s_base_mva` is the three-phase power base and `v_base_kv` the line-to-line
/// voltage base. Loads are per phase in kW/kvar, impedances in ohms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeederFile {
    pub s_base_mva: f64,
    pub v_base_kv: f64,
    pub slack_bus: u32,
    pub slack_voltage_pu: f64,
    pub buses: Vec<BusRecord>,
    pub branches: Vec<BranchRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BusRecord {
    pub id: u32,
    /// `[p_kw, q_kvar]` per present phase.
    #[serde(default)]
    pub loads: BTreeMap<Phase, [f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_max_kva: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchRecord {
    pub from: u32,
    pub to: u32,
    /// 3×3 matrix of `[re, im]` ohm pairs, zero rows/columns for absent phases.
    pub z_ohm: [[[f64; 2]; 3]; 3],
}

/// Parses and validates a feeder file, converting it to per unit.
pub fn parse_feeder(text: &str) -> Result<Feeder, FeederError> {
    let file: FeederFile = serde_json::from_str(text).map_err(|e| FeederError::Json {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    file.into_feeder()
}

pub fn read_feeder(path: impl AsRef<Path>) -> Result<Feeder, FeederError> {
    let text = std::fs::read_to_string(path)?;
    parse_feeder(&text)
}

/// Pretty-printed JSON in the on-disk schema.
pub fn serialize_feeder(feeder: &Feeder) -> String {
    let file = FeederFile::from_feeder(feeder);
    serde_json::to_string_pretty(&file).expect("feeder file is always serializable")
}

impl FeederFile {
    pub fn into_feeder(self) -> Result<Feeder, FeederError> {
        for (name, v) in [("s_base_mva", self.s_base_mva), ("v_base_kv", self.v_base_kv)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(FeederError::Unit(format!("{name} must be positive, got {v}")));
            }
        }
        let kw_base = self.s_base_mva * 1000.0 / 3.0;
        let z_base = self.v_base_kv * self.v_base_kv / self.s_base_mva;

        let mut buses = Vec::with_capacity(self.buses.len());
        for (k, rec) in self.buses.iter().enumerate() {
            let mut load = [Complex64::new(0.0, 0.0); 3];
            for (phase, [p, q]) in &rec.loads {
                if !(p.is_finite() && q.is_finite()) {
                    return Err(schema(format!("buses[{k}].loads.{phase}"), "non-finite load"));
                }
                load[phase.index()] = Complex64::new(p / kw_base, q / kw_base);
            }
            let s_max = match rec.s_max_kva {
                Some(s) if !(s.is_finite() && s > 0.0) => {
                    return Err(schema(format!("buses[{k}].s_max_kva"), "must be positive"))
                }
                s => s.map(|s| s / kw_base),
            };
            buses.push(Bus {
                s_max,
                ..Bus::new(rec.id, load)
            });
        }

        let branches = self
            .branches
            .iter()
            .map(|rec| Branch {
                from: rec.from,
                to: rec.to,
                z: PhaseImpedance(rec.z_ohm.map(|row| row.map(|[re, im]| Complex64::new(re, im) / z_base))),
            })
            .collect();

        Feeder::new(
            buses,
            branches,
            self.slack_bus,
            self.slack_voltage_pu,
            self.s_base_mva,
            self.v_base_kv,
        )
    }

    pub fn from_feeder(feeder: &Feeder) -> Self {
        let kw_base = feeder.s_base_mva() * 1000.0 / 3.0;
        let z_base = feeder.z_base_ohm();
        let buses = feeder
            .buses()
            .iter()
            .map(|b| BusRecord {
                id: b.id,
                loads: Phase::ALL
                    .into_iter()
                    .filter(|&p| b.has_phase(p) && b.load[p.index()] != Complex64::new(0.0, 0.0))
                    .map(|p| {
                        let s = b.load[p.index()] * kw_base;
                        (p, [s.re, s.im])
                    })
                    .collect(),
                s_max_kva: b.s_max.map(|s| s * kw_base),
            })
            .collect();
        let branches = feeder
            .branches()
            .iter()
            .map(|br| BranchRecord {
                from: br.from,
                to: br.to,
                z_ohm: br.z.0.map(|row| {
                    row.map(|z| {
                        let z = z * z_base;
                        [z.re, z.im]
                    })
                }),
            })
            .collect();
        FeederFile {
            s_base_mva: feeder.s_base_mva(),
            v_base_kv: feeder.v_base_kv(),
            slack_bus: feeder.slack_bus(),
            slack_voltage_pu: feeder.slack_voltage(),
            buses,
            branches,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_BUS: &str = r#"{
        "s_base_mva": 3.0, "v_base_kv": 4.8, "slack_bus": 0, "slack_voltage_pu": 1.0,
        "buses": [
            {"id": 0},
            {"id": 1, "loads": {"a": [100, 50], "b": [100, 50], "c": [100, 50]}}
        ],
        "branches": [
            {"from": 0, "to": 1, "z_ohm": [
                [[0.2, 0.4], [0.05, 0.1], [0.05, 0.1]],
                [[0.05, 0.1], [0.2, 0.4], [0.05, 0.1]],
                [[0.05, 0.1], [0.05, 0.1], [0.2, 0.4]]]}
        ]
    }"#;

    #[test]
    fn parses_two_bus_file() {
        let f = parse_feeder(TWO_BUS).unwrap();
        assert_eq!(f.len(), 2);
        assert_eq!(f.branches().len(), 1);
        // 100 kW on a 1000 kW per-phase base
        assert!((f.buses()[1].load[0].re - 0.1).abs() < 1e-15);
        // z_base = 4.8² / 3 = 7.68 ohm
        assert!((f.branches()[0].z.0[0][0].re - 0.2 / 7.68).abs() < 1e-15);
        assert!((f.total_load_mw().re - 0.3).abs() < 1e-12);
    }

    #[test]
    fn cycle_is_a_topology_error() {
        let text = r#"{
            "s_base_mva": 1.0, "v_base_kv": 1.0, "slack_bus": 1, "slack_voltage_pu": 1.0,
            "buses": [{"id": 1}, {"id": 2}, {"id": 3}, {"id": 4}, {"id": 5}],
            "branches": [
                {"from": 1, "to": 2, "z_ohm": [[[1,1],[0,0],[0,0]],[[0,0],[1,1],[0,0]],[[0,0],[0,0],[1,1]]]},
                {"from": 3, "to": 4, "z_ohm": [[[1,1],[0,0],[0,0]],[[0,0],[1,1],[0,0]],[[0,0],[0,0],[1,1]]]},
                {"from": 4, "to": 5, "z_ohm": [[[1,1],[0,0],[0,0]],[[0,0],[1,1],[0,0]],[[0,0],[0,0],[1,1]]]},
                {"from": 5, "to": 3, "z_ohm": [[[1,1],[0,0],[0,0]],[[0,0],[1,1],[0,0]],[[0,0],[0,0],[1,1]]]}
            ]
        }"#;
        match parse_feeder(text) {
            Err(FeederError::Topology(msg)) => assert!(msg.contains("5-3"), "{msg}"),
            other => panic!("expected topology error, got {other:?}"),
        }
    }

    #[test]
    fn schema_errors_carry_location() {
        let missing = TWO_BUS.replace("\"slack_bus\": 0,", "");
        match parse_feeder(&missing) {
            Err(FeederError::Json { message, .. }) => assert!(message.contains("slack_bus")),
            other => panic!("unexpected {other:?}"),
        }
        let unknown = TWO_BUS.replace("\"id\": 0}", "\"id\": 0, \"color\": 1}");
        assert!(matches!(parse_feeder(&unknown), Err(FeederError::Json { .. })));
        let bad_base = TWO_BUS.replace("\"s_base_mva\": 3.0", "\"s_base_mva\": 0.0");
        assert!(matches!(parse_feeder(&bad_base), Err(FeederError::Unit(_))));
        let asym = TWO_BUS.replacen("[[0.2, 0.4], [0.05, 0.1]", "[[0.2, 0.4], [0.06, 0.1]", 1);
        match parse_feeder(&asym) {
            Err(FeederError::Schema { path, .. }) => assert_eq!(path, "branches[0].z_ohm"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn load_on_absent_phase_is_rejected() {
        let text = TWO_BUS
            .replace("[[0.2, 0.4], [0.05, 0.1], [0.05, 0.1]]", "[[0.2, 0.4], [0.05, 0.1], [0, 0]]")
            .replace("[[0.05, 0.1], [0.2, 0.4], [0.05, 0.1]]", "[[0.05, 0.1], [0.2, 0.4], [0, 0]]")
            .replace("[[0.05, 0.1], [0.05, 0.1], [0.2, 0.4]]", "[[0, 0], [0, 0], [0, 0]]");
        match parse_feeder(&text) {
            Err(FeederError::Schema { path, .. }) => assert_eq!(path, "buses[1].loads.c"),
            other => panic!("unexpected {other:?}"),
        }
    }
}

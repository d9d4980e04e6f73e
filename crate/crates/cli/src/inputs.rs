use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use hostcap::cia::{Direction, Weights};
use hostcap::methods::HcReport;
use hostcap::{Feeder, Phase};
use num_complex::Complex64;
use serde::Deserialize;

pub fn parse_weights(arg: &str) -> Result<Weights> {
    match arg {
        "uniform" => Ok(Weights::Uniform),
        "leaf2x" => Ok(Weights::LeafDoubled),
        path => {
            let text = std::fs::read_to_string(path).with_context(|| format!("cannot read weights file {path}"))?;
            let map: BTreeMap<u32, f64> =
                serde_json::from_str(&text).with_context(|| format!("weights file {path} must map bus ids to numbers"))?;
            if let Some((id, w)) = map.iter().find(|(_, w)| !(w.is_finite() && **w >= 0.0)) {
                bail!("weight of bus {id} must be finite and non-negative, got {w}");
            }
            Ok(Weights::PerBus(map))
        }
    }
}

#[derive(Deserialize)]
struct InjectionRow {
    #[serde(default)]
    direction: Option<String>,
    bus: u32,
    phase: Phase,
    p_mw: f64,
    #[serde(default)]
    q_mvar: Option<f64>,
}

/// Per-bus, per-phase injections (pu) read from a report or CSV file.
pub fn read_injections(path: &Path, feeder: &Feeder, direction: Direction, scale: f64) -> Result<Vec<[Complex64; 3]>> {
    let base = feeder.phase_base_mw();
    let mut out = vec![[Complex64::default(); 3]; feeder.len()];
    let mut place = |bus: u32, phase: Phase, s: Complex64| -> Result<()> {
        let Some(idx) = feeder.index_of(bus) else {
            bail!("injection at bus {bus}, which is not in the feeder");
        };
        out[idx][phase.index()] = s * scale / base;
        Ok(())
    };
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        let report: HcReport =
            serde_json::from_str(&text).with_context(|| format!("{} is not a hostcap report", path.display()))?;
        let Some(dir) = report.direction(direction) else {
            bail!("report has no {} direction", direction.as_str());
        };
        if report.bus_ids.len() != dir.injections_mw.len() {
            bail!("report bus list and injections differ in length");
        }
        for (&bus, row) in report.bus_ids.iter().zip(&dir.injections_mw) {
            for p in Phase::ALL {
                if row[p.index()] != 0.0 {
                    place(bus, p, Complex64::new(row[p.index()], 0.0))?;
                }
            }
        }
    } else {
        let mut reader = csv::Reader::from_path(path).with_context(|| format!("cannot read {}", path.display()))?;
        for (k, row) in reader.deserialize::<InjectionRow>().enumerate() {
            let row = row.with_context(|| format!("{}: bad row {}", path.display(), k + 1))?;
            if row.direction.as_deref().is_some_and(|d| d != direction.as_str()) {
                continue;
            }
            place(row.bus, row.phase, Complex64::new(row.p_mw, row.q_mvar.unwrap_or(0.0)))?;
        }
    }
    Ok(out)
}

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{Feeder, FeederError, PhaseSource, Provenance, SinglePhaseFeeder, MUTUAL_TOLERANCE};
use crate::phase::{Phase, PhaseImpedance};

/// Per-phase branch impedance used when a phase is extracted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImpedanceMode {
    /// Self impedance `z^φ` only.
    Diagonal,
    /// `z^φ − z^m` with all mutual impedances required equal.
    Theorem1,
    /// `z^φ − z^m` with `z^m` the mean of the mutual impedances.
    Theorem1Approx,
}

/// Balanced single-phase stand-ins for an unbalanced feeder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BalanceVariant {
    /// Largest self impedance per branch, smallest phase load per bus.
    WorstCase,
    /// Mean self impedance and mean load over the present phases.
    Average,
}

fn present_mutuals(z: &PhaseImpedance) -> Vec<Complex64> {
    let present = z.phases();
    let mut out = Vec::with_capacity(3);
    for i in 0..3 {
        for j in (i + 1)..3 {
            if present[i] && present[j] {
                out.push(z.0[i][j]);
            }
        }
    }
    out
}

fn mutual_for(mode: ImpedanceMode, z: &PhaseImpedance, from: u32, to: u32) -> Result<Complex64, FeederError> {
    let mutuals = present_mutuals(z);
    if mutuals.is_empty() {
        return Ok(Complex64::new(0.0, 0.0));
    }
    match mode {
        ImpedanceMode::Diagonal => Ok(Complex64::new(0.0, 0.0)),
        ImpedanceMode::Theorem1 => {
            let first = mutuals[0];
            let spread = mutuals.iter().map(|m| (m - first).norm()).fold(0.0, f64::max);
            if spread > MUTUAL_TOLERANCE {
                return Err(FeederError::NonTransposed { from, to, spread });
            }
            Ok(first)
        }
        ImpedanceMode::Theorem1Approx => Ok(mutuals.iter().sum::<Complex64>() / mutuals.len() as f64),
    }
}

/// Extracts one phase with the same impedance treatment on every branch.
pub fn extract_phase(feeder: &Feeder, phase: Phase, mode: ImpedanceMode) -> Result<SinglePhaseFeeder, FeederError> {
    let modified = vec![true; feeder.branches().len()];
    extract_phase_selective(feeder, phase, mode, &modified)
}

/// Extracts one phase, applying `mode` only to branches flagged in `modified`
/// (indexed like [`Feeder::branches`]); the rest keep their self impedance.
///
/// Buses lacking the phase stay in the tree with zero load and are marked
/// inactive; their feeding branch borrows the mean self impedance of the
/// phases it does carry.
pub fn extract_phase_selective(
    feeder: &Feeder,
    phase: Phase,
    mode: ImpedanceMode,
    modified: &[bool],
) -> Result<SinglePhaseFeeder, FeederError> {
    if modified.len() != feeder.branches().len() {
        return Err(FeederError::Argument(format!(
            "modification mask has {} entries for {} branches",
            modified.len(),
            feeder.branches().len()
        )));
    }
    let topo = feeder.topology();
    let n = feeder.len();
    let mut impedance = vec![Complex64::new(0.0, 0.0); n];
    let mut active = vec![false; n];
    let mut load = vec![Complex64::new(0.0, 0.0); n];
    let mut downstream_load = vec![false; n];

    for (node, bus) in feeder.buses().iter().enumerate() {
        active[node] = bus.has_phase(phase);
        load[node] = bus.load[phase.index()];
    }
    for &node in topo.order().iter().rev() {
        let own = load[node] != Complex64::new(0.0, 0.0);
        let below = topo.children(node).iter().any(|&c| downstream_load[c]);
        downstream_load[node] = own || below;
    }

    let mut n_modified = 0;
    for node in 0..n {
        let Some(k) = topo.parent_branch(node) else { continue };
        let br = &feeder.branches()[k];
        if !br.z.has_phase(phase) {
            if downstream_load[node] {
                return Err(FeederError::MissingPhase {
                    from: br.from,
                    to: br.to,
                    phase,
                });
            }
            let present: Vec<Complex64> = Phase::ALL
                .into_iter()
                .filter(|&p| br.z.has_phase(p))
                .map(|p| br.z.self_impedance(p))
                .collect();
            impedance[node] = present.iter().sum::<Complex64>() / present.len() as f64;
            continue;
        }
        let zs = br.z.self_impedance(phase);
        impedance[node] = if modified[k] && mode != ImpedanceMode::Diagonal {
            n_modified += 1;
            zs - mutual_for(mode, &br.z, br.from, br.to)?
        } else {
            zs
        };
    }

    let sp = SinglePhaseFeeder {
        topology: topo.clone(),
        bus_ids: feeder.buses().iter().map(|b| b.id).collect(),
        impedance,
        load,
        active,
        s_max: feeder.buses().iter().map(|b| b.s_max).collect(),
        slack_voltage: feeder.slack_voltage(),
        phase_base_mw: feeder.phase_base_mw(),
        provenance: Provenance {
            source: PhaseSource::Phase(phase),
            impedance: mode,
            modified_branches: n_modified,
        },
    };
    sp.validate()?;
    Ok(sp)
}

/// Collapses the three phases into one balanced single-phase feeder.
pub fn balance_approximation(feeder: &Feeder, variant: BalanceVariant) -> Result<SinglePhaseFeeder, FeederError> {
    let topo = feeder.topology();
    let n = feeder.len();
    let mut impedance = vec![Complex64::new(0.0, 0.0); n];
    let mut load = vec![Complex64::new(0.0, 0.0); n];

    for node in 0..n {
        if let Some(br) = feeder.parent_branch(node) {
            let selfs: Vec<Complex64> = Phase::ALL
                .into_iter()
                .filter(|&p| br.z.has_phase(p))
                .map(|p| br.z.self_impedance(p))
                .collect();
            impedance[node] = match variant {
                BalanceVariant::WorstCase => selfs
                    .iter()
                    .copied()
                    .fold(None, |best: Option<Complex64>, z| match best {
                        Some(b) if b.norm() >= z.norm() => Some(b),
                        _ => Some(z),
                    })
                    .unwrap(),
                BalanceVariant::Average => selfs.iter().sum::<Complex64>() / selfs.len() as f64,
            };
        }
        let bus = &feeder.buses()[node];
        let loads: Vec<Complex64> = Phase::ALL
            .into_iter()
            .filter(|&p| bus.has_phase(p))
            .map(|p| bus.load[p.index()])
            .collect();
        load[node] = match variant {
            BalanceVariant::WorstCase => loads
                .iter()
                .copied()
                .fold(None, |best: Option<Complex64>, s| match best {
                    Some(b) if b.re <= s.re => Some(b),
                    _ => Some(s),
                })
                .unwrap_or_default(),
            BalanceVariant::Average if loads.is_empty() => Complex64::new(0.0, 0.0),
            BalanceVariant::Average => loads.iter().sum::<Complex64>() / loads.len() as f64,
        };
    }

    let sp = SinglePhaseFeeder {
        topology: topo.clone(),
        bus_ids: feeder.buses().iter().map(|b| b.id).collect(),
        impedance,
        load,
        active: vec![true; n],
        s_max: feeder.buses().iter().map(|b| b.s_max).collect(),
        slack_voltage: feeder.slack_voltage(),
        phase_base_mw: feeder.phase_base_mw(),
        provenance: Provenance {
            source: PhaseSource::Balanced(variant),
            impedance: ImpedanceMode::Diagonal,
            modified_branches: 0,
        },
    };
    sp.validate()?;
    Ok(sp)
}

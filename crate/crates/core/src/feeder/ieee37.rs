//! IEEE 37-node test feeder adapted to the wye constant-power model.
//!
//! Adaptation:
//! * the substation regulator is dropped; bus 799 is the slack with a fixed
//!   voltage magnitude;
//! * each delta load is converted to wye loads, by default splitting
//!   `S_ab` evenly between phases a and b (likewise bc and ca) at unchanged
//!   power factor; all load models (PQ, I, Z) are treated as constant power;
//! * the in-line transformer XFM-1 (709–775, 500 kVA, 0.09% + j1.81%) is a
//!   decoupled series impedance referred to the 4.8 kV side.
//!
//! Line impedances are the published underground-cable configurations
//! 721–724 in ohm per mile.

use num_complex::Complex64;

use super::{Branch, Bus, Feeder};
use crate::phase::PhaseImpedance;

pub const S_BASE_MVA: f64 = 2.5;
/// Published nominal voltage of the feeder.
pub const V_BASE_KV: f64 = 4.8;
pub const SLACK_BUS: u32 = 799;
/// Slack voltage magnitude used by the reference calibration.
pub const CALIBRATED_SLACK_VOLTAGE: f64 = 1.005;
/// Per-phase apparent-power cap (MVA) used by the reference calibration.
pub const CALIBRATED_S_MAX_MVA: f64 = 2.5;

const FEET_PER_MILE: f64 = 5280.0;

/// Upper triangle `(aa, ab, ac, bb, bc, cc)` in ohm/mile, as `(r, x)`.
fn configuration(code: u16) -> [(f64, f64); 6] {
    match code {
        721 => [
            (0.2926, 0.1973),
            (0.0673, -0.0368),
            (0.0337, -0.0417),
            (0.2646, 0.1900),
            (0.0673, -0.0368),
            (0.2926, 0.1973),
        ],
        722 => [
            (0.4751, 0.2973),
            (0.1629, -0.0326),
            (0.1234, -0.0607),
            (0.4488, 0.2678),
            (0.1629, -0.0326),
            (0.4751, 0.2973),
        ],
        723 => [
            (1.2936, 0.6713),
            (0.4871, 0.2111),
            (0.4585, 0.1521),
            (1.3022, 0.6326),
            (0.4871, 0.2111),
            (1.2936, 0.6713),
        ],
        724 => [
            (2.0952, 0.7758),
            (0.5204, 0.2738),
            (0.4926, 0.2123),
            (2.1068, 0.7398),
            (0.5204, 0.2738),
            (2.0952, 0.7758),
        ],
        other => panic!("unknown line configuration {other}"),
    }
}

/// `(from, to, length_ft, configuration)`.
const SEGMENTS: [(u32, u32, f64, u16); 35] = [
    (799, 701, 1850.0, 721),
    (701, 702, 960.0, 722),
    (702, 705, 400.0, 724),
    (702, 713, 360.0, 723),
    (702, 703, 1320.0, 722),
    (703, 727, 240.0, 724),
    (703, 730, 600.0, 723),
    (704, 714, 80.0, 724),
    (704, 720, 800.0, 723),
    (705, 742, 320.0, 724),
    (705, 712, 240.0, 724),
    (706, 725, 280.0, 724),
    (707, 724, 760.0, 724),
    (707, 722, 120.0, 724),
    (708, 733, 320.0, 723),
    (708, 732, 320.0, 724),
    (709, 731, 600.0, 723),
    (709, 708, 320.0, 723),
    (710, 735, 200.0, 724),
    (710, 736, 1280.0, 724),
    (711, 741, 400.0, 723),
    (711, 740, 200.0, 724),
    (713, 704, 520.0, 723),
    (714, 718, 520.0, 724),
    (720, 707, 920.0, 724),
    (720, 706, 600.0, 723),
    (727, 744, 280.0, 723),
    (730, 709, 200.0, 723),
    (733, 734, 560.0, 723),
    (734, 737, 640.0, 723),
    (734, 710, 520.0, 724),
    (737, 738, 400.0, 723),
    (738, 711, 400.0, 723),
    (744, 728, 200.0, 724),
    (744, 729, 280.0, 724),
];

/// Spot loads `(bus, [(kW, kvar) for ab, bc, ca])`.
const LOADS: [(u32, [(f64, f64); 3]); 25] = [
    (701, [(140.0, 70.0), (140.0, 70.0), (350.0, 175.0)]),
    (712, [(0.0, 0.0), (0.0, 0.0), (85.0, 40.0)]),
    (713, [(0.0, 0.0), (0.0, 0.0), (85.0, 40.0)]),
    (714, [(17.0, 8.0), (21.0, 10.0), (0.0, 0.0)]),
    (718, [(85.0, 40.0), (0.0, 0.0), (0.0, 0.0)]),
    (720, [(0.0, 0.0), (0.0, 0.0), (85.0, 40.0)]),
    (722, [(0.0, 0.0), (140.0, 70.0), (21.0, 10.0)]),
    (724, [(0.0, 0.0), (42.0, 21.0), (0.0, 0.0)]),
    (725, [(0.0, 0.0), (42.0, 21.0), (0.0, 0.0)]),
    (727, [(0.0, 0.0), (0.0, 0.0), (42.0, 21.0)]),
    (728, [(42.0, 21.0), (42.0, 21.0), (42.0, 21.0)]),
    (729, [(42.0, 21.0), (0.0, 0.0), (0.0, 0.0)]),
    (730, [(0.0, 0.0), (0.0, 0.0), (85.0, 40.0)]),
    (731, [(0.0, 0.0), (85.0, 40.0), (0.0, 0.0)]),
    (732, [(0.0, 0.0), (0.0, 0.0), (42.0, 21.0)]),
    (733, [(85.0, 40.0), (0.0, 0.0), (0.0, 0.0)]),
    (734, [(0.0, 0.0), (0.0, 0.0), (42.0, 21.0)]),
    (735, [(0.0, 0.0), (0.0, 0.0), (85.0, 40.0)]),
    (736, [(0.0, 0.0), (42.0, 21.0), (0.0, 0.0)]),
    (737, [(140.0, 70.0), (0.0, 0.0), (0.0, 0.0)]),
    (738, [(126.0, 62.0), (0.0, 0.0), (0.0, 0.0)]),
    (740, [(0.0, 0.0), (0.0, 0.0), (85.0, 40.0)]),
    (741, [(0.0, 0.0), (0.0, 0.0), (42.0, 21.0)]),
    (742, [(8.0, 4.0), (85.0, 40.0), (0.0, 0.0)]),
    (744, [(42.0, 21.0), (0.0, 0.0), (0.0, 0.0)]),
];

const XFM1_KVA: f64 = 500.0;
const XFM1_R_PCT: f64 = 0.09;
const XFM1_X_PCT: f64 = 1.81;

fn line_impedance_ohm(config: u16, length_ft: f64) -> PhaseImpedance {
    let t = configuration(config);
    let miles = length_ft / FEET_PER_MILE;
    let c = |k: usize| Complex64::new(t[k].0, t[k].1) * miles;
    PhaseImpedance([[c(0), c(1), c(2)], [c(1), c(3), c(4)], [c(2), c(4), c(5)]])
}

/// How delta-connected spot loads become wye loads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DeltaAdaptation {
    /// Half of `S_xy` on each of phases x and y.
    #[default]
    HalfSplit,
    /// All of `S_ab`, `S_bc`, `S_ca` on phase a, b, c respectively.
    LeadingPhase,
}

impl DeltaAdaptation {
    fn wye(self, delta: [Complex64; 3]) -> [Complex64; 3] {
        match self {
            DeltaAdaptation::LeadingPhase => delta,
            DeltaAdaptation::HalfSplit => [
                (delta[0] + delta[2]) / 2.0,
                (delta[0] + delta[1]) / 2.0,
                (delta[1] + delta[2]) / 2.0,
            ],
        }
    }
}

/// Knobs of the adaptation that the published data leaves open.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ieee37Options {
    pub slack_voltage: f64,
    pub adaptation: DeltaAdaptation,
    /// Voltage base in kV. The default reads the published 4.8 kV as a
    /// line-to-neutral figure, i.e. a base of 4.8·√3 kV.
    pub line_kv: f64,
    /// Per-phase DER rating (MVA) attached to every bus.
    pub der_rating_mva: Option<f64>,
}

impl Default for Ieee37Options {
    fn default() -> Self {
        Ieee37Options {
            slack_voltage: CALIBRATED_SLACK_VOLTAGE,
            adaptation: DeltaAdaptation::default(),
            line_kv: V_BASE_KV * 3f64.sqrt(),
            der_rating_mva: Some(CALIBRATED_S_MAX_MVA),
        }
    }
}

/// The adapted feeder with the given slack voltage magnitude.
pub fn ieee37(slack_voltage: f64) -> Feeder {
    ieee37_with(Ieee37Options {
        slack_voltage,
        ..Ieee37Options::default()
    })
}

pub fn ieee37_with(opts: Ieee37Options) -> Feeder {
    let Ieee37Options {
        slack_voltage,
        adaptation,
        line_kv,
        der_rating_mva,
    } = opts;
    let z_base = line_kv * line_kv / S_BASE_MVA;
    let kw_base = S_BASE_MVA * 1000.0 / 3.0;

    let mut ids: Vec<u32> = vec![SLACK_BUS];
    for (from, to, _, _) in SEGMENTS {
        for id in [from, to] {
            if !ids.contains(&id) {
                ids.push(id);
            }
        }
    }
    ids.push(775);
    ids[1..].sort_unstable();

    let buses = ids
        .iter()
        .map(|&id| {
            let load = LOADS
                .iter()
                .find(|(bus, _)| *bus == id)
                .map(|(_, l)| adaptation.wye(l.map(|(p, q)| Complex64::new(p, q) / kw_base)))
                .unwrap_or([Complex64::new(0.0, 0.0); 3]);
            Bus {
                s_max: der_rating_mva.map(|mva| mva / (S_BASE_MVA / 3.0)),
                ..Bus::new(id, load)
            }
        })
        .collect();

    let mut branches: Vec<Branch> = SEGMENTS
        .iter()
        .map(|&(from, to, len, cfg)| Branch {
            from,
            to,
            z: line_impedance_ohm(cfg, len).scale(1.0 / z_base),
        })
        .collect();
    let xfm_base_ohm = line_kv * line_kv / (XFM1_KVA / 1000.0);
    let zx = Complex64::new(XFM1_R_PCT, XFM1_X_PCT) / 100.0 * xfm_base_ohm / z_base;
    branches.push(Branch {
        from: 709,
        to: 775,
        z: PhaseImpedance::diagonal([zx; 3]),
    });

    Feeder::new(buses, branches, SLACK_BUS, slack_voltage, S_BASE_MVA, line_kv).expect("bundled IEEE 37 data is valid")
}

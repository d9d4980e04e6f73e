use std::io::Write;

use crate::feeder::Feeder;
use crate::phase::Phase;

use super::LoadFlowResult;

/// Writes `bus_id,phase,v_mag_pu,v_ang_deg` rows ordered by bus, then phase.
pub fn write_voltage_csv<W: Write>(out: W, feeder: &Feeder, result: &LoadFlowResult) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["bus_id", "phase", "v_mag_pu", "v_ang_deg"])?;
    let mut order: Vec<usize> = (0..feeder.len()).collect();
    order.sort_by_key(|&i| feeder.buses()[i].id);
    for node in order {
        for p in Phase::ALL {
            if !feeder.buses()[node].has_phase(p) {
                continue;
            }
            let v = result.voltages.phasors[node][p.index()];
            w.write_record([
                feeder.buses()[node].id.to_string(),
                p.to_string(),
                format!("{:.12}", v.norm()),
                format!("{:.9}", v.arg().to_degrees()),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes `from,to,phase,i_mag_pu,i_ang_deg` rows, ordered by receiving bus id
/// then phase; `from` is always the upstream bus.
pub fn write_current_csv<W: Write>(out: W, feeder: &Feeder, result: &LoadFlowResult) -> csv::Result<()> {
    let topo = feeder.topology();
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["from", "to", "phase", "i_mag_pu", "i_ang_deg"])?;
    let mut order: Vec<usize> = (0..feeder.len()).filter(|&i| i != topo.root()).collect();
    order.sort_by_key(|&i| feeder.buses()[i].id);
    for node in order {
        let parent = topo.parent(node).unwrap();
        for p in Phase::ALL {
            if !feeder.buses()[node].has_phase(p) {
                continue;
            }
            let i = result.currents.phasors[node][p.index()];
            w.write_record([
                feeder.buses()[parent].id.to_string(),
                feeder.buses()[node].id.to_string(),
                p.to_string(),
                format!("{:.12}", i.norm()),
                format!("{:.9}", i.arg().to_degrees()),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use clap::ValueEnum;
use hostcap::methods::{DirectionReport, HcReport, RunStatus};
use hostcap::{Feeder, Phase};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// Writes through a temporary file in the same directory, so a failed run
/// never leaves a partial file behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("cannot write into {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.persist(path).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

fn status_str(s: RunStatus) -> &'static str {
    match s {
        RunStatus::Feasible => "feasible",
        RunStatus::Infeasible => "infeasible",
        RunStatus::SolverError => "solver_error",
    }
}

fn csv_bytes(header: &[&str], rows: Vec<Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    Ok(w.into_inner()?)
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".into(), |x| x.to_string())
}

/// Rows per present phase of every bus.
fn phase_rows(feeder: &Feeder, mut row: impl FnMut(usize, Phase) -> Vec<String>) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for (k, bus) in feeder.buses().iter().enumerate() {
        for p in Phase::ALL {
            if bus.has_phase(p) {
                rows.push(row(k, p));
            }
        }
    }
    rows
}

/// Report files keyed by file name, in a fixed order.
pub fn report_files(feeder: &Feeder, report: &HcReport, formats: &[Format]) -> Result<Vec<(String, Vec<u8>)>> {
    let mut files = Vec::new();
    if formats.contains(&Format::Json) {
        let mut bytes = serde_json::to_vec_pretty(report)?;
        bytes.push(b'\n');
        files.push(("report.json".into(), bytes));
    }
    if !formats.contains(&Format::Csv) {
        return Ok(files);
    }
    let dirs: Vec<&DirectionReport> = report.reports().collect();

    let summary = dirs
        .iter()
        .map(|d| {
            let m = d.metrics;
            vec![
                d.direction.as_str().to_string(),
                status_str(d.status).to_string(),
                opt(d.hc_mw),
                d.phase_totals_mw[0].to_string(),
                d.phase_totals_mw[1].to_string(),
                d.phase_totals_mw[2].to_string(),
                m.map_or("NA".into(), |m| m.n_v.to_string()),
                opt(m.map(|m| m.m_v)),
                opt(m.map(|m| m.s_v)),
                opt(m.map(|m| m.w_m)),
                opt(m.map(|m| m.vuf)),
                d.modified_lines.as_ref().map_or("NA".into(), |l| l.len().to_string()),
                d.iterations.map_or("NA".into(), |i| i.to_string()),
            ]
        })
        .collect();
    files.push((
        "summary.csv".into(),
        csv_bytes(
            &[
                "direction", "status", "hc_mw", "hc_a_mw", "hc_b_mw", "hc_c_mw", "n_v", "m_v", "s_v", "w_m", "vuf_pct",
                "modified_lines", "iterations",
            ],
            summary,
        )?,
    ));

    let mut injections = Vec::new();
    let mut profile = Vec::new();
    for d in &dirs {
        let dir = d.direction.as_str();
        injections.extend(phase_rows(feeder, |k, p| {
            vec![dir.into(), feeder.buses()[k].id.to_string(), p.to_string(), d.injections_mw[k][p.index()].to_string()]
        }));
        profile.extend(phase_rows(feeder, |k, p| {
            vec![
                dir.into(),
                feeder.buses()[k].id.to_string(),
                feeder.topology().depth(k).to_string(),
                p.to_string(),
                d.voltages[k][p.index()].to_string(),
                d.predicted[k][p.index()].to_string(),
            ]
        }));
    }
    files.push(("injections.csv".into(), csv_bytes(&["direction", "bus", "phase", "p_mw"], injections)?));
    files.push((
        "voltage_profile.csv".into(),
        csv_bytes(&["direction", "bus", "depth", "phase", "v_validated_pu", "v_predicted_pu"], profile)?,
    ));

    if dirs.iter().any(|d| d.modified_lines.is_some()) {
        let rows = dirs
            .iter()
            .flat_map(|d| {
                d.modified_lines.iter().flatten().map(|[f, t]| vec![d.direction.as_str().to_string(), f.to_string(), t.to_string()])
            })
            .collect();
        files.push(("modified_lines.csv".into(), csv_bytes(&["direction", "from", "to"], rows)?));
    }
    if dirs.iter().any(|d| d.bounds.is_some()) {
        let mut rows = Vec::new();
        for d in &dirs {
            if let Some(b) = &d.bounds {
                rows.extend(phase_rows(feeder, |k, p| {
                    vec![
                        d.direction.as_str().into(),
                        feeder.buses()[k].id.to_string(),
                        p.to_string(),
                        b.v_min[k][p.index()].to_string(),
                        b.v_max[k][p.index()].to_string(),
                    ]
                }));
            }
        }
        files.push((
            "iterative_bounds.csv".into(),
            csv_bytes(&["direction", "bus", "phase", "v_min_pu", "v_max_pu"], rows)?,
        ));
    }
    Ok(files)
}

/// Human-readable summary printed after `compute`.
pub fn summary_table(feeder: &Feeder, report: &HcReport) -> String {
    let mut s = String::new();
    let na = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| format!("{x:.3}"));
    let _ = writeln!(s, "method    {}", report.method);
    let _ = writeln!(s, "feeder    {} buses, slack {}", feeder.len(), feeder.slack_bus());
    let _ = writeln!(s, "HC        [{}, {}] MW", na(report.hc_lower_mw), na(report.hc_upper_mw));
    let _ = writeln!(
        s,
        "{:<9} {:<12} {:>10} {:>5} {:>10} {:>10} {:>8} {:>8}",
        "direction", "status", "HC (MW)", "N_v", "M_v", "S_v", "W_M", "VUF (%)"
    );
    for d in report.reports() {
        let (nv, mv, sv, wm, vuf) = match d.metrics {
            Some(m) => (m.n_v.to_string(), format!("{:.2e}", m.m_v), format!("{:.2e}", m.s_v), format!("{:.4}", m.w_m), format!("{:.3}", m.vuf)),
            None => ("NA".into(), "NA".into(), "NA".into(), "NA".into(), "NA".into()),
        };
        let _ = writeln!(
            s,
            "{:<9} {:<12} {:>10} {:>5} {:>10} {:>10} {:>8} {:>8}",
            d.direction.as_str(),
            status_str(d.status),
            na(d.hc_mw),
            nv,
            mv,
            sv,
            wm,
            vuf
        );
        if let Some(note) = &d.note {
            let _ = writeln!(s, "  note: {note}");
        }
    }
    s
}

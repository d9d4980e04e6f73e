use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::metrics::compute_metrics_with_tolerance;
use super::report::{DirectionReport, HcReport, MethodId, RunStatus};
use super::run::{assemble_report, check_base_case, validate, MethodConfig};
use super::MethodError;
use crate::cia::Direction;
use crate::feeder::Feeder;
use crate::phase::{PerPhase, Phase};

const BISECTION_STEPS: usize = 40;
const MAX_DOUBLINGS: usize = 40;

struct Probe<'a> {
    feeder: &'a Feeder,
    cfg: &'a MethodConfig,
    sign: f64,
}

impl Probe<'_> {
    fn injections(&self, shape: &[PerPhase<f64>], scale: f64) -> Vec<PerPhase<Complex64>> {
        shape.iter().map(|s| s.map(|x| Complex64::new(self.sign * scale * x, 0.0))).collect()
    }

    fn is_clean(&self, shape: &[PerPhase<f64>], scale: f64) -> Result<bool, MethodError> {
        let v = validate(self.feeder, &self.injections(shape, scale), &self.cfg.loadflow)?;
        Ok(v.result.converged
            && compute_metrics_with_tolerance(&v.result.voltages, self.cfg.limits, self.cfg.validation_tolerance).is_clean())
    }

    /// Largest scale keeping the validation clean, capped by the per-bus
    /// apparent-power limits.
    fn largest_scale(&self, shape: &[PerPhase<f64>]) -> Result<f64, MethodError> {
        let mut cap = f64::INFINITY;
        for (node, s) in shape.iter().enumerate() {
            let limit = self.feeder.buses()[node]
                .s_max
                .or(self.cfg.cia.s_max_mva.map(|m| m / self.feeder.phase_base_mw()));
            if let Some(limit) = limit {
                for &x in s {
                    if x > 0.0 {
                        cap = cap.min(limit / x);
                    }
                }
            }
        }
        let (mut lo, mut hi) = (0.0, 1.0f64.min(cap));
        let mut doublings = 0;
        while self.is_clean(shape, hi)? {
            lo = hi;
            if hi >= cap || doublings == MAX_DOUBLINGS {
                return Ok(hi);
            }
            hi = (2.0 * hi).min(cap);
            doublings += 1;
        }
        for _ in 0..BISECTION_STEPS {
            let mid = 0.5 * (lo + hi);
            if self.is_clean(shape, mid)? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(lo)
    }
}

fn run_direction(
    feeder: &Feeder,
    samples: usize,
    rng: &mut ChaCha8Rng,
    direction: Direction,
    cfg: &MethodConfig,
) -> Result<DirectionReport, MethodError> {
    let probe = Probe {
        feeder,
        cfg,
        sign: direction.sign(),
    };
    let slots: Vec<(usize, Phase)> = (0..feeder.len())
        .filter(|&n| n != feeder.slack())
        .flat_map(|n| Phase::ALL.into_iter().filter(move |&p| feeder.buses()[n].has_phase(p)).map(move |p| (n, p)))
        .collect();
    let mut best = (0.0, vec![[0.0; 3]; feeder.len()]);
    for _ in 0..samples {
        let mut shape = vec![[0.0; 3]; feeder.len()];
        let mut total = 0.0;
        for &(n, p) in &slots {
            let x: f64 = rng.gen();
            shape[n][p.index()] = x;
            total += x;
        }
        if !(total > 0.0) {
            continue;
        }
        for row in shape.iter_mut() {
            for x in row.iter_mut() {
                *x /= total;
            }
        }
        let scale = probe.largest_scale(&shape)?;
        if scale > best.0 {
            best = (scale, shape);
        }
    }

    let (scale, shape) = best;
    let injections = probe.injections(&shape, scale);
    let v = validate(feeder, &injections, &cfg.loadflow)?;
    let base = feeder.phase_base_mw();
    let injections_mw: Vec<PerPhase<f64>> = injections.iter().map(|s| s.map(|x| x.re * base)).collect();
    let mut phase_totals_mw = [0.0; 3];
    for row in &injections_mw {
        for k in 0..3 {
            phase_totals_mw[k] += row[k];
        }
    }
    Ok(DirectionReport {
        direction,
        status: RunStatus::Feasible,
        hc_mw: Some(phase_totals_mw.iter().sum()),
        phase_totals_mw,
        injections_mw,
        metrics: Some(compute_metrics_with_tolerance(&v.result.voltages, cfg.limits, cfg.validation_tolerance)),
        validation_converged: v.result.converged,
        voltages: v.result.voltages.magnitudes(),
        predicted: v.result.voltages.magnitudes(),
        note: None,
        modified_lines: None,
        iterations: Some(samples),
        bounds: None,
    })
}

/// Random-search baseline: draws nonnegative injection shapes, scales each
/// to the largest violation-free total by doubling and bisection on the
/// three-phase load flow, and keeps the best. Consumption mirrors it with
/// negated shapes. Deterministic for a fixed seed.
pub fn run_random_search(feeder: &Feeder, samples: usize, seed: u64, cfg: &MethodConfig) -> Result<HcReport, MethodError> {
    let start = Instant::now();
    let method = MethodId::RandomSearch { samples, seed };
    method.validate().map_err(MethodError::InvalidParameter)?;
    check_base_case(feeder, cfg)?;
    let mut directions = Vec::new();
    for &d in &cfg.directions {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ if d == Direction::Maximize { 0 } else { 0x9e37_79b9_7f4a_7c15 });
        directions.push(run_direction(feeder, samples, &mut rng, d, cfg)?);
    }
    Ok(assemble_report(feeder, method, directions, start))
}

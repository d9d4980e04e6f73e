use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::feeder::SinglePhaseFeeder;

/// Sensitivity matrices of one single-phase feeder.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityMatrices {
    pub mp: DMatrix<f64>,
    pub mq: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub dr: DMatrix<f64>,
    pub dx: DMatrix<f64>,
    /// Matrix index → feeder bus index (non-slack buses in feeder order).
    pub nodes: Vec<usize>,
    /// Feeder bus index → matrix index; `None` for the slack.
    pub position: Vec<Option<usize>>,
    /// Squared slack voltage `V0²`.
    pub base_voltage: f64,
}

impl SensitivityMatrices {
    pub fn dim(&self) -> usize {
        self.nodes.len()
    }

    /// Squared voltages from injections and squared currents.
    pub fn voltages(&self, p: &DVector<f64>, q: &DVector<f64>, l: &DVector<f64>) -> DVector<f64> {
        DVector::from_element(self.dim(), self.base_voltage) + &self.mp * p + &self.mq * q - &self.h * l
    }

    pub fn active_flows(&self, p: &DVector<f64>, l: &DVector<f64>) -> DVector<f64> {
        &self.c * p + &self.dr * l
    }

    pub fn reactive_flows(&self, q: &DVector<f64>, l: &DVector<f64>) -> DVector<f64> {
        &self.c * q + &self.dx * l
    }
}

/// Builds all six matrices by one root-to-leaf traversal, O(n²).
///
/// Row `j` of `M_p`, `M_q` and `H` extends the parent's row by the terms of
/// the branch feeding `j`:
///
/// * `M_p[j,k] = M_p[i,k] + 2 r_j` when `k` lies below `j`,
/// * `H[j,f] = H[i,f] + 2(r_j r_f + x_j x_f)` when `f` lies below `j`, minus
///   `|z_j|²` on the diagonal.
pub fn build_sensitivity_matrices(sp: &SinglePhaseFeeder) -> SensitivityMatrices {
    let topo = &sp.topology;
    let n_bus = topo.len();
    let root = topo.root();
    let nodes: Vec<usize> = (0..n_bus).filter(|&i| i != root).collect();
    let mut position = vec![None; n_bus];
    for (k, &node) in nodes.iter().enumerate() {
        position[node] = Some(k);
    }
    let n = nodes.len();

    // below[j][k]: matrix node k lies in the subtree of matrix node j (inclusive)
    let mut below = vec![vec![false; n]; n];
    for (k, &node) in nodes.iter().enumerate() {
        let mut cur = Some(node);
        while let Some(a) = cur {
            if let Some(j) = position[a] {
                below[j][k] = true;
            }
            cur = topo.parent(a);
        }
    }

    let r: Vec<f64> = nodes.iter().map(|&b| sp.r(b)).collect();
    let x: Vec<f64> = nodes.iter().map(|&b| sp.x(b)).collect();

    let mut mp = DMatrix::zeros(n, n);
    let mut mq = DMatrix::zeros(n, n);
    let mut h = DMatrix::zeros(n, n);
    let mut c = DMatrix::zeros(n, n);
    let mut dr = DMatrix::zeros(n, n);
    let mut dx = DMatrix::zeros(n, n);

    for &node in topo.order() {
        let Some(j) = position[node] else { continue };
        let parent = topo.parent(node).and_then(|p| position[p]);
        for k in 0..n {
            let (mut mpv, mut mqv, mut hv) = match parent {
                Some(i) => (mp[(i, k)], mq[(i, k)], h[(i, k)]),
                None => (0.0, 0.0, 0.0),
            };
            if below[j][k] {
                mpv += 2.0 * r[j];
                mqv += 2.0 * x[j];
                hv += 2.0 * (r[j] * r[k] + x[j] * x[k]);
                c[(j, k)] = -1.0;
                dr[(j, k)] = r[k];
                dx[(j, k)] = x[k];
            }
            if k == j {
                hv -= r[k] * r[k] + x[k] * x[k];
            }
            mp[(j, k)] = mpv;
            mq[(j, k)] = mqv;
            h[(j, k)] = hv;
        }
    }

    SensitivityMatrices {
        mp,
        mq,
        h,
        c,
        dr,
        dx,
        nodes,
        position,
        base_voltage: sp.slack_voltage * sp.slack_voltage,
    }
}

/// Writes `matrix,row,col,value` for every nonzero entry.
pub fn write_matrices_csv<W: Write>(out: W, sm: &SensitivityMatrices) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["matrix", "row", "col", "value"])?;
    for (name, m) in [
        ("M_p", &sm.mp),
        ("M_q", &sm.mq),
        ("H", &sm.h),
        ("C", &sm.c),
        ("D_R", &sm.dr),
        ("D_X", &sm.dx),
    ] {
        for row in 0..m.nrows() {
            for col in 0..m.ncols() {
                let v = m[(row, col)];
                if v != 0.0 {
                    w.write_record([name.to_string(), row.to_string(), col.to_string(), format!("{v:e}")])?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feeder::{extract_phase, Branch, Bus, Feeder, ImpedanceMode};
    use crate::phase::{Phase, PhaseImpedance};
    use num_complex::Complex64;

    fn single_branch(r: f64, x: f64) -> SinglePhaseFeeder {
        let f = Feeder::new(
            vec![Bus::new(0, [Complex64::default(); 3]), Bus::new(1, [Complex64::new(0.1, 0.0); 3])],
            vec![Branch {
                from: 0,
                to: 1,
                z: PhaseImpedance::diagonal([Complex64::new(r, x); 3]),
            }],
            0,
            1.0,
            1.0,
            1.0,
        )
        .unwrap();
        extract_phase(&f, Phase::A, ImpedanceMode::Diagonal).unwrap()
    }

    #[test]
    fn single_branch_matrices() {
        let sm = build_sensitivity_matrices(&single_branch(0.01, 0.02));
        assert!((sm.mp[(0, 0)] - 0.02).abs() < 1e-15);
        assert!((sm.mq[(0, 0)] - 0.04).abs() < 1e-15);
        assert!((sm.h[(0, 0)] - 0.0005).abs() < 1e-15);
        assert_eq!(sm.c[(0, 0)], -1.0);
        assert_eq!(sm.dr[(0, 0)], 0.01);
        assert_eq!(sm.dx[(0, 0)], 0.02);
    }

    #[test]
    fn degenerate_impedance_collapses_to_flat_voltage() {
        let sm = build_sensitivity_matrices(&single_branch(1e-12, 1e-12));
        assert!(sm.mp.amax() < 1e-11 && sm.mq.amax() < 1e-11 && sm.h.amax() < 1e-11);
        let v = sm.voltages(&DVector::from_element(1, 0.5), &DVector::from_element(1, 0.2), &DVector::from_element(1, 0.3));
        assert!((v[0] - 1.0).abs() < 1e-11);
    }

    #[test]
    fn csv_lists_nonzeros() {
        let sm = build_sensitivity_matrices(&single_branch(0.01, 0.02));
        let mut buf = Vec::new();
        write_matrices_csv(&mut buf, &sm).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 7);
        assert!(text.contains("C,0,0,-1e0"));
    }
}

use nalgebra::{Matrix3, SymmetricEigen};
use num_complex::Complex64;
use serde::Serialize;

use crate::feeder::SinglePhaseFeeder;
use crate::loadflow::{solve_single_phase, LoadFlowError, LoadFlowOptions};

/// Second-order expansion of `l = (P² + Q²)/V` for one branch around a
/// reference state `(P⁰, Q⁰, V⁰)`, with `V` the squared sending-end voltage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BranchTaylor {
    pub p0: f64,
    pub q0: f64,
    pub v0: f64,
    pub l0: f64,
    /// Gradient with respect to `(P, Q, V)`.
    pub jac: [f64; 3],
    pub hess: [[f64; 3]; 3],
}

impl BranchTaylor {
    pub fn new(p0: f64, q0: f64, v0: f64) -> Self {
        let s2 = p0 * p0 + q0 * q0;
        let (a, b) = (p0 / v0, q0 / v0);
        let k = 2.0 / v0;
        BranchTaylor {
            p0,
            q0,
            v0,
            l0: s2 / v0,
            jac: [2.0 * a, 2.0 * b, -s2 / (v0 * v0)],
            hess: [[k, 0.0, -k * a], [0.0, k, -k * b], [-k * a, -k * b, k * (a * a + b * b)]],
        }
    }

    pub fn jac_pos(&self) -> [f64; 3] {
        self.jac.map(|g| g.max(0.0))
    }

    pub fn jac_neg(&self) -> [f64; 3] {
        self.jac.map(|g| g.min(0.0))
    }

    /// `(P⁰/V⁰, Q⁰/V⁰)`, the coefficients of the factored quadratic form
    /// `δᵀ H δ = (2/V⁰)·[(δP − a δV)² + (δQ − b δV)²]`.
    pub fn quad_coefficients(&self) -> (f64, f64) {
        (self.p0 / self.v0, self.q0 / self.v0)
    }

    pub fn quad_form(&self, d: [f64; 3]) -> f64 {
        let (a, b) = self.quad_coefficients();
        let u = d[0] - a * d[2];
        let w = d[1] - b * d[2];
        2.0 / self.v0 * (u * u + w * w)
    }

    /// Eigenvalues of the Hessian in ascending order.
    pub fn hessian_eigenvalues(&self) -> [f64; 3] {
        let m = Matrix3::from_fn(|i, j| self.hess[i][j]);
        let mut ev: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        [ev[0], ev[1], ev[2]]
    }

    /// Whether the Hessian is positive semidefinite up to `tol`, relative to
    /// its largest eigenvalue.
    pub fn is_convex(&self, tol: f64) -> bool {
        let ev = self.hessian_eigenvalues();
        ev[0] >= -tol * ev[2].abs().max(1.0)
    }
}

/// Reference states for every branch of a single-phase feeder, indexed like
/// the sensitivity matrices (branch `k` feeds matrix node `k`).
#[derive(Debug, Clone, PartialEq)]
pub struct TaylorPoint {
    pub branches: Vec<BranchTaylor>,
}

/// Runs the single-phase load flow with `injections` on top of the loads and
/// expands every branch around the resulting state. `P⁰, Q⁰` are the
/// sending-end flows `V_i·conj(I)` and `V⁰ = |V_i|²` at the sending bus.
pub fn build_taylor_point(
    sp: &SinglePhaseFeeder,
    injections: &[Complex64],
    opts: &LoadFlowOptions,
) -> Result<TaylorPoint, LoadFlowError> {
    let lf = solve_single_phase(sp, injections, opts)?;
    let topo = &sp.topology;
    let branches = (0..sp.len())
        .filter(|&n| n != topo.root())
        .map(|n| {
            let vi = lf.voltages[topo.parent(n).unwrap()];
            let s = vi * lf.currents[n].conj();
            BranchTaylor::new(s.re, s.im, vi.norm_sqr())
        })
        .collect();
    Ok(TaylorPoint { branches })
}

/// Upper (`δ⁺`) and lower (`δ⁻`) deviations of `(P, Q, V)` from the
/// reference state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProxyDeviation {
    pub upper: [f64; 3],
    pub lower: [f64; 3],
}

impl ProxyDeviation {
    /// Deviations of the proxy box `[lo, hi]` from the reference.
    pub fn from_box(t: &BranchTaylor, lo: [f64; 3], hi: [f64; 3]) -> Self {
        let r = [t.p0, t.q0, t.v0];
        ProxyDeviation {
            upper: [hi[0] - r[0], hi[1] - r[1], hi[2] - r[2]],
            lower: [lo[0] - r[0], lo[1] - r[1], lo[2] - r[2]],
        }
    }
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Affine lower bound on `l` over the proxy box:
/// `l⁰ + J₊ᵀ δ⁻ + J₋ᵀ δ⁺`.
///
/// Since `l` is convex the first-order expansion under-estimates it at every
/// point of the box, and this choice of corners minimises that expansion.
pub fn eval_f_aff(t: &BranchTaylor, d: &ProxyDeviation) -> f64 {
    t.l0 + dot(t.jac_pos(), d.lower) + dot(t.jac_neg(), d.upper)
}

/// Components of the quadratic upper bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadBound {
    /// `2·|J₊ᵀ δ⁺ + J₋ᵀ δ⁻|`.
    pub linear: f64,
    /// Largest quadratic form over the eight box corners.
    pub corner: f64,
    /// `l⁰ + max(linear, corner)`.
    pub value: f64,
}

/// Quadratic upper bound on `l` over the proxy box.
///
/// For any point in the box `l − l⁰ = Jᵀδ + ½δᵀHδ ≤ u + ½ψ ≤ max(2u, ψ)`,
/// where `u` is the largest linear term and `ψ` the largest quadratic form
/// (a convex function peaks at a corner).
pub fn eval_f_quad(t: &BranchTaylor, d: &ProxyDeviation) -> QuadBound {
    let u = dot(t.jac_pos(), d.upper) + dot(t.jac_neg(), d.lower);
    let mut corner = f64::NEG_INFINITY;
    for mask in 0..8u8 {
        let pick = |i: usize| if mask & (1 << i) != 0 { d.upper[i] } else { d.lower[i] };
        corner = corner.max(t.quad_form([pick(0), pick(1), pick(2)]));
    }
    let linear = 2.0 * u.abs();
    QuadBound {
        linear,
        corner,
        value: t.l0 + linear.max(corner),
    }
}

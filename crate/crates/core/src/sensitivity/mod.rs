//! Linear branch-flow sensitivities and Taylor-expansion current bounds.
//!
//! For a single-phase radial feeder with `n` non-slack buses, every branch is
//! identified with the bus it feeds, so all matrices are `n × n` and share one
//! index. With `p, q` the net nodal injections (generation positive) and `l`
//! the squared branch currents,
//!
//! ```text
//! V = V0²·1 + M_p p + M_q q − H l
//! P = C p + D_R l
//! Q = C q + D_X l
//! ```
//!
//! holds exactly for any DistFlow solution, where `V` is the squared voltage
//! magnitude and `P, Q` the sending-end branch flows (parent→child positive).

mod matrices;
mod taylor;

pub use matrices::{build_sensitivity_matrices, write_matrices_csv, SensitivityMatrices};
pub use taylor::{build_taylor_point, eval_f_aff, eval_f_quad, BranchTaylor, ProxyDeviation, QuadBound, TaylorPoint};

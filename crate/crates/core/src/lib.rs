//! Hosting-capacity analysis for unbalanced three-phase radial distribution feeders.
//!
//! Each phase of a feeder is analysed with a convex inner approximation of the
//! DistFlow equations, so any nodal injection inside the computed envelope keeps
//! per-phase voltages and currents within limits. Every result is then checked
//! against an exact three-phase backward-forward sweep.
//!
//! Module map:
//!
//! * [`feeder`]: data model, JSON feeder files, phase extraction, scenarios,
//!   synthetic feeders and the bundled IEEE 37-node data.
//! * [`loadflow`]: single- and three-phase backward-forward sweeps and the
//!   mutual-coupling voltage estimator.
//! * [`sensitivity`]: linear sensitivity matrices of the branch-flow model and
//!   the Taylor-expansion current bounds.
//! * [`cia`]: assembly and solution of the convex hosting-capacity programs.
//! * [`methods`]: end-to-end methods (balanced approximations, per-phase,
//!   Mod-Z, iterative bounds, random search) and violation metrics.

pub mod cia;
pub mod error;
pub mod feeder;
pub mod loadflow;
pub mod methods;
pub mod phase;
pub mod sensitivity;

pub use error::{Error, Result};
pub use feeder::{Bus, Branch, Feeder, SinglePhaseFeeder};
pub use phase::{Phase, PhaseImpedance};

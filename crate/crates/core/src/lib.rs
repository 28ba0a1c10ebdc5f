//! Battery toolkit: two-sub-cell equivalent-circuit simulation of recoverable
//! capacity loss from lateral lithium inhomogeneity, differential-evolution
//! parameter fitting, early cycle-life prediction with nested cross-validation,
//! and capacity-recovery statistics with exact Shapley attribution.
//!
//! The crate is organized around five subsystems:
//!
//! - [`ecm`] — the circuit model itself: electrode open-circuit-potential
//!   curves, parameters, state, and the instantaneous network solution.
//! - [`protocol`] — time integration of the model through charge/discharge/
//!   hold/rest protocols with cutoff event detection.
//! - [`fit`] — bound-constrained differential evolution and the nonlinear
//!   least-squares fits built on it (full model fit, relaxation exponential).
//! - [`predict`] — discharge-curve features, cycle-life labeling, and the
//!   LR/GPR/GBR regressors under nested cross-validation.
//! - [`recovery`] — recovery-rate metrics, linear recovery regression, and
//!   exact Shapley feature importance.
//!
//! File formats (OCP tables, protocol files, cycling/recovery CSVs) live in
//! [`io`] together with the synthetic-fleet generator. Runnable entry points
//! for each capability are under `examples/`; the `battkit` binary exposes the
//! same operations as subcommands.

pub mod ecm;
pub mod fit;
pub mod io;
pub mod predict;
pub mod protocol;
pub mod recovery;

pub use ecm::{EcmError, EcmParameters, EcmState, ElectrodeCurve, NetworkSolution};
pub use protocol::{Protocol, ProtocolStep, SimulationTrace};

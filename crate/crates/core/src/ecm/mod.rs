//! The two-sub-cell equivalent circuit.
//!
//! The cell is split laterally into two parallel sub-cells. Each sub-cell has
//! its own positive and negative electrode, both modeled as an open-circuit
//! potential source in series with the sub-cell's branch resistance, and the
//! two sub-cells' electrolyte mid-nodes are connected through a bridge
//! resistance. The bridge is the only path by which lithium inventory can move
//! laterally between sub-cells, so an uneven branch resistance slowly builds
//! an inventory imbalance during cycling.
//!
//! Everything here is an instantaneous, algebraic description: given electrode
//! stoichiometries, [`solve_network`] returns the unique branch currents and
//! node potentials, and [`state_derivative`] converts them into stoichiometry
//! rates. Time integration lives in [`crate::protocol`].

mod curve;
mod network;
mod params;
mod state;

pub use curve::{ElectrodeCurve, ElectrodeKind};
pub use network::{
    network_residual, solve_network, state_derivative, subcell_lithium, NetworkSolution,
    TerminalConstraint,
};
pub use params::EcmParameters;
pub use state::EcmState;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EcmError {
    #[error("electrode curve needs at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("electrode curve stoichiometries must be strictly increasing (sample {index}: {z} after {prev})")]
    NonIncreasingZ { index: usize, z: f64, prev: f64 },
    #[error("electrode potential must be non-increasing in stoichiometry (sample {index}: {potential} V after {prev} V)")]
    NonMonotonePotential {
        index: usize,
        potential: f64,
        prev: f64,
    },
    #[error("non-finite value in electrode curve at sample {0}")]
    NonFiniteSample(usize),
    #[error("{name} must be strictly positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("resistance ratio k must be >= 1 (sub-cell 1 is the higher-resistance branch), got {0}")]
    KBelowOne(f64),
    #[error("initial stoichiometry {name} must lie in [0, 1], got {value}")]
    StoichiometryOutOfRange { name: &'static str, value: f64 },
    #[error("expected a {expected:?} electrode curve, got {got:?}")]
    WrongElectrodeKind {
        expected: ElectrodeKind,
        got: ElectrodeKind,
    },
    #[error("open-circuit potential evaluated to a non-finite value at z = {0}")]
    NonFiniteOcp(f64),
    #[error("terminal constraint value must be finite")]
    NonFiniteConstraint,
    #[error("state contains a non-finite stoichiometry")]
    NonFiniteState,
    #[error("OCP table {path}: {message} (line {line})")]
    OcpFile {
        path: String,
        line: usize,
        message: String,
    },
    #[error("parameter file {path}: {message}")]
    ParamsFile { path: String, message: String },
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

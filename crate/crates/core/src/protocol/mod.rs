//! Protocol-driven time integration of the circuit model.
//!
//! A [`Protocol`] is an ordered list of repeated blocks of steps (constant
//! current to a voltage cutoff, constant-voltage hold, rest). [`run_protocol`]
//! integrates the stoichiometry ODE through the chain, detecting cutoff
//! events, and produces a [`SimulationTrace`] from which per-cycle charge and
//! discharge capacities are extracted.

mod integrate;
mod sim;
mod step;

pub use sim::{
    extract_cycle_capacities, run_protocol, run_step, CycleCapacity, IntegrationSettings,
    SimError, SimFailure, SimulationTrace, TraceRow,
};
pub use step::{Protocol, ProtocolBlock, ProtocolError, ProtocolStep, StepKind};

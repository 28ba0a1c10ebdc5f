//! Fitting the circuit model to reference voltage data.
//!
//! The objective is the mean squared voltage error over the selected
//! reference segments: each candidate parameter vector is simulated through
//! the fitting protocol and the simulated voltage is linearly interpolated at
//! every reference timestamp. Candidates whose simulation fails score +inf
//! rather than aborting the fit.

use super::{differential_evolution, DeSettings, FitError, FitResult, ParameterBounds};
use crate::ecm::{EcmParameters, EcmState, ElectrodeCurve};
use crate::protocol::{run_protocol, IntegrationSettings, Protocol, SimulationTrace};

/// One reference voltage series, time-stamped in protocol time.
#[derive(Debug, Clone)]
pub struct VoltageSegment {
    pub name: String,
    pub samples: Vec<(f64, f64)>,
}

/// What to fit against: the protocol to simulate and the reference segments
/// entering the loss.
#[derive(Debug, Clone)]
pub struct FitObjectiveSpec {
    pub protocol: Protocol,
    pub segments: Vec<VoltageSegment>,
    pub sim_settings: IntegrationSettings,
}

#[derive(Debug, Clone)]
pub struct EcmFitOutcome {
    pub result: FitResult,
    pub params: EcmParameters,
}

/// Assemble a parameter set from a fit vector in the canonical bound order
/// (r2, k, ke, q_max_neg, r_np, z1_neg, z1_pos, z2_neg, z2_pos).
pub fn params_from_vector(
    x: &[f64],
    ocp_neg: &ElectrodeCurve,
    ocp_pos: &ElectrodeCurve,
) -> Result<EcmParameters, FitError> {
    if x.len() != 9 {
        return Err(FitError::DimensionMismatch {
            expected: 9,
            got: x.len(),
        });
    }
    Ok(EcmParameters::new(
        x[0],
        x[1],
        x[2],
        x[3],
        x[4],
        ocp_neg.clone(),
        ocp_pos.clone(),
        [x[5], x[6], x[7], x[8]],
    )?)
}

/// Extract reference segments from a simulated trace, one per requested
/// cycle index.
pub fn segments_from_trace(trace: &SimulationTrace, cycles: &[u32]) -> Vec<VoltageSegment> {
    cycles
        .iter()
        .map(|&c| VoltageSegment {
            name: format!("cycle_{c}"),
            samples: trace
                .rows
                .iter()
                .filter(|r| r.cycle_index == c)
                .map(|r| (r.t, r.v_terminal))
                .collect(),
        })
        .collect()
}

fn interp_voltage(trace: &SimulationTrace, t: f64) -> f64 {
    let rows = &trace.rows;
    match rows.binary_search_by(|r| r.t.partial_cmp(&t).unwrap()) {
        Ok(i) => rows[i].v_terminal,
        Err(0) => rows[0].v_terminal,
        Err(i) if i >= rows.len() => rows[rows.len() - 1].v_terminal,
        Err(i) => {
            let (a, b) = (&rows[i - 1], &rows[i]);
            let w = (t - a.t) / (b.t - a.t);
            a.v_terminal + w * (b.v_terminal - a.v_terminal)
        }
    }
}

/// Mean squared voltage error of one parameter set against the reference.
pub fn objective_for(
    spec: &FitObjectiveSpec,
    params: &EcmParameters,
) -> f64 {
    let state = match EcmState::new(params.z0, 0.0) {
        Ok(s) => s,
        Err(_) => return f64::INFINITY,
    };
    let trace = match run_protocol(params, &state, &spec.protocol, &spec.sim_settings) {
        Ok(t) => t,
        Err(_) => return f64::INFINITY,
    };
    if trace.rows.len() < 2 {
        return f64::INFINITY;
    }
    let mut acc = 0.0;
    let mut n = 0usize;
    for seg in &spec.segments {
        for &(t, v_ref) in &seg.samples {
            let dv = interp_voltage(&trace, t) - v_ref;
            acc += dv * dv;
            n += 1;
        }
    }
    acc / n as f64
}

/// Differential-evolution fit of the nine circuit parameters to reference
/// voltage segments.
pub fn fit_ecm(
    spec: &FitObjectiveSpec,
    bounds: &ParameterBounds,
    ocp_neg: &ElectrodeCurve,
    ocp_pos: &ElectrodeCurve,
    settings: &DeSettings,
) -> Result<EcmFitOutcome, FitError> {
    if spec.segments.is_empty() || spec.segments.iter().all(|s| s.samples.is_empty()) {
        return Err(FitError::EmptyReference);
    }
    if bounds.dimension() != 9 {
        return Err(FitError::DimensionMismatch {
            expected: 9,
            got: bounds.dimension(),
        });
    }
    let objective = |x: &[f64]| -> f64 {
        match params_from_vector(x, ocp_neg, ocp_pos) {
            Ok(p) => objective_for(spec, &p),
            Err(_) => f64::INFINITY,
        }
    };
    let result = differential_evolution(objective, bounds, settings)?;
    let params = params_from_vector(&result.best, ocp_neg, ocp_pos)?;
    Ok(EcmFitOutcome { result, params })
}

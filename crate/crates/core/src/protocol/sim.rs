use std::fmt;
use std::io::Write;
use std::sync::Arc;

use super::integrate::{dopri5_step, hermite};
use super::step::{Protocol, ProtocolStep, StepKind};
use crate::ecm::{
    solve_network, state_derivative, subcell_lithium, EcmError, EcmParameters, EcmState,
    NetworkSolution, TerminalConstraint,
};

/// Integrator and output settings for one simulation run.
#[derive(Debug, Clone)]
pub struct IntegrationSettings {
    /// Relative tolerance on the stoichiometries.
    pub rtol: f64,
    /// Absolute tolerance on the stoichiometries.
    pub atol: f64,
    /// Trace cadence during constant-current steps, seconds.
    pub output_dt_cc_s: f64,
    /// Trace cadence during holds and rests, seconds.
    pub output_dt_hold_s: f64,
    /// Extra trace rows are emitted (and steps shortened) so consecutive
    /// rows never differ by more than about twice this voltage.
    pub max_output_dv_v: f64,
    /// Cutoff events are localized to within this much time...
    pub event_time_tol_s: f64,
    /// ...or this close in voltage, whichever is met first.
    pub event_voltage_tol_v: f64,
    /// A cc step without an explicit duration cap fails after this long.
    pub max_cc_duration_s: f64,
    /// Hard cap on integrator steps (accepted + rejected) per protocol step.
    pub max_steps_per_segment: usize,
}

impl Default for IntegrationSettings {
    fn default() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-10,
            output_dt_cc_s: 10.0,
            output_dt_hold_s: 60.0,
            max_output_dv_v: 0.02,
            event_time_tol_s: 0.1,
            event_voltage_tol_v: 1e-3,
            max_cc_duration_s: 30.0 * 86400.0,
            max_steps_per_segment: 20_000_000,
        }
    }
}

/// One sampled instant of a simulation.
#[derive(Debug, Clone)]
pub struct TraceRow {
    pub t: f64,
    pub v_terminal: f64,
    /// Terminal current, positive = discharge.
    pub i_terminal: f64,
    /// (z1_neg, z1_pos, z2_neg, z2_pos)
    pub z: [f64; 4],
    /// Bridge current, positive = lithium flowing into sub-cell 1.
    pub i_bridge: f64,
    pub n1_ah: f64,
    pub n2_ah: f64,
    pub step_label: Arc<str>,
    pub cycle_index: u32,
    pub kind: StepKind,
}

/// Time-ordered simulation output. Row times are strictly increasing; every
/// row is an exact network solution at its stoichiometries.
#[derive(Debug, Clone, Default)]
pub struct SimulationTrace {
    pub rows: Vec<TraceRow>,
    /// Number of accepted steps on which a stoichiometry had to be clamped
    /// back into [0, 1].
    pub clip_count: u64,
    pub warnings: Vec<String>,
}

impl SimulationTrace {
    pub fn final_state(&self) -> Option<EcmState> {
        self.rows.last().map(|r| EcmState {
            z: r.z,
            t: r.t,
        })
    }

    pub const CSV_HEADER: &'static str =
        "t_s,v_terminal_V,i_terminal_A,z1_neg,z1_pos,z2_neg,z2_pos,i_bridge_A,n1_Ah,n2_Ah,step_label,cycle_index";

    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "{}", Self::CSV_HEADER)?;
        for r in &self.rows {
            writeln!(
                w,
                "{:.6},{:.9},{:.9},{:.12},{:.12},{:.12},{:.12},{:.9e},{:.9},{:.9},{},{}",
                r.t,
                r.v_terminal,
                r.i_terminal,
                r.z[0],
                r.z[1],
                r.z[2],
                r.z[3],
                r.i_bridge,
                r.n1_ah,
                r.n2_ah,
                r.step_label,
                r.cycle_index
            )?;
        }
        Ok(())
    }
}

#[derive(Debug)]
pub enum SimFailure {
    Network(EcmError),
    NonFiniteState,
    /// The cc cutoff was not reached before the duration guard expired.
    CutoffUnreachable,
    StepLimitExceeded,
}

impl fmt::Display for SimFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimFailure::Network(e) => write!(f, "network solve failed: {e}"),
            SimFailure::NonFiniteState => write!(f, "state became non-finite"),
            SimFailure::CutoffUnreachable => write!(f, "voltage cutoff not reached"),
            SimFailure::StepLimitExceeded => write!(f, "integrator step limit exceeded"),
        }
    }
}

/// A simulation error, carrying the trace accumulated up to the failure and
/// the identity of the failing step.
#[derive(Debug)]
pub struct SimError {
    pub failure: SimFailure,
    pub step_label: String,
    pub block: usize,
    pub repetition: u32,
    pub t: f64,
    pub partial: SimulationTrace,
}

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} in step `{}` (block {}, repetition {}) at t = {:.3} s",
            self.failure, self.step_label, self.block, self.repetition, self.t
        )
    }
}

impl std::error::Error for SimError {}

struct InnerFailure {
    failure: SimFailure,
    t: f64,
}

struct StepContext<'a> {
    params: &'a EcmParameters,
    settings: &'a IntegrationSettings,
    cycle_index: u32,
    emit_start: bool,
}

fn row_from_solution(
    params: &EcmParameters,
    t: f64,
    z: [f64; 4],
    sol: &NetworkSolution,
    label: &Arc<str>,
    cycle_index: u32,
    kind: StepKind,
) -> TraceRow {
    let state = EcmState { z, t };
    let (n1, n2, _) = subcell_lithium(params, &state);
    TraceRow {
        t,
        v_terminal: sol.v_terminal,
        i_terminal: sol.i_terminal(),
        z,
        i_bridge: sol.i_bridge,
        n1_ah: n1,
        n2_ah: n2,
        step_label: label.clone(),
        cycle_index,
        kind,
    }
}

/// Integrate one protocol step. Appends rows to `trace` and returns the state
/// at the step's end.
fn run_step_inner(
    ctx: &StepContext<'_>,
    state: EcmState,
    step: &ProtocolStep,
    trace: &mut SimulationTrace,
) -> Result<EcmState, InnerFailure> {
    let params = ctx.params;
    let s = ctx.settings;
    let label: Arc<str> = Arc::from(step.label.as_str());

    let constraint = match step.kind {
        StepKind::CcCharge => TerminalConstraint::Current(-step.current_a.unwrap()),
        StepKind::CcDischarge => TerminalConstraint::Current(step.current_a.unwrap()),
        StepKind::CvHold => TerminalConstraint::Voltage(step.voltage_v.unwrap()),
        StepKind::Rest => TerminalConstraint::Current(0.0),
    };
    // cc cutoff: (threshold, rising) -- charge crosses from below, discharge
    // from above
    let cutoff = match step.kind {
        StepKind::CcCharge => Some((step.voltage_v.unwrap(), true)),
        StepKind::CcDischarge => Some((step.voltage_v.unwrap(), false)),
        _ => None,
    };
    let dt_out = match step.kind {
        StepKind::CcCharge | StepKind::CcDischarge => s.output_dt_cc_s,
        _ => s.output_dt_hold_s,
    };
    let (t_end, capped_by_duration) = match step.duration_s {
        Some(d) => (state.t + d, true),
        None => (state.t + s.max_cc_duration_s, false),
    };

    let fail = |failure: SimFailure, t: f64| InnerFailure { failure, t };
    let solve = |z: &[f64; 4], t: f64| -> Result<NetworkSolution, InnerFailure> {
        let st = EcmState { z: *z, t };
        solve_network(params, &st, constraint).map_err(|e| fail(SimFailure::Network(e), t))
    };

    let mut t = state.t;
    let mut z = state.z;
    let sol0 = solve(&z, t)?;
    if !sol0.v_terminal.is_finite() {
        return Err(fail(SimFailure::NonFiniteState, t));
    }
    if ctx.emit_start {
        trace
            .rows
            .push(row_from_solution(params, t, z, &sol0, &label, ctx.cycle_index, step.kind));
    }
    // already past the cutoff: zero-length step
    if let Some((vcut, rising)) = cutoff {
        if (rising && sol0.v_terminal >= vcut) || (!rising && sol0.v_terminal <= vcut) {
            return Ok(EcmState { z, t });
        }
    }

    let deriv = |zz: &[f64; 4]| -> Result<[f64; 4], EcmError> {
        let st = EcmState { z: *zz, t: 0.0 };
        let sol = solve_network(params, &st, constraint)?;
        Ok(state_derivative(params, &st, &sol))
    };

    let mut f0 = deriv(&z).map_err(|e| fail(SimFailure::Network(e), t))?;
    let mut v_prev = sol0.v_terminal;
    let mut v_emitted = sol0.v_terminal;
    let mut v_slew = 0.0f64; // |dv/dt| estimate from the last accepted step
    let mut h_nat: f64 = 1.0_f64.min(dt_out);
    let mut next_out = t + dt_out;
    let mut nsteps = 0usize;
    let time_eps = 1e-9 * t_end.abs().max(1.0);

    while t < t_end - time_eps {
        let t_target = next_out.min(t_end);
        // keep one step's voltage change under the output resolution
        let h_dv = if v_slew > 0.0 {
            (0.9 * s.max_output_dv_v / v_slew).max(s.event_time_tol_s.min(1e-2))
        } else {
            f64::INFINITY
        };
        let h_try = h_nat.min(h_dv).min(t_target - t);
        let clipped = h_try >= t_target - t - time_eps;
        nsteps += 1;
        if nsteps > s.max_steps_per_segment {
            return Err(fail(SimFailure::StepLimitExceeded, t));
        }
        let trial = dopri5_step(deriv, &z, &f0, h_try, s.rtol, s.atol)
            .map_err(|e| fail(SimFailure::Network(e), t))?;
        if !trial.y_new.iter().all(|v| v.is_finite()) {
            return Err(fail(SimFailure::NonFiniteState, t));
        }
        if trial.error_norm > 1.0 {
            h_nat = h_try * (0.9 * trial.error_norm.powf(-0.2)).max(0.2);
            h_nat = h_nat.max(1e-9);
            continue;
        }

        let t_new = if clipped { t_target } else { t + h_try };
        let sol_new = solve(&trial.y_new, t_new)?;

        // cutoff crossing inside this step
        if let Some((vcut, rising)) = cutoff {
            let crossed = if rising {
                v_prev < vcut && sol_new.v_terminal >= vcut
            } else {
                v_prev > vcut && sol_new.v_terminal <= vcut
            };
            if crossed {
                let (ze, te, sole) = locate_event(
                    &z, &f0, &trial.y_new, &trial.f_new, h_try, t, vcut, rising, s, &solve,
                )?;
                let mut ze = ze;
                clamp_state(&mut ze, trace);
                trace.rows.push(row_from_solution(
                    params, te, ze, &sole, &label, ctx.cycle_index, step.kind,
                ));
                return Ok(EcmState { z: ze, t: te });
            }
        }

        t = t_new;
        z = trial.y_new;
        let clamped = clamp_state(&mut z, trace);
        f0 = if clamped {
            deriv(&z).map_err(|e| fail(SimFailure::Network(e), t))?
        } else {
            trial.f_new
        };
        v_slew = (sol_new.v_terminal - v_prev).abs() / h_try;
        v_prev = sol_new.v_terminal;

        let grow = (0.9 * trial.error_norm.powf(-0.2)).clamp(0.3, 5.0);
        h_nat = (h_try * grow).clamp(1e-9, 10.0 * dt_out.max(60.0));

        if clipped || (sol_new.v_terminal - v_emitted).abs() >= s.max_output_dv_v {
            trace.rows.push(row_from_solution(
                params, t, z, &sol_new, &label, ctx.cycle_index, step.kind,
            ));
            v_emitted = sol_new.v_terminal;
            if clipped && (next_out - t).abs() <= time_eps {
                next_out += dt_out;
            }
        }
    }

    if !capped_by_duration {
        // only cc steps can get here: the guard duration expired
        return Err(fail(SimFailure::CutoffUnreachable, t));
    }
    Ok(EcmState { z, t })
}

/// Clamp stoichiometries back into [0, 1]; returns whether anything moved.
fn clamp_state(z: &mut [f64; 4], trace: &mut SimulationTrace) -> bool {
    let mut clamped = false;
    for v in z.iter_mut() {
        if *v < 0.0 || *v > 1.0 {
            *v = v.clamp(0.0, 1.0);
            clamped = true;
        }
    }
    if clamped {
        trace.clip_count += 1;
        if trace.clip_count == 1 {
            trace
                .warnings
                .push("stoichiometry clipped to [0, 1]; lithium conservation no longer exact".to_string());
        }
    }
    clamped
}

#[allow(clippy::too_many_arguments)]
fn locate_event(
    z0: &[f64; 4],
    f0: &[f64; 4],
    z1: &[f64; 4],
    f1: &[f64; 4],
    h: f64,
    t0: f64,
    vcut: f64,
    rising: bool,
    settings: &IntegrationSettings,
    solve: &impl Fn(&[f64; 4], f64) -> Result<NetworkSolution, InnerFailure>,
) -> Result<([f64; 4], f64, NetworkSolution), InnerFailure> {
    // bisection on the Hermite interpolant between the accepted endpoints
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    let mut best = (*z1, t0 + h, solve(z1, t0 + h)?);
    for _ in 0..200 {
        if h * (hi - lo) <= settings.event_time_tol_s {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let zm = hermite(z0, f0, z1, f1, h, mid);
        let tm = t0 + mid * h;
        let solm = solve(&zm, tm)?;
        let past = if rising {
            solm.v_terminal >= vcut
        } else {
            solm.v_terminal <= vcut
        };
        if past {
            hi = mid;
            best = (zm, tm, solm);
            if (best.2.v_terminal - vcut).abs() <= settings.event_voltage_tol_v {
                break;
            }
        } else {
            lo = mid;
        }
    }
    Ok(best)
}

/// Integrate a single step starting from `state`. The returned trace segment
/// includes both the start and end instants.
pub fn run_step(
    params: &EcmParameters,
    state: &EcmState,
    step: &ProtocolStep,
    settings: &IntegrationSettings,
) -> Result<(EcmState, SimulationTrace), SimError> {
    step.validate().map_err(|e| SimError {
        failure: SimFailure::Network(EcmError::NonFiniteConstraint),
        step_label: format!("{e}"),
        block: 0,
        repetition: 1,
        t: state.t,
        partial: SimulationTrace::default(),
    })?;
    let mut trace = SimulationTrace::default();
    let ctx = StepContext {
        params,
        settings,
        cycle_index: 1,
        emit_start: true,
    };
    match run_step_inner(&ctx, *state, step, &mut trace) {
        Ok(end) => Ok((end, trace)),
        Err(inner) => Err(SimError {
            failure: inner.failure,
            step_label: step.label.clone(),
            block: 0,
            repetition: 1,
            t: inner.t,
            partial: trace,
        }),
    }
}

/// Chain every block and repetition of a protocol. Each repetition of each
/// block gets the next global cycle index (starting at 1); the concatenated
/// trace has strictly increasing times with no gaps or overlaps.
pub fn run_protocol(
    params: &EcmParameters,
    initial: &EcmState,
    protocol: &Protocol,
    settings: &IntegrationSettings,
) -> Result<SimulationTrace, SimError> {
    let mut trace = SimulationTrace::default();
    let mut state = *initial;
    let mut cycle_index = 0u32;
    for (block_idx, block) in protocol.blocks.iter().enumerate() {
        for rep in 1..=block.repetitions {
            cycle_index += 1;
            for step in &block.steps {
                let ctx = StepContext {
                    params,
                    settings,
                    cycle_index,
                    emit_start: trace.rows.is_empty(),
                };
                match run_step_inner(&ctx, state, step, &mut trace) {
                    Ok(end) => state = end,
                    Err(inner) => {
                        return Err(SimError {
                            failure: inner.failure,
                            step_label: step.label.clone(),
                            block: block_idx,
                            repetition: rep,
                            t: inner.t,
                            partial: trace,
                        })
                    }
                }
            }
        }
    }
    Ok(trace)
}

/// Per-cycle charge and discharge capacity in ampere-hours. A cycle missing
/// a charge or discharge segment reports `None` for that entry.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleCapacity {
    pub cycle_index: u32,
    pub charge_ah: Option<f64>,
    pub discharge_ah: Option<f64>,
}

/// Integrate |i| dt over the cc segments of each cycle of a trace.
pub fn extract_cycle_capacities(trace: &SimulationTrace) -> Vec<CycleCapacity> {
    use std::collections::BTreeMap;
    let mut acc: BTreeMap<u32, (Option<f64>, Option<f64>)> = BTreeMap::new();
    let rows = &trace.rows;
    let mut i = 0usize;
    while i < rows.len() {
        let cycle = rows[i].cycle_index;
        acc.entry(cycle).or_insert((None, None));
        let kind = rows[i].kind;
        let label = rows[i].step_label.clone();
        let mut j = i;
        while j + 1 < rows.len()
            && rows[j + 1].cycle_index == cycle
            && rows[j + 1].kind == kind
            && rows[j + 1].step_label == label
        {
            j += 1;
        }
        if matches!(kind, StepKind::CcCharge | StepKind::CcDischarge) {
            let mut q = 0.0;
            // the instant before this run belongs to the previous step; the
            // segment physically starts there with this run's current
            if i > 0 {
                q += rows[i].i_terminal.abs() * (rows[i].t - rows[i - 1].t);
            }
            for k in i..j {
                q += 0.5
                    * (rows[k].i_terminal.abs() + rows[k + 1].i_terminal.abs())
                    * (rows[k + 1].t - rows[k].t);
            }
            let q_ah = q / 3600.0;
            let entry = acc.get_mut(&cycle).unwrap();
            match kind {
                StepKind::CcCharge => *entry = (Some(entry.0.unwrap_or(0.0) + q_ah), entry.1),
                StepKind::CcDischarge => *entry = (entry.0, Some(entry.1.unwrap_or(0.0) + q_ah)),
                _ => unreachable!(),
            }
        }
        i = j + 1;
    }
    acc.into_iter()
        .map(|(cycle_index, (charge_ah, discharge_ah))| CycleCapacity {
            cycle_index,
            charge_ah,
            discharge_ah,
        })
        .collect()
}

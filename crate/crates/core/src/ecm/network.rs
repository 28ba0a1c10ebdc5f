//! Instantaneous solution of the resistor network.
//!
//! Node layout: positive terminal P, electrolyte mid-nodes M1/M2 (one per
//! sub-cell), negative terminal N as the potential reference. Each sub-cell k
//! contributes a cathode branch (source U+_k in series with R_k) from M_k to P
//! and an anode branch (source U-_k in series with R_k) from N to M_k; the
//! bridge resistance R_e connects M1 and M2.
//!
//! Sign conventions, used consistently across the crate:
//! - terminal current positive = discharge;
//! - cathode branch current `i_k` positive from M_k to P, anode branch
//!   current `j_k` positive from N to M_k (both positive while discharging);
//! - bridge current `i_e = i_k - j_k` for sub-cell 1, i.e. positive `i_e`
//!   transfers lithium-equivalent charge from sub-cell 2 into sub-cell 1,
//!   so that dN1/dt = i_e / 3600 Ah/s exactly.

use super::{EcmError, EcmParameters, EcmState};

/// Imposed terminal condition for one network solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TerminalConstraint {
    /// Terminal current in amperes, positive = discharge.
    Current(f64),
    /// Terminal voltage in volts.
    Voltage(f64),
}

/// Branch currents and node potentials of one network solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetworkSolution {
    /// Cathode branch currents (i1, i2), amperes.
    pub i_pos: [f64; 2],
    /// Anode branch currents (j1, j2), amperes.
    pub i_neg: [f64; 2],
    /// Bridge current, positive = lithium-equivalent charge flowing into
    /// sub-cell 1; equals (phi2 - phi1)/Re and i1 - j1.
    pub i_bridge: f64,
    /// Terminal voltage, volts.
    pub v_terminal: f64,
    /// Mid-node (electrolyte) potentials, volts vs the negative terminal.
    pub phi_mid: [f64; 2],
}

impl NetworkSolution {
    /// Terminal current, positive = discharge.
    pub fn i_terminal(&self) -> f64 {
        self.i_pos[0] + self.i_pos[1]
    }
}

/// Open-circuit potentials of the four electrodes at the given state.
fn ocps(params: &EcmParameters, state: &EcmState) -> Result<[f64; 4], EcmError> {
    let u = [
        params.ocp_neg.potential_at(state.z_neg(0)),
        params.ocp_pos.potential_at(state.z_pos(0)),
        params.ocp_neg.potential_at(state.z_neg(1)),
        params.ocp_pos.potential_at(state.z_pos(1)),
    ];
    for (idx, v) in u.iter().enumerate() {
        if !v.is_finite() {
            return Err(EcmError::NonFiniteOcp(state.z[idx]));
        }
    }
    Ok(u)
}

fn solve2(a: [[f64; 2]; 2], b: [f64; 2]) -> [f64; 2] {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    [
        (b[0] * a[1][1] - a[0][1] * b[1]) / det,
        (a[0][0] * b[1] - b[0] * a[1][0]) / det,
    ]
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> [f64; 3] {
    // Gaussian elimination with partial pivoting; the system is 3x3 and
    // well-conditioned for any positive resistances.
    for col in 0..3 {
        let pivot = (col..3)
            .max_by(|&r, &s| a[r][col].abs().partial_cmp(&a[s][col].abs()).unwrap())
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for c in col..3 {
                a[row][c] -= f * a[col][c];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let mut acc = b[row];
        for c in row + 1..3 {
            acc -= a[row][c] * x[c];
        }
        x[row] = acc / a[row][row];
    }
    x
}

/// Solve the linear resistor network with the OCV sources frozen at the
/// current stoichiometries. Under an imposed current the returned
/// `v_terminal` is the induced voltage; under an imposed voltage the induced
/// terminal current is `i_pos[0] + i_pos[1]`.
pub fn solve_network(
    params: &EcmParameters,
    state: &EcmState,
    constraint: TerminalConstraint,
) -> Result<NetworkSolution, EcmError> {
    let value = match constraint {
        TerminalConstraint::Current(i) => i,
        TerminalConstraint::Voltage(v) => v,
    };
    if !value.is_finite() {
        return Err(EcmError::NonFiniteConstraint);
    }
    let [un1, up1, un2, up2] = ocps(params, state)?;
    let r1 = params.branch_resistance(0);
    let r2 = params.branch_resistance(1);
    let re = params.bridge_resistance();

    // Mid-node balance rows: (2/Rk + 1/Re) phi_k - phi_other/Re - V/Rk = -s_k
    // with s_k = (U+_k + U-_k)/Rk.
    let a1 = 2.0 / r1 + 1.0 / re;
    let a2 = 2.0 / r2 + 1.0 / re;
    let g = 1.0 / re;
    let s1 = (up1 + un1) / r1;
    let s2 = (up2 + un2) / r2;

    let (phi1, phi2, v) = match constraint {
        TerminalConstraint::Voltage(v) => {
            let phi = solve2([[a1, -g], [-g, a2]], [v / r1 - s1, v / r2 - s2]);
            (phi[0], phi[1], v)
        }
        TerminalConstraint::Current(i) => {
            // Unknowns (phi1, phi2, V); third row is KCL at the positive
            // terminal: i1 + i2 = I.
            let a = [
                [a1, -g, -1.0 / r1],
                [-g, a2, -1.0 / r2],
                [1.0 / r1, 1.0 / r2, -(1.0 / r1 + 1.0 / r2)],
            ];
            let b = [-s1, -s2, i - up1 / r1 - up2 / r2];
            let x = solve3(a, b);
            (x[0], x[1], x[2])
        }
    };

    let i1 = (phi1 + up1 - v) / r1;
    let i2 = (phi2 + up2 - v) / r2;
    let j1 = (-un1 - phi1) / r1;
    let j2 = (-un2 - phi2) / r2;
    Ok(NetworkSolution {
        i_pos: [i1, i2],
        i_neg: [j1, j2],
        i_bridge: i1 - j1,
        v_terminal: v,
        phi_mid: [phi1, phi2],
    })
}

/// Stoichiometry rates (1/s) implied by a network solution: discharge
/// lithiates the positive electrodes and delithiates the negative ones.
pub fn state_derivative(
    params: &EcmParameters,
    _state: &EcmState,
    sol: &NetworkSolution,
) -> [f64; 4] {
    let qn = 3600.0 * params.q_neg_subcell();
    let qp = 3600.0 * params.q_pos_subcell();
    [
        -sol.i_neg[0] / qn,
        sol.i_pos[0] / qp,
        -sol.i_neg[1] / qn,
        sol.i_pos[1] / qp,
    ]
}

/// Lithium inventory per sub-cell and in total, ampere-hours.
pub fn subcell_lithium(params: &EcmParameters, state: &EcmState) -> (f64, f64, f64) {
    let qn = params.q_neg_subcell();
    let qp = params.q_pos_subcell();
    let n1 = state.z_neg(0) * qn + state.z_pos(0) * qp;
    let n2 = state.z_neg(1) * qn + state.z_pos(1) * qp;
    (n1, n2, n1 + n2)
}

/// Maximum relative residual of the Kirchhoff equations for a solution,
/// used by tests and the acceptance suite to verify network consistency.
pub fn network_residual(
    params: &EcmParameters,
    state: &EcmState,
    sol: &NetworkSolution,
    constraint: TerminalConstraint,
) -> f64 {
    let [un1, up1, un2, up2] = ocps(params, state).expect("residual on evaluable state");
    let r1 = params.branch_resistance(0);
    let r2 = params.branch_resistance(1);
    let re = params.bridge_resistance();
    let [phi1, phi2] = sol.phi_mid;
    let v = sol.v_terminal;
    let [i1, i2] = sol.i_pos;
    let [j1, j2] = sol.i_neg;
    let scale_v = v.abs().max(up1.abs()).max(up2.abs()).max(1.0);
    let scale_i = i1.abs().max(i2.abs()).max(j1.abs()).max(j2.abs()).max(1e-3);
    let mut residuals_v = vec![
        // KVL along each branch
        v - (phi1 + up1 - i1 * r1),
        v - (phi2 + up2 - i2 * r2),
        phi1 - (-un1 - j1 * r1),
        phi2 - (-un2 - j2 * r2),
        // Ohm's law across the bridge (positive i_bridge flows into sub-cell 1)
        sol.i_bridge * re - (phi2 - phi1),
    ];
    let mut residuals_i = vec![
        // KCL at the mid-nodes and terminals
        j1 - i1 + sol.i_bridge,
        j2 - i2 - sol.i_bridge,
        (i1 + i2) - (j1 + j2),
    ];
    match constraint {
        TerminalConstraint::Current(i) => residuals_i.push(i1 + i2 - i),
        TerminalConstraint::Voltage(vset) => residuals_v.push(v - vset),
    }
    let worst_v = residuals_v.iter().map(|r| r.abs() / scale_v).fold(0.0, f64::max);
    let worst_i = residuals_i.iter().map(|r| r.abs() / scale_i).fold(0.0, f64::max);
    worst_v.max(worst_i)
}

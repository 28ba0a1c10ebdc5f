//! Embedded Dormand-Prince 5(4) step with error estimate and a cubic Hermite
//! interpolant for event localization inside an accepted step.

/// Result of one trial step.
pub struct TrialStep<const N: usize> {
    pub y_new: [f64; N],
    /// RMS of per-component errors scaled by atol + rtol * |y|.
    pub error_norm: f64,
    /// Derivative at (t + h, y_new); reusable as the next step's first stage.
    pub f_new: [f64; N],
}

const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];

/// 5th-order weights (identical to the last A row; the scheme is FSAL).
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];

/// Embedded 4th-order weights.
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// One Dormand-Prince trial step of size `h` from `y` with first stage `f0`
/// already evaluated. The derivative callback may fail (e.g. a network solve
/// on a non-evaluable state), in which case the error is passed through.
pub fn dopri5_step<const N: usize, E>(
    mut f: impl FnMut(&[f64; N]) -> Result<[f64; N], E>,
    y: &[f64; N],
    f0: &[f64; N],
    h: f64,
    rtol: f64,
    atol: f64,
) -> Result<TrialStep<N>, E> {
    let mut k = [[0.0; N]; 7];
    k[0] = *f0;
    for stage in 0..6 {
        let mut ys = *y;
        for (j, kj) in k.iter().enumerate().take(stage + 1) {
            let a = A[stage][j];
            if a != 0.0 {
                for i in 0..N {
                    ys[i] += h * a * kj[i];
                }
            }
        }
        k[stage + 1] = f(&ys)?;
    }
    let mut y_new = *y;
    let mut y4 = *y;
    for (j, kj) in k.iter().enumerate() {
        for i in 0..N {
            y_new[i] += h * B5[j] * kj[i];
            y4[i] += h * B4[j] * kj[i];
        }
    }
    let mut acc = 0.0;
    for i in 0..N {
        let scale = atol + rtol * y[i].abs().max(y_new[i].abs());
        let e = (y_new[i] - y4[i]) / scale;
        acc += e * e;
    }
    let error_norm = (acc / N as f64).sqrt();
    // stage 7 sits at (t + h, y_new): FSAL
    let f_new = k[6];
    Ok(TrialStep {
        y_new,
        error_norm,
        f_new,
    })
}

/// Cubic Hermite interpolation across an accepted step: `theta` in [0, 1].
pub fn hermite<const N: usize>(
    y0: &[f64; N],
    f0: &[f64; N],
    y1: &[f64; N],
    f1: &[f64; N],
    h: f64,
    theta: f64,
) -> [f64; N] {
    let t = theta;
    let h00 = (1.0 + 2.0 * t) * (1.0 - t) * (1.0 - t);
    let h10 = t * (1.0 - t) * (1.0 - t);
    let h01 = t * t * (3.0 - 2.0 * t);
    let h11 = t * t * (t - 1.0);
    let mut out = [0.0; N];
    for i in 0..N {
        out[i] = h00 * y0[i] + h10 * h * f0[i] + h01 * y1[i] + h11 * h * f1[i];
    }
    out
}

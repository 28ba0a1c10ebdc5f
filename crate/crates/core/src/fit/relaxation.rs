use super::{differential_evolution, DeSettings, FitError, ParameterBounds};

/// Result of fitting the saturating-exponential capacity recovery during
/// open-circuit rest: `y = a (1 - b exp(-x / tau))` with x in hours.
#[derive(Debug, Clone)]
pub struct RelaxationFit {
    /// Saturation capacity, Ah.
    pub a: f64,
    /// Fractional initial depression.
    pub b: f64,
    /// Recovery time constant in hours; `None` when the data is flat and the
    /// time constant cannot be identified.
    pub tau_h: Option<f64>,
    pub rms_residual: f64,
}

/// Least-squares fit of `y = a (1 - b exp(-x/tau))` to (rest hours, capacity)
/// samples, reusing the differential-evolution optimizer on the three
/// parameters.
pub fn fit_relaxation(samples: &[(f64, f64)], seed: u64) -> Result<RelaxationFit, FitError> {
    if samples.len() < 3 {
        return Err(FitError::TooFewSamples(samples.len()));
    }
    if samples.iter().any(|(x, _)| *x < 0.0) {
        return Err(FitError::NegativeRestTime);
    }
    let mean_y = samples.iter().map(|(_, y)| y).sum::<f64>() / samples.len() as f64;
    let spread = samples
        .iter()
        .map(|(_, y)| (y - mean_y).abs())
        .fold(0.0, f64::max);
    if spread < 1e-12 * mean_y.abs().max(1.0) {
        // flat data: b = 0 exactly, tau unidentified
        return Ok(RelaxationFit {
            a: mean_y,
            b: 0.0,
            tau_h: None,
            rms_residual: 0.0,
        });
    }

    let bounds = ParameterBounds::from_pairs(&[
        ("a", 1e-9, 3.0),
        ("b", 0.0, 1.0),
        ("tau_h", 1e-6, 1000.0),
    ])?;
    let objective = |p: &[f64]| -> f64 {
        let (a, b, tau) = (p[0], p[1], p[2]);
        samples
            .iter()
            .map(|(x, y)| {
                let model = a * (1.0 - b * (-x / tau).exp());
                (model - y).powi(2)
            })
            .sum::<f64>()
            / samples.len() as f64
    };
    let settings = DeSettings {
        population: 45,
        mutation_f: 0.7,
        crossover_cr: 0.9,
        max_generations: 2000,
        convergence_tol: 1e-18,
        stagnation_window: 200,
        seed,
        parallel: false,
    };
    let res = differential_evolution(objective, &bounds, &settings)?;
    let (a, b, tau) = (res.best[0], res.best[1], res.best[2]);
    let tau_h = if b < 1e-6 { None } else { Some(tau) };
    Ok(RelaxationFit {
        a,
        b: if tau_h.is_none() { 0.0 } else { b },
        tau_h,
        rms_residual: res.best_loss.sqrt(),
    })
}

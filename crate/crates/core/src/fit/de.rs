//! Classic rand/1/bin differential evolution with bound clipping.
//!
//! All random draws happen in a fixed sequential order while trial vectors
//! are being built; objective evaluations then run (optionally in parallel)
//! and results are reduced in member order, so a fixed seed gives identical
//! results whether or not evaluations run concurrently.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{FitError, ParameterBounds};

#[derive(Debug, Clone)]
pub struct DeSettings {
    pub population: usize,
    pub mutation_f: f64,
    pub crossover_cr: f64,
    pub max_generations: usize,
    /// Converged when the best loss improves by less than this over the
    /// stagnation window.
    pub convergence_tol: f64,
    pub stagnation_window: usize,
    pub seed: u64,
    /// Evaluate population members concurrently.
    pub parallel: bool,
}

impl DeSettings {
    /// Defaults for a given problem dimension: population 15 x dim,
    /// F = 0.8, CR = 0.9.
    pub fn for_dimension(dim: usize) -> Self {
        Self {
            population: 15 * dim.max(1),
            mutation_f: 0.8,
            crossover_cr: 0.9,
            max_generations: 400,
            convergence_tol: 1e-12,
            stagnation_window: 60,
            seed: 42,
            parallel: true,
        }
    }

    fn validate(&self) -> Result<(), FitError> {
        if self.population < 4 {
            return Err(FitError::PopulationTooSmall(self.population));
        }
        if !(self.mutation_f > 0.0 && self.mutation_f <= 2.0) {
            return Err(FitError::BadMutationFactor(self.mutation_f));
        }
        if !(0.0..=1.0).contains(&self.crossover_cr) {
            return Err(FitError::BadCrossoverRate(self.crossover_cr));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub best: Vec<f64>,
    pub best_loss: f64,
    pub generations: usize,
    pub converged: bool,
    /// Best-so-far loss after each generation (index 0 = initial population).
    pub loss_history: Vec<f64>,
    pub evaluations: usize,
}

fn sanitize(loss: f64) -> f64 {
    if loss.is_finite() {
        loss
    } else {
        f64::INFINITY
    }
}

/// Minimize `objective` over the bound box.
pub fn differential_evolution<F>(
    objective: F,
    bounds: &ParameterBounds,
    settings: &DeSettings,
) -> Result<FitResult, FitError>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    settings.validate()?;
    let dim = bounds.dimension();
    let np = settings.population;
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);

    let evaluate = |members: &[Vec<f64>]| -> Vec<f64> {
        if settings.parallel {
            members.par_iter().map(|x| sanitize(objective(x))).collect()
        } else {
            members.iter().map(|x| sanitize(objective(x))).collect()
        }
    };

    let mut population: Vec<Vec<f64>> = (0..np)
        .map(|_| {
            bounds
                .entries
                .iter()
                .map(|e| rng.gen_range(e.lower..=e.upper))
                .collect()
        })
        .collect();
    let mut losses = evaluate(&population);
    let mut evaluations = np;

    let mut best_idx = argmin(&losses);
    let mut best = population[best_idx].clone();
    let mut best_loss = losses[best_idx];
    let mut history = vec![best_loss];
    let mut converged = false;
    let mut generations = 0;

    for gen in 1..=settings.max_generations {
        // build all trial vectors first so the RNG stream is independent of
        // evaluation order
        let mut trials: Vec<Vec<f64>> = Vec::with_capacity(np);
        for i in 0..np {
            let (r0, r1, r2) = distinct_indices(&mut rng, np, i);
            let j_rand = rng.gen_range(0..dim);
            let mut trial = population[i].clone();
            for j in 0..dim {
                let crossed = rng.gen::<f64>() < settings.crossover_cr || j == j_rand;
                if crossed {
                    let v = population[r0][j]
                        + settings.mutation_f * (population[r1][j] - population[r2][j]);
                    trial[j] = v.clamp(bounds.entries[j].lower, bounds.entries[j].upper);
                }
            }
            trials.push(trial);
        }
        let trial_losses = evaluate(&trials);
        evaluations += np;
        for i in 0..np {
            if trial_losses[i] <= losses[i] {
                population[i] = trials[i].clone();
                losses[i] = trial_losses[i];
                if losses[i] < best_loss {
                    best_loss = losses[i];
                    best = population[i].clone();
                    best_idx = i;
                }
            }
        }
        let _ = best_idx;
        history.push(best_loss);
        generations = gen;
        if gen >= settings.stagnation_window {
            let before = history[gen - settings.stagnation_window];
            if before - best_loss < settings.convergence_tol && best_loss.is_finite() {
                converged = true;
                break;
            }
        }
    }

    if !best_loss.is_finite() {
        return Err(FitError::ObjectiveNeverFinite);
    }
    Ok(FitResult {
        best,
        best_loss,
        generations,
        converged,
        loss_history: history,
        evaluations,
    })
}

fn argmin(xs: &[f64]) -> usize {
    let mut idx = 0;
    for (i, v) in xs.iter().enumerate() {
        if *v < xs[idx] {
            idx = i;
        }
    }
    idx
}

fn distinct_indices(rng: &mut ChaCha8Rng, np: usize, exclude: usize) -> (usize, usize, usize) {
    let mut pick = |taken: &[usize]| loop {
        let c = rng.gen_range(0..np);
        if c != exclude && !taken.contains(&c) {
            return c;
        }
    };
    let r0 = pick(&[]);
    let r1 = pick(&[r0]);
    let r2 = pick(&[r0, r1]);
    (r0, r1, r2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    fn sphere_bounds(dim: usize) -> ParameterBounds {
        ParameterBounds::new(
            (0..dim)
                .map(|i| super::super::BoundEntry {
                    name: format!("x{i}"),
                    lower: -5.0,
                    upper: 5.0,
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn sphere_reaches_1e8_within_20k_evaluations() {
        let bounds = sphere_bounds(9);
        let settings = DeSettings {
            population: 45,
            mutation_f: 0.6,
            crossover_cr: 0.9,
            max_generations: 440,
            convergence_tol: 0.0,
            stagnation_window: usize::MAX,
            seed: 7,
            parallel: false,
        };
        let res = differential_evolution(
            |x| x.iter().map(|v| v * v).sum::<f64>(),
            &bounds,
            &settings,
        )
        .unwrap();
        assert!(res.evaluations <= 20_000, "used {} evaluations", res.evaluations);
        assert!(res.best_loss < 1e-8, "best loss {}", res.best_loss);
    }

    #[test]
    fn rosenbrock_2d_finds_the_minimum() {
        let bounds = ParameterBounds::from_pairs(&[("x", -2.0, 2.0), ("y", -2.0, 2.0)]).unwrap();
        let settings = DeSettings {
            population: 30,
            mutation_f: 0.7,
            crossover_cr: 0.9,
            max_generations: 600,
            convergence_tol: 1e-16,
            stagnation_window: 80,
            seed: 3,
            parallel: false,
        };
        let res = differential_evolution(
            |x| {
                let (a, b) = (x[0], x[1]);
                (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2)
            },
            &bounds,
            &settings,
        )
        .unwrap();
        assert!(res.evaluations <= 20_000);
        assert!((res.best[0] - 1.0).abs() <= 1e-3, "x = {}", res.best[0]);
        assert!((res.best[1] - 1.0).abs() <= 1e-3, "y = {}", res.best[1]);
    }

    #[test]
    fn rejects_tiny_population() {
        let bounds = sphere_bounds(2);
        let mut settings = DeSettings::for_dimension(2);
        settings.population = 3;
        let err = differential_evolution(|x| x[0] + x[1], &bounds, &settings).unwrap_err();
        assert!(matches!(err, FitError::PopulationTooSmall(3)));
    }

    #[test]
    fn never_evaluates_outside_bounds_and_counts_calls() {
        let bounds = ParameterBounds::from_pairs(&[("a", -1.0, 2.0), ("b", 0.5, 0.6)]).unwrap();
        let calls = AtomicUsize::new(0);
        let settings = DeSettings {
            population: 12,
            mutation_f: 0.9,
            crossover_cr: 0.8,
            max_generations: 40,
            convergence_tol: 0.0,
            stagnation_window: usize::MAX,
            seed: 11,
            parallel: true,
        };
        let res = differential_evolution(
            |x| {
                calls.fetch_add(1, Ordering::Relaxed);
                assert!((-1.0..=2.0).contains(&x[0]), "x0 out of bounds: {}", x[0]);
                assert!((0.5..=0.6).contains(&x[1]), "x1 out of bounds: {}", x[1]);
                (x[0] - 0.3).powi(2) + (x[1] - 0.55).powi(2)
            },
            &bounds,
            &settings,
        )
        .unwrap();
        assert_eq!(res.evaluations, calls.load(Ordering::Relaxed));
        assert_eq!(res.evaluations, 12 * 41);
    }

    #[test]
    fn best_so_far_history_is_non_increasing() {
        let bounds = sphere_bounds(4);
        let settings = DeSettings {
            seed: 5,
            parallel: false,
            ..DeSettings::for_dimension(4)
        };
        let res = differential_evolution(
            |x| x.iter().map(|v| (v - 0.5).powi(2)).sum::<f64>(),
            &bounds,
            &settings,
        )
        .unwrap();
        for w in res.loss_history.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn same_seed_same_result_serial_or_parallel() {
        let bounds = sphere_bounds(3);
        let objective = |x: &[f64]| {
            x.iter()
                .enumerate()
                .map(|(i, v)| (v - i as f64 * 0.3).powi(2))
                .sum::<f64>()
        };
        let mut s = DeSettings::for_dimension(3);
        s.max_generations = 60;
        s.seed = 99;
        s.parallel = false;
        let a = differential_evolution(objective, &bounds, &s).unwrap();
        s.parallel = true;
        let b = differential_evolution(objective, &bounds, &s).unwrap();
        assert_eq!(a.best, b.best);
        assert_eq!(a.best_loss.to_bits(), b.best_loss.to_bits());
        assert_eq!(a.loss_history.len(), b.loss_history.len());
    }

    #[test]
    fn non_finite_objective_everywhere_is_an_error() {
        let bounds = sphere_bounds(2);
        let mut s = DeSettings::for_dimension(2);
        s.max_generations = 5;
        let err = differential_evolution(|_| f64::NAN, &bounds, &s).unwrap_err();
        assert!(matches!(err, FitError::ObjectiveNeverFinite));
    }
}

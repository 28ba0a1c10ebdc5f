//! Bound-constrained differential evolution and the nonlinear least-squares
//! fits built on top of it.

mod bounds;
mod de;
mod ecm_fit;
mod relaxation;

pub use bounds::{BoundEntry, ParameterBounds};
pub use de::{differential_evolution, DeSettings, FitResult};
pub use ecm_fit::{
    fit_ecm, params_from_vector, segments_from_trace, EcmFitOutcome, FitObjectiveSpec,
    VoltageSegment,
};
pub use relaxation::{fit_relaxation, RelaxationFit};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FitError {
    #[error("population must be at least 4, got {0}")]
    PopulationTooSmall(usize),
    #[error("mutation factor must lie in (0, 2], got {0}")]
    BadMutationFactor(f64),
    #[error("crossover rate must lie in [0, 1], got {0}")]
    BadCrossoverRate(f64),
    #[error("bounds are empty")]
    EmptyBounds,
    #[error("bound `{name}` has lower {lower} >= upper {upper}")]
    InvertedBound {
        name: String,
        lower: f64,
        upper: f64,
    },
    #[error("objective was never finite inside the bounds")]
    ObjectiveNeverFinite,
    #[error("relaxation fit needs at least 3 samples, got {0}")]
    TooFewSamples(usize),
    #[error("relaxation fit needs non-negative rest times")]
    NegativeRestTime,
    #[error("reference contains no segments or only empty segments")]
    EmptyReference,
    #[error("expected {expected} parameters, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("bounds file {path}: {message}")]
    BoundsFile { path: String, message: String },
    #[error("reference csv {path}, line {line}: {message}")]
    ReferenceCsv {
        path: String,
        line: usize,
        message: String,
    },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Ecm(#[from] crate::ecm::EcmError),
}

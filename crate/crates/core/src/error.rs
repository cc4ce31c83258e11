use nalgebra::Complex;
use thiserror::Error;

use crate::operators::InvertibilityCertificate;

#[derive(Debug, Error)]
pub enum Error {
    #[error("quadrature resolution {resolution} is too small for {harmonics} harmonics (need at least {required})")]
    Aliasing {
        resolution: usize,
        harmonics: usize,
        required: usize,
    },

    #[error("phasors up to |k| = {required} are needed but only |k| <= {available} are materialized")]
    MissingPhasors { required: usize, available: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(
        "harmonic Sylvester system is singular: eigenvalue {lambda} of Lambda collides with harmonic eigenvalue {harmonic} (distance {distance:e})"
    )]
    SpectralCollision {
        lambda: Complex<f64>,
        harmonic: Complex<f64>,
        distance: f64,
    },

    #[error("eigenvalue iteration did not converge on a {0}x{0} matrix")]
    EigenFailure(usize),

    #[error("linear system is singular: {0}")]
    Singular(String),

    #[error("monodromy did not converge under step halving: achieved delta {delta:e} > tolerance {tolerance:e}")]
    NotConverged { delta: f64, tolerance: f64 },

    #[error(
        "monodromy matrix is defective (eigenvector condition number {condition:e}); Jordan forms are unsupported"
    )]
    DefectiveMonodromy { condition: f64 },

    #[error("monodromy matrix has an eigenvalue at zero; no Floquet logarithm exists")]
    SingularMonodromy,

    #[error(
        "P(t) is not invertible: min |det P(t)| = {:e} at t = {:.6} (threshold {:e}); try a larger truncation order",
        .0.min_abs_det, .0.argmin_t, .0.threshold
    )]
    NotInvertible(Box<InvertibilityCertificate>),

    #[error("truncated Sylvester self-check failed: relative residual {residual:e}")]
    SelfCheck { residual: f64 },

    #[error("undefined: {0}")]
    Undefined(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

use std::path::PathBuf;

use thiserror::Error;

use crate::generator::GeneratorStage;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("coordinates outside panorama coverage: lon={lon:.6}°, lat={lat:.6}°")]
    OutOfCoverage { lon: f64, lat: f64 },

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("conjugate gradient did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    Solver { iterations: usize, residual: f64 },

    #[error("external generator failed: {message}\n{transcript}")]
    ExternalGenerator { message: String, transcript: String },

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: GeneratorStage,
        #[source]
        source: Box<Error>,
    },

    #[error("batch failed: all {0} items failed")]
    Batch(usize),

    #[error("image error at {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn in_stage(self, stage: GeneratorStage) -> Self {
        Error::Stage { stage, source: Box::new(self) }
    }
}

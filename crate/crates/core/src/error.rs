//! Error type shared by every module.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HomogError {
    #[error("degenerate lattice: basis vectors are linearly dependent (det = {det:e})")]
    DegenerateLattice { det: f64 },

    #[error("invalid dimension: {0}")]
    Dimension(String),

    #[error("point {t} along direction lies outside the Brillouin zone radius r0 = {r0}")]
    OutOfZone { t: f64, r0: f64 },

    #[error("field check failed: {0}")]
    FieldCheck(String),

    #[error("grid of size {grid} on axis {axis} cannot resolve frequency {needed} (cutoff {cutoff})")]
    Aliasing { axis: usize, grid: usize, needed: usize, cutoff: usize },

    #[error("matrix is not positive semidefinite: eigenvalue {value:e} below clamp {clamp:e}")]
    NotPsd { value: f64, clamp: f64 },

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error("singular cell system (estimated condition {condition:e})")]
    SingularCell { condition: f64 },

    #[error("phase resolution violated: eps^-1 |tau| d(sqrt lambda) = {phase:.3} rad; try cutoff >= {suggested}")]
    PhaseResolution { phase: f64, suggested: usize },

    #[error("sharpness probe refused: threshold coefficient mu vanishes along the chosen direction")]
    SharpnessInapplicable,

    #[error("branch tracking failed at t = {t}")]
    BranchTracking { t: f64 },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("unknown example: {0}")]
    UnknownExample(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl HomogError {
    /// Short machine-readable tag for JSON error records.
    pub fn kind(&self) -> &'static str {
        match self {
            HomogError::DegenerateLattice { .. } => "degenerate-lattice",
            HomogError::Dimension(_) => "dimension",
            HomogError::OutOfZone { .. } => "out-of-zone",
            HomogError::FieldCheck(_) => "field-check",
            HomogError::Aliasing { .. } => "aliasing",
            HomogError::NotPsd { .. } => "not-psd",
            HomogError::Linalg(_) => "linalg",
            HomogError::SingularCell { .. } => "singular-cell",
            HomogError::PhaseResolution { .. } => "phase-resolution",
            HomogError::SharpnessInapplicable => "sharpness-inapplicable",
            HomogError::BranchTracking { .. } => "branch-tracking",
            HomogError::Parameter(_) => "parameter",
            HomogError::UnknownExample(_) => "unknown-example",
            HomogError::Io(_) => "io",
            HomogError::Json(_) => "json",
            HomogError::Csv(_) => "csv",
        }
    }
}

pub type Result<T> = std::result::Result<T, HomogError>;

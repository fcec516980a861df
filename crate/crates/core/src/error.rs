use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid spectrum: {0}")]
    InvalidSpectrum(String),

    #[error("invalid sample metadata: {0}")]
    InvalidMeta(String),

    #[error("non-positive transmission {value} at {wavelength_nm} nm")]
    NonPositiveTransmission { wavelength_nm: f64, value: f64 },

    #[error("spectrum is already an absorption spectrum")]
    AlreadyAbsorption,

    #[error("expected an absorption spectrum, got {0}")]
    NotAbsorption(&'static str),

    #[error("wavelength {wavelength_nm} nm is outside the data range [{lo_nm}, {hi_nm}] nm")]
    GridOutOfRange {
        wavelength_nm: f64,
        lo_nm: f64,
        hi_nm: f64,
    },

    #[error("no data points in [{lo_nm}, {hi_nm}] nm")]
    EmptyResult { lo_nm: f64, hi_nm: f64 },

    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("invalid fit configuration: {0}")]
    InvalidConfig(String),

    #[error("fit window [{lo_nm}, {hi_nm}] nm lacks the {anchor_nm} nm anchor")]
    WindowTooNarrow {
        lo_nm: f64,
        hi_nm: f64,
        anchor_nm: f64,
    },

    #[error("{points} data points cannot determine {params} parameters")]
    DegenerateInput { points: usize, params: usize },

    #[error("absorption convention mismatch: {left:?} vs {right:?}")]
    ConventionMismatch {
        left: crate::spectrum::Convention,
        right: crate::spectrum::Convention,
    },

    #[error("calibration needs at least {needed} points, got {got}")]
    InsufficientPoints { needed: usize, got: usize },

    #[error("calibration x values are degenerate")]
    DegenerateX,

    #[error("invalid calibration data: {0}")]
    InvalidCalibrationData(String),

    #[error("invalid instrument limits: {0}")]
    InvalidLimits(String),

    #[error("{path}: malformed header at line {line}: {message}")]
    MalformedHeader {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: wavelength at line {line} is not strictly increasing")]
    NonMonotonicWavelength { path: PathBuf, line: usize },

    #[error("{path}: bad numeric value at line {line}: {text:?}")]
    BadNumeric {
        path: PathBuf,
        line: usize,
        text: String,
    },

    #[error("{path}: sample thickness is required for absorption conversion")]
    MissingThickness { path: PathBuf },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization failed: {0}")]
    Serialize(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

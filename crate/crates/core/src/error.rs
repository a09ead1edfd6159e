use thiserror::Error;

/// Errors raised by the analytics core.
///
/// Every variant belongs to one module; [`CoreError::module`] names it so
/// front ends can report where a failure originated.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoreError {
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },

    #[error("missing mandatory column `{0}`")]
    MissingColumn(String),

    #[error("row {row}: cannot parse {field} from `{value}`")]
    Parse { row: usize, field: String, value: String },

    #[error("row {row}: {message}")]
    InvalidRow { row: usize, message: String },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("series lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),

    #[error("series contains missing values")]
    MissingValues,

    #[error("series is constant; {0} is undefined")]
    ConstantSeries(&'static str),

    #[error("cross-correlation denominator is not positive ({0:.6e}); measure undefined for this pair")]
    NonPositiveDenominator(f64),

    #[error("scenario cannot be applied: {0}")]
    Scenario(String),

    #[error("model fit failed: {0}")]
    Fit(String),

    #[error("non-stationary or non-invertible model: {0}")]
    NonStationary(String),

    #[error("invalid chart configuration: {0}")]
    ChartConfig(String),

    #[error("non-finite value at index {0}")]
    NonFinite(usize),

    #[error("intensity not positive at t={0}; parameters outside the admissible region")]
    NonPositiveIntensity(usize),
}

impl CoreError {
    /// Name of the module family that produced the error.
    pub fn module(&self) -> &'static str {
        use CoreError::*;
        match self {
            Io { .. } | MissingColumn(_) | Parse { .. } | InvalidRow { .. } | InvalidDataset(_) => "ingest",
            LengthMismatch(..) | MissingValues | ConstantSeries(_) | NonPositiveDenominator(_) => "dissimilarity",
            Scenario(_) => "scenario",
            Fit(_) | NonStationary(_) => "model",
            ChartConfig(_) | NonFinite(_) => "spm",
            NonPositiveIntensity(_) => "count_model",
            InvalidInput(_) | Empty(_) => "core",
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, err: impl std::fmt::Display) -> Self {
        CoreError::Io {
            path: path.as_ref().display().to_string(),
            message: err.to_string(),
        }
    }
}

pub type Result<T, E = CoreError> = std::result::Result<T, E>;

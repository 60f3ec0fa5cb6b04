use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("InvalidOrder: fractional order {0} is outside (0, 1]")]
    InvalidOrder(f64),
    #[error("DegenerateGrid: grid_points = {0}, at least 8 required")]
    DegenerateGrid(usize),
    #[error("NonPositiveAbscissa: x = {0} must be > 0 for a fractional order below 1")]
    NonPositiveAbscissa(f64),
    #[error("InvertedInterval: x = {x} must lie below the upper terminal {upper}")]
    InvertedInterval { x: f64, upper: f64 },
    #[error("InsufficientResolutions: {0}")]
    InsufficientResolutions(String),

    #[error("SyntaxError at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("UnknownSymbol: `{0}`")]
    UnknownSymbol(String),
    #[error("IndexOutOfRange: `{symbol}` exceeds dimension {dim}")]
    IndexOutOfRange { symbol: String, dim: usize },
    #[error("EvaluationDomainError: {0}")]
    EvaluationDomain(String),
    #[error("DimensionMismatch: {0}")]
    DimensionMismatch(String),

    #[error("DegenerateHessian: |det| = {det:e} at {point}")]
    DegenerateHessian { det: f64, point: String },
    #[error("SingularMetric: {0}")]
    SingularMetric(String),
    #[error("SingularTransform: {0}")]
    SingularTransform(String),
    #[error("NotNAdapted: frame transform mixes h and v blocks (max off-block entry {0:e})")]
    NotNAdapted(f64),

    #[error("GridTooCoarse: {0} samples, at least 16 required")]
    GridTooCoarse(usize),
    #[error("StepCountTooSmall: {0} steps, at least 16 required")]
    StepCountTooSmall(usize),
    #[error("BlowUp: solution left the finite range at tau = {0}")]
    BlowUp(f64),

    #[error("ModelFile: {0}")]
    ModelFile(String),
    #[error("Io: {0}")]
    Io(String),
}

impl Error {
    /// True for errors caused by malformed input rather than numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidOrder(_)
                | Error::DegenerateGrid(_)
                | Error::Syntax { .. }
                | Error::UnknownSymbol(_)
                | Error::IndexOutOfRange { .. }
                | Error::DimensionMismatch(_)
                | Error::InsufficientResolutions(_)
                | Error::ModelFile(_)
                | Error::GridTooCoarse(_)
                | Error::StepCountTooSmall(_)
                | Error::InvertedInterval { .. }
                | Error::NotNAdapted(_)
                | Error::Io(_)
        )
    }
}

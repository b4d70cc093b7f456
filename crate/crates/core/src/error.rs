use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse classification used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad arguments or configuration.
    Usage,
    /// Input data is malformed or inconsistent.
    Data,
    /// A numerical routine failed on otherwise valid input.
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain violation at row {row}, axis {axis}: value {value} lies outside the admissible range")]
    DomainViolation { row: usize, axis: usize, value: f64 },

    #[error("invalid bounds: {0}")]
    InvalidBounds(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite value {value} at sample {sample}")]
    NonFinite { sample: usize, value: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("singular local fit at center sample {center}: neighborhood is rank deficient")]
    SingularFit { center: usize },

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("degenerate spectrum: all eigenvalues are zero")]
    DegenerateSpectrum,

    #[error("no feasible point found on the fiber of y = {y:?}")]
    InfeasibleFiber { y: Vec<f64> },

    #[error("invalid basis: {0}")]
    InvalidBasis(String),

    #[error("degenerate feature Jacobian at sample {sample}")]
    DegenerateJacobian { sample: usize },

    #[error("training diverged at epoch {epoch} (non-finite loss); try a smaller learning rate")]
    Divergence { epoch: usize },

    #[error("insufficient data: {required} samples required, {got} given")]
    InsufficientData { required: usize, got: usize },

    #[error("ill-conditioned system: {0}")]
    IllConditioned(String),

    #[error("NRMSE undefined: truth values are constant")]
    UndefinedNormalization,

    #[error("summary plot supports 1 or 2 reduced coordinates, got {k}")]
    UnsupportedPlot { k: usize },

    #[error("parse error at line {line}{}: {message}", column.as_ref().map(|c| format!(", column {c}")).unwrap_or_default())]
    Parse {
        line: u64,
        column: Option<String>,
        message: String,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("serialization error: {0}")]
    Serialization(String),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        use Error::*;
        match self {
            InvalidArgument(_) | UnsupportedPlot { .. } => ErrorClass::Usage,
            DomainViolation { .. }
            | InvalidBounds(_)
            | ShapeMismatch(_)
            | NonFinite { .. }
            | InvalidWeights(_)
            | InsufficientData { .. }
            | UndefinedNormalization
            | Parse { .. }
            | Schema(_)
            | Serialization(_) => ErrorClass::Data,
            SingularFit { .. }
            | InvalidMatrix(_)
            | DegenerateSpectrum
            | InfeasibleFiber { .. }
            | InvalidBasis(_)
            | DegenerateJacobian { .. }
            | Divergence { .. }
            | IllConditioned(_) => ErrorClass::Numerical,
        }
    }
}

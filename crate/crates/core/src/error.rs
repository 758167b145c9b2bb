use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not Hermitian (defect {defect:.3e})")]
    NonHermitianInput { defect: f64 },

    #[error("operator norm {norm:.3e} is too small to normalize by")]
    ZeroNorm { norm: f64 },

    #[error("system is singular or not positive definite: {0}")]
    SingularSystem(String),

    #[error("innovation covariance is numerically singular")]
    SingularInnovationCovariance,

    #[error("matrix is not positive semidefinite (smallest eigenvalue {min_eigenvalue:.3e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("state is not normalized (norm {norm:.15})")]
    NotNormalized { norm: f64 },

    #[error("outcome has zero probability ({probability:.3e}); cannot condition on it")]
    ZeroProbabilityBranch { probability: f64 },

    #[error(
        "measurement operators violate the completeness relation sum_m M_m^dagger M_m = I \
         (Frobenius defect {defect:.3e})"
    )]
    IncompleteMeasurement { defect: f64 },

    #[error("matrix is not unitary (defect {defect:.3e})")]
    NotUnitary { defect: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("vector has zero norm")]
    ZeroVector,

    #[error("matrix is rank deficient (rank {rank} < {cols} columns)")]
    RankDeficient { rank: usize, cols: usize },

    #[error("at least {required} runs are required, got {got}")]
    InsufficientRuns { required: usize, got: usize },

    #[error("bad configuration: {0}")]
    BadConfig(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid value for `{field}`: {reason}")]
    Validation { field: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Short stable identifier used in machine-readable diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch(_) => "dimension_mismatch",
            Error::NonHermitianInput { .. } => "non_hermitian_input",
            Error::ZeroNorm { .. } => "zero_norm",
            Error::SingularSystem(_) => "singular_system",
            Error::SingularInnovationCovariance => "singular_innovation_covariance",
            Error::NotPsd { .. } => "not_psd",
            Error::NotNormalized { .. } => "not_normalized",
            Error::ZeroProbabilityBranch { .. } => "zero_probability_branch",
            Error::IncompleteMeasurement { .. } => "incomplete_measurement",
            Error::NotUnitary { .. } => "not_unitary",
            Error::NonFinite(_) => "non_finite",
            Error::ZeroVector => "zero_vector",
            Error::RankDeficient { .. } => "rank_deficient",
            Error::InsufficientRuns { .. } => "insufficient_runs",
            Error::BadConfig(_) => "bad_config",
            Error::Parse(_) => "parse",
            Error::Validation { .. } => "validation",
            Error::Io(_) => "io",
        }
    }
}

pub(crate) fn dim_mismatch(
    what: &str,
    expected: impl std::fmt::Display,
    found: impl std::fmt::Display,
) -> Error {
    Error::DimensionMismatch(format!("{what}: expected {expected}, found {found}"))
}

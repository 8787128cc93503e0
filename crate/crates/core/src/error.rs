use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not Hermitian (max |m - m^dagger| = {max_dev:.3e}){}", context_suffix(.context))]
    NotHermitian { max_dev: f64, context: Option<String> },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("term {term} has operator norm {norm:.6} > 1/2 and rescaling is disabled")]
    NormPremiseViolated { term: usize, norm: f64 },

    #[error("time-dependent coefficients are required but missing")]
    CoefficientsMissing,

    #[error("operator norm {norm:.6e} exceeds block-encoding scale {scale:.6e}")]
    NormExceedsScale { norm: f64, scale: f64 },

    #[error("LCU weights must be nonnegative and sum to 1 (sum = {sum:.15})")]
    WeightsNotNormalized { sum: f64 },

    #[error("LCU inputs have different scales ({0:.6e} vs {1:.6e})")]
    MixedScales(f64, f64),

    #[error("rescale factor must exceed 1, got {0}")]
    InvalidFactor(f64),

    #[error("amplified block norm {value:.6} exceeds 1 - delta = {limit:.6}")]
    AmplificationOverflow { value: f64, limit: f64 },

    #[error("matrix is not unitary (defect {defect:.3e})")]
    NotUnitary { defect: f64 },

    #[error("bad slot permutation: {0}")]
    BadPermutation(String),

    #[error("required polynomial degree exceeds cap {cap}")]
    DegreeOverflow { cap: usize },

    #[error("encoded block is not Hermitian (max deviation {max_dev:.3e})")]
    NotHermitianBlock { max_dev: f64 },

    #[error("vector is not unit norm (norm = {norm:.15})")]
    NotUnit { norm: f64 },

    #[error("sparsity {s} out of range 1..={dim}")]
    SparsityOutOfRange { s: usize, dim: usize },

    #[error("term {term} has negative eigenvalue product {value:.3e}")]
    NegativeEigenvalueProduct { term: usize, value: f64 },

    #[error("terms {i} and {j} do not commute (commutator norm {norm:.3e})")]
    NotCommuting { i: usize, j: usize, norm: f64 },

    #[error("dense unitary of dimension {dim} exceeds the emulator cap {cap}")]
    DenseLimitExceeded { dim: usize, cap: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

fn context_suffix(context: &Option<String>) -> String {
    match context {
        Some(c) => format!(" [{c}]"),
        None => String::new(),
    }
}

impl Error {
    /// Variant name, used by the command-line driver when reporting failures.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NotSquare { .. } => "NotSquare",
            Error::NotHermitian { .. } => "NotHermitian",
            Error::DimensionMismatch(_) => "DimensionMismatch",
            Error::Parse { .. } => "ParseError",
            Error::NormPremiseViolated { .. } => "NormPremiseViolated",
            Error::CoefficientsMissing => "CoefficientsMissing",
            Error::NormExceedsScale { .. } => "NormExceedsScale",
            Error::WeightsNotNormalized { .. } => "WeightsNotNormalized",
            Error::MixedScales(..) => "MixedScales",
            Error::InvalidFactor(_) => "InvalidFactor",
            Error::AmplificationOverflow { .. } => "AmplificationOverflow",
            Error::NotUnitary { .. } => "NotUnitary",
            Error::BadPermutation(_) => "BadPermutation",
            Error::DegreeOverflow { .. } => "DegreeOverflow",
            Error::NotHermitianBlock { .. } => "NotHermitianBlock",
            Error::NotUnit { .. } => "NotUnit",
            Error::SparsityOutOfRange { .. } => "SparsityOutOfRange",
            Error::NegativeEigenvalueProduct { .. } => "NegativeEigenvalueProduct",
            Error::NotCommuting { .. } => "NotCommuting",
            Error::DenseLimitExceeded { .. } => "DenseLimitExceeded",
            Error::InvalidConfig(_) => "InvalidConfig",
        }
    }

    /// Input-validation failures, as opposed to numerical failures that
    /// arise while running a pipeline.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::NotSquare { .. }
                | Error::NotHermitian { .. }
                | Error::DimensionMismatch(_)
                | Error::Parse { .. }
                | Error::NormPremiseViolated { .. }
                | Error::CoefficientsMissing
                | Error::NotUnit { .. }
                | Error::SparsityOutOfRange { .. }
                | Error::NegativeEigenvalueProduct { .. }
                | Error::NotCommuting { .. }
                | Error::InvalidConfig(_)
                | Error::BadPermutation(_)
        )
    }
}

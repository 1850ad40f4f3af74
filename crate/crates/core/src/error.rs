use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("non-finite scalar input: {0}")]
    NonFiniteScalar(f64),

    #[error("need at least {min} rows (subjects), got {got}")]
    TooFewRows { min: usize, got: usize },

    #[error("need at least {min} columns (nodes), got {got}")]
    TooFewColumns { min: usize, got: usize },

    #[error("column {0} is constant (zero norm after centering)")]
    ConstantColumn(usize),

    #[error("data matrix is not centered and unit-norm: {0}")]
    NotNormalized(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("ragged row {row}: expected {expected} fields, got {got}")]
    RaggedRow {
        row: usize,
        expected: usize,
        got: usize,
    },

    #[error("cannot parse {value:?} as a number at row {row}, column {col}")]
    Parse { row: usize, col: usize, value: String },

    #[error("matrix has fewer than two nodes")]
    EmptyMatrix,

    #[error("invalid sparsity parameter λ = {0}")]
    InvalidLambda(f64),

    #[error("invalid λ grid: {0}")]
    InvalidGrid(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix is not symmetric: |m[{i},{j}] - m[{j},{i}]| = {diff:e}")]
    NotSymmetric { i: usize, j: usize, diff: f64 },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("diagonal entry {0} of the precision matrix is not positive")]
    NonPositiveDiagonal(usize),

    #[error("regression is underdetermined: n = {n} subjects for p = {p} nodes (use the LASSO route)")]
    Underdetermined { n: usize, p: usize },

    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("invalid synthetic structure parameters: {0}")]
    InvalidStructureParams(String),

    #[error("methods disagree: max-norm difference {diff:e} exceeds {tol:e} at n = {n}, p = {p}")]
    AgreementFailure { n: usize, p: usize, diff: f64, tol: f64 },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by a solver failing to converge, as opposed to
    /// bad input.
    pub fn is_convergence(&self) -> bool {
        matches!(self, Error::NotConverged { .. })
    }
}

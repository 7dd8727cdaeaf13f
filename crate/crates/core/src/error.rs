use thiserror::Error;

/// Errors shared across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("division by zero")]
    DivisionByZero,
    #[error("operands belong to different fields")]
    FieldMismatch,
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("modulus is not a monic irreducible of degree {0}")]
    BadModulus(usize),
    #[error("syntax error at column {col}: {msg}")]
    Syntax { col: usize, msg: String },
    #[error("unknown variable x{index} (expression has {nvars} variables)")]
    UnknownVariable { index: usize, nvars: usize },
    #[error("expression is undefined at the given tuple: singular argument of an inverse ({node})")]
    Domain { node: String },
    #[error("matrix shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("matrix is singular over the free skew field")]
    SingularOverM,
    #[error("right-linear system has no solution: nonzero residual in row {row}")]
    NoSolution { row: usize },
    #[error("inconsistent elimination detected; rerun with a different seed")]
    SeedRetry,
    #[error("randomized test inconclusive: {0}")]
    Inconclusive(String),
    #[error("group action is invalid: {0}")]
    ActionInvalid(String),
    #[error("multiplication table is not a group: {0}")]
    BadGroup(String),
    #[error("field characteristic divides the group order")]
    CharDivides,
    #[error("group action is not linear")]
    NonlinearAction,
    #[error("splitting field needed: minimal polynomial has an irreducible factor of degree {degree} over the ground field")]
    SplittingFieldNeeded { degree: usize },
    #[error("basis still grows at degree {max_degree}; raise the degree cap")]
    DegreeCapExceeded { max_degree: usize },
    #[error("matrix entry outside span{{1, z}}: row {row}, col {col} of X_{mat}")]
    CoverageGap { mat: usize, row: usize, col: usize },
    #[error("invalid parameter: {0}")]
    ParamError(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

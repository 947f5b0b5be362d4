use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("pair ({i},{j}) not contained in configuration {config:?}")]
    PairNotInConfiguration {
        i: usize,
        j: usize,
        config: Vec<usize>,
    },

    #[error("basis mismatch: expected tag \"{expected}\", found \"{found}\"")]
    BasisMismatch { expected: String, found: String },

    #[error("matrix not unitary: deviation {deviation:.3e} exceeds {tol:.3e}")]
    NotUnitary { deviation: f64, tol: f64 },

    #[error(
        "degenerate eigenvalues: gap {gap:.3e} below threshold {threshold:.3e}; \
         raise the perturbation strength epsilon"
    )]
    Degenerate { gap: f64, threshold: f64 },

    #[error(
        "curve tracking ambiguous near lambda={lambda}: best overlap {overlap:.3} \
         still below 0.5 after {depth} bisections"
    )]
    GridResolution {
        lambda: f64,
        overlap: f64,
        depth: usize,
    },

    #[error("off-block weight {weight:.3e} outside declared blocks (tol {tol:.3e})")]
    BlockStructure { weight: f64, tol: f64 },

    #[error("resource limit: {0}")]
    ResourceLimit(String),

    #[error("no convergence: {0}")]
    Convergence(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("malformed json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CoreError {
    /// Process exit code the CLI maps this error to.
    /// 2 = invalid input, 3 = resource or convergence failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CoreError::ResourceLimit(_)
            | CoreError::Convergence(_)
            | CoreError::Degenerate { .. }
            | CoreError::GridResolution { .. } => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, CoreError>;

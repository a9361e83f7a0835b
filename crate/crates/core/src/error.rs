use thiserror::Error;

/// Errors raised by the cepstral field library.
#[derive(Debug, Error)]
pub enum CepstralError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("mesh order {mesh} cannot resolve {what} {required}")]
    MeshTooCoarse {
        mesh: usize,
        required: usize,
        what: &'static str,
    },

    #[error("cepstral grid is not mirror symmetric at ({j}, {k})")]
    Asymmetric { j: isize, k: isize },

    #[error("coefficient ({j}, {k}) is masked and must stay zero")]
    MaskedCoefficient { j: isize, k: isize },

    #[error("autocovariance window {available} is too small, need lag {required}")]
    LagWindow { available: usize, required: usize },

    #[error("matrix is not positive definite (leading minor {minor} of {size})")]
    NotPositiveDefinite { minor: usize, size: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("singular normal equations in regression step")]
    SingularDesign,

    #[error("design matrix does not have full column rank")]
    RankDeficient,

    #[error("load error at row {row}, column {col}: {msg}")]
    Load { row: usize, col: usize, msg: String },

    #[error("constant input: Moran's I is undefined")]
    ConstantInput,

    #[error("Hessian is not positive definite; consider refining the model")]
    IndefiniteHessian,

    #[error("models are not nested: {0}")]
    NotNested(String),

    #[error("no observed cells")]
    AllMissing,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, CepstralError>;

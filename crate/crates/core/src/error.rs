use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("position error norm vanished (pe = {0:e})")]
    ZeroPositionError(f64),

    #[error("lateral error vanished: e^a is parallel to the base vertical (pe^j = {0:e})")]
    LateralDegenerate(f64),

    #[error("error cone degenerates to the y-z plane at ke = 1")]
    ConeDegenerate,

    #[error("singular configuration: {0}")]
    SingularConfiguration(String),

    #[error("smallest eigenvalue lambda_0 = {0:e} must be positive")]
    SingularLambda0(f64),

    #[error("mass estimate shape violation: {0}")]
    ShapeViolation(String),

    #[error("mass matrix is not symmetric positive definite")]
    NotPositiveDefinite,

    #[error("allocation residual {residual:e} exceeds tolerance {tol:e}")]
    ResidualTooLarge { residual: f64, tol: f64 },

    #[error("no log samples with t > {0}")]
    EmptyWindow(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

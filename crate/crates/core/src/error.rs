use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("voltage {voltage} V outside Simmons domain for barrier height {barrier_height} V (need |V|/2 < phi)")]
    Domain { voltage: f64, barrier_height: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("insufficient points: need at least {needed}, found {found}")]
    InsufficientPoints { needed: usize, found: usize },

    #[error("fitted slope {0} is not positive")]
    NonPositiveSlope(f64),

    #[error("invalid IV curve: {0}")]
    InvalidCurve(String),

    #[error("fit did not converge after {iterations} iterations (best params {best:?}, residual {residual_norm:e})")]
    NotConverged {
        iterations: usize,
        best: Vec<f64>,
        residual_norm: f64,
    },

    #[error("no feasible step from the current parameters")]
    NoFeasibleStep,

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("barrier shorted at pixel ({x}, {y})")]
    Shorted { x: usize, y: usize },

    #[error("out of bounds: {0}")]
    OutOfBounds(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

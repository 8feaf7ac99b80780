use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("multi-index {index:?} lies outside the index set of grid {points:?}")]
    IndexOutOfRange { index: Vec<i64>, points: Vec<usize> },

    #[error("grid mismatch: {left:?} vs {right:?}")]
    GridMismatch { left: Vec<usize>, right: Vec<usize> },

    #[error("imaginary residue {residue:e} exceeds tolerance {tol:e} (relative to field norm)")]
    NonRealField { residue: f64, tol: f64 },

    #[error("target grid {to:?} is coarser than source grid {from:?}")]
    CoarserTarget { from: Vec<usize>, to: Vec<usize> },

    #[error("field carries Nyquist content {content:e} and cannot be represented on another grid")]
    NyquistContent { content: f64 },

    #[error("material: {0}")]
    Material(String),

    #[error("coefficient at grid point {point:?} is not symmetric positive definite")]
    NotSpd { point: Vec<f64> },

    #[error("solver: {0}")]
    Solver(String),

    #[error("operation requires an odd grid, got {0:?}")]
    EvenGrid(Vec<usize>),

    #[error("field is not conforming: residual {residual:e} outside the subspace")]
    NonConforming { residual: f64 },

    #[error("dense assembly on {0} grid points exceeds the oracle cap")]
    TooLarge(usize),

    #[error("matrix is not symmetric (asymmetry {0:e})")]
    Asymmetric(f64),

    #[error("singular matrix")]
    Singular,

    #[error("bitmap: {0}")]
    Bitmap(String),

    #[error("configuration invalid:\n{}", .0.join("\n"))]
    Config(Vec<String>),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

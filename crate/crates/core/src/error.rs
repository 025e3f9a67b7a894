use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("wavefunctions live on different grids")]
    GridMismatch,

    #[error("state is not normalized (norm² = {norm_sq})")]
    NotNormalized { norm_sq: f64 },

    #[error("singular tridiagonal system at row {row}; check dt and grid")]
    SingularSystem { row: usize },

    #[error("eigensolver failed: {0}")]
    NonConvergence(String),

    #[error("every grid point is a node; phase is undefined")]
    AllMasked,

    #[error("need at least {needed} time slices, got {got}")]
    InsufficientSnapshots { needed: usize, got: usize },

    #[error("potential is not differentiable: {0}")]
    NotDifferentiable(&'static str),

    #[error("model `{0}` has no closed-form coincidence probability")]
    UnsupportedModel(&'static str),

    #[error("empty angle grid")]
    EmptyGrid,
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

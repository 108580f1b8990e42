use thiserror::Error;

/// Every failure mode of the engine. The CLI maps these onto exit codes.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum GeomError {
    #[error("syntax error at byte {position}: {message}")]
    Syntax { position: usize, message: String },

    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate metric block (det = {det:e}, condition number = {condition:e})")]
    DegenerateHessian { det: f64, condition: f64 },

    #[error("lower-right (vertical) block is singular")]
    SingularVBlock,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("metric block is not positive definite (smallest eigenvalue {0:e})")]
    NotPositiveDefinite(f64),

    #[error("lattice axis {axis} has {sites} sites, at least 3 are required")]
    PatchTooSmall { axis: usize, sites: usize },

    #[error("Clifford dimension {0} exceeds the supported maximum of 8")]
    DimensionTooLarge(usize),

    #[error("multivectors carry different quadratic forms")]
    FormMismatch,

    #[error("jet order {0} exceeds the supported maximum")]
    OrderTooLarge(u8),

    #[error("shooting diverged after {iterations} iterations (residual {residual:e})")]
    ShootingDiverged { iterations: usize, residual: f64 },

    #[error("distance solver stalled after {iterations} iterations (gap estimate {gap:e})")]
    SolverStalled { iterations: usize, gap: f64 },

    #[error("sites {0} and {1} are not connected by the commutator constraints")]
    Disconnected(usize, usize),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, GeomError>;

use thiserror::Error;

use crate::dsl::ParseError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("symbol `{symbol}` has no derivative rule for argument slot {slot}")]
    UnknownSymbol { symbol: String, slot: usize },

    #[error("jet order {order} exceeds the configured cap {cap}")]
    OrderOverflow { order: usize, cap: usize },

    #[error("density is not linear in the selected bank: {0}")]
    NotLinear(String),

    #[error("vector field is not a symmetry of the Lagrangian")]
    NotASymmetry,

    #[error("generalized Bianchi expressions do not vanish identically")]
    BianchiNonzero,

    #[error("background does not satisfy the field equations (residual {residual:e})")]
    BackgroundNotCritical { residual: f64 },

    #[error("stencil of radius {radius} does not fit at node {node}")]
    StencilOutOfRange { node: usize, radius: usize },

    #[error("ODE integration failed: {0}")]
    IntegrationFailure(String),

    #[error("division by zero")]
    DivisionByZero,

    #[error("cannot evaluate: {0}")]
    Eval(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("computation cancelled")]
    Cancelled,

    #[error(transparent)]
    Parse(#[from] ParseError),
}

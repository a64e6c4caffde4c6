//! Error type shared across the crate.

/// Everything that can go wrong in the numerical core.
///
/// Numeric payloads are carried as `f64` (converted from the working scalar)
/// purely for display; errors are diagnostics, not data.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("field has {got} values but the grid has {expected} nodes")]
    FieldLength { expected: usize, got: usize },

    #[error("invalid problem parameters: {0}")]
    InvalidParams(String),

    #[error("invalid component subset: {0}")]
    InvalidSubset(String),

    #[error(
        "component {component}: lambda = {lambda:.6} lies outside the admissible window ({lo:.6}, {hi:.6})"
    )]
    Inadmissible {
        component: usize,
        lambda: f64,
        lo: f64,
        hi: f64,
    },

    #[error("component {component} vanishes identically; nothing to project")]
    ZeroComponent { component: usize },

    #[error("interaction matrix is not positive definite; the cooperative projection is undefined")]
    InteractionIndefinite,

    #[error("aggregate interaction is nonpositive ({value:.6e}); no scaling onto the constraint exists")]
    NotScalable { value: f64 },

    #[error("constraint projection failed: {0}")]
    ProjectionFailed(String),

    #[error(
        "bubble scale eps = {eps:.3e} is under-resolved on this grid (h = {h:.3e}; need eps >= 10h)"
    )]
    UnderResolved { eps: f64, h: f64 },

    #[error("invalid solve configuration: {0}")]
    InvalidConfig(String),

    #[error(
        "solver did not converge within {iters} iterations (relative gradient {gradient:.3e}, last energy decrease {decrease:.3e})"
    )]
    NoConvergence {
        iters: usize,
        gradient: f64,
        decrease: f64,
    },

    #[error(
        "component {component} collapsed: |u|_6^6 = {value:.6e} fell below the floor {floor:.6e}"
    )]
    ComponentCollapse {
        component: usize,
        value: f64,
        floor: f64,
    },

    #[error("outside the regime of this check: {0}")]
    RegimeViolated(String),
}

pub type Result<T> = std::result::Result<T, Error>;

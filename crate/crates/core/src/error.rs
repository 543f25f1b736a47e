use thiserror::Error;

/// Errors surfaced by the solver pipeline.
#[derive(Error, Debug)]
pub enum MfgError {
    /// A parameter or grid value violates its invariant.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Two objects that must share a grid do not.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// The log-argument `A = (1 - e^{-r(T-t)}) - r I1` was non-positive on
    /// more than the tolerated fraction of interior nodes.
    #[error(
        "degenerate kernel: {clamped} of {interior} interior nodes had A <= 0 \
         (worst A = {worst_a:.3e} at time index {worst_i}, level index {worst_j})"
    )]
    DegenerateKernel {
        clamped: usize,
        interior: usize,
        worst_a: f64,
        worst_i: usize,
        worst_j: usize,
    },

    /// The dynamic-programming boundary touched the edge of its x-range.
    #[error("oracle boundary left the x-range: {0}")]
    OracleRange(String),
}

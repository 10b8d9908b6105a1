//! Crate-wide error type.
//!
//! Validation failures carry enough context to be actionable from the CLI;
//! numerical failures identify where the computation broke down.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A constructor or option check rejected its input.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Attempted to normalize a zero magnetization vector.
    #[error("degenerate magnetization")]
    DegenerateMagnetization,

    /// Fewer than two elements cannot represent a gradient.
    #[error("mesh too coarse: {n_elements} element(s), need at least 2")]
    MeshTooCoarse { n_elements: usize },

    /// A field and the matrices acting on it were built on different meshes.
    #[error("mesh mismatch: field has {found} nodes, operator expects {expected}")]
    MeshMismatch { expected: usize, found: usize },

    /// The semilinear right-hand side only equals the full one on unit fields.
    #[error("semilinear form invalid off the sphere: node {node} deviates from unit norm by {deviation:.3e}")]
    OffSphere { node: usize, deviation: f64 },

    /// A state or right-hand side evaluation stopped being finite.
    #[error("numerical blow-up at node {node} (t = {t})")]
    NumericalBlowUp { node: usize, t: f64 },

    /// Time step violates the mesh stability heuristic.
    #[error("dt too large for mesh: dt = {dt}, heuristic limit {limit:.3e} (pass allow_large_dt to override)")]
    DtTooLarge { dt: f64, limit: f64 },

    /// Fewer than three samples cannot enclose an area.
    #[error("degenerate loop: {0} sample(s), need at least 3")]
    DegenerateLoop(usize),

    /// Exponential fit is meaningless once the distance underflows to zero.
    #[error("trajectory reached target; rate undefined")]
    RateUndefined,

    /// Configuration file could not be parsed or failed validation.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

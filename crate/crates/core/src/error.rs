use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter `{name}` out of domain: {reason}")]
    Domain { name: &'static str, reason: String },

    #[error("weight rho = {rho} is inadmissible (must be > -2)")]
    InadmissibleWeight { rho: f64 },

    #[error("boundary spec does not cover the boundary: {0}")]
    BoundarySpec(String),

    #[error("singularity center coincides with a grid vertex")]
    DegenerateSingularity,

    #[error("point ({x}, {y}) outside the field window")]
    OutOfDomain { x: f64, y: f64 },

    #[error("flow line start is invalid: {0}")]
    StartPoint(String),

    #[error("invalid tracing option: {0}")]
    Option(String),

    #[error("invalid driver spec: {0}")]
    DriverSpec(String),

    #[error("numerical instability at step {step}: |z| = {magnitude:.3e}")]
    Instability { step: usize, magnitude: f64 },

    #[error("SDE step too coarse: {0}")]
    Stability(String),

    #[error("insufficient radial range: {0}")]
    Range(String),

    #[error("invalid hit: indices not geometrically adjacent")]
    InvalidHit,

    #[error("invalid input: {0}")]
    Input(String),

    #[error("ordering failure: {cycle_pairs} of {total_pairs} pairs inconsistent with the final order")]
    OrderingFailure {
        cycle_pairs: usize,
        total_pairs: usize,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),

    #[error("bad grid file: {0}")]
    GridFormat(String),
}

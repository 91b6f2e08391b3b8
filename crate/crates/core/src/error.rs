use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("sector dimension {dimension} exceeds the configured cap {cap}")]
    Capacity { dimension: u64, cap: usize },

    #[error("sector mismatch: expected {expected} particles, found {found}")]
    SectorMismatch { expected: usize, found: usize },

    #[error("mode index {mode} out of range for {num_modes} modes")]
    InvalidMode { mode: usize, num_modes: usize },

    #[error("invalid occupation tuple: {0}")]
    InvalidTuple(String),

    #[error("parameter `{0}` is not finite")]
    NonFinite(&'static str),

    #[error("operator is not Hermitian (max |H - H^dagger| = {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("eigendecomposition failed for a {dimension}x{dimension} matrix with max |H_ij| = {max_element:e}")]
    Convergence { dimension: usize, max_element: f64 },

    #[error("time step too large: dt * max|H_ij| = {product:.4} > 0.1; use dt <= {suggested_dt:e}")]
    StepTooLarge { product: f64, suggested_dt: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("time {requested} is not on the propagator lattice; nearest reachable: {below} and {above}")]
    UnreachableTime { requested: f64, below: f64, above: f64 },

    #[error("rung of {bytes} bytes exceeds the memory cap of {cap} bytes")]
    MemoryCap { bytes: usize, cap: usize },

    #[error("energy window [{lo}, {hi}] contains no eigenvalue (nearest: {nearest:?})")]
    EmptyWindow { lo: f64, hi: f64, nearest: Vec<f64> },

    #[error("at least {needed} levels are required, got {got}")]
    TooFewLevels { needed: usize, got: usize },

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("integrity check failed: {0}")]
    Integrity(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("energy grid aliases: max|E| * dtau = {product:.4} > pi")]
    Aliasing { product: f64 },

    #[error("fit did not converge: {reason} (best residual {residual:e})")]
    FitFailed { reason: String, residual: f64 },

    #[error("not enough usable data: need {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("missing artifact {path} (produced by the `{stage}` stage)")]
    MissingArtifact { path: PathBuf, stage: &'static str },

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code used by the command-line tool: 2 for anything that
    /// is rejected before compute starts, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Capacity { .. }
            | Error::SectorMismatch { .. }
            | Error::InvalidMode { .. }
            | Error::InvalidTuple(_)
            | Error::NonFinite(_)
            | Error::StepTooLarge { .. }
            | Error::InvalidConfig(_)
            | Error::UnreachableTime { .. }
            | Error::EmptyWindow { .. }
            | Error::InvalidPartition(_)
            | Error::ShapeMismatch(_)
            | Error::GridMismatch(_)
            | Error::Aliasing { .. }
            | Error::MissingArtifact { .. }
            | Error::Parse { .. } => 2,
            _ => 3,
        }
    }

    pub(crate) fn parse(context: impl Into<String>, message: impl std::fmt::Display) -> Self {
        Error::Parse { context: context.into(), message: message.to_string() }
    }
}

//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: String, found: String },

    #[error("data length {len} does not match shape product {expected}")]
    DataLength { len: usize, expected: usize },

    #[error("index vector length {len} does not match tensor rank {rank}")]
    IndexLength { len: usize, rank: usize },

    #[error("index vector entries must be 0 or 1")]
    IndexEntry,

    #[error("ensemble is empty")]
    EmptyEnsemble,

    #[error("ensemble needs at least {needed} components, got {got}")]
    ComponentCount { needed: usize, got: usize },

    #[error("state is off its manifold: defect {defect:.3e} exceeds tolerance {tol:.3e}")]
    OffManifold { defect: f64, tol: f64 },

    #[error("coupling strengths must be nonnegative (got {0})")]
    NegativeCoupling(f64),

    #[error("{0}")]
    FrequencyStructure(String),

    #[error("square matrix states required, got shape {0}")]
    NotSquare(String),

    #[error("matrix is numerically singular")]
    SingularMatrix,

    #[error("retraction defect guard exceeded: defect {defect:.3e} > {guard:.3e} at t = {t}")]
    DefectGuard { defect: f64, guard: f64, t: f64 },

    #[error("non-finite derivative encountered at t = {t}")]
    NonFiniteDerivative { t: f64 },

    #[error("dimension condition violated: {0}")]
    DimensionCondition(String),

    #[error("monitor needs at least 3 frames, got {0}")]
    InsufficientFrames(usize),

    #[error("frames are not uniformly sampled")]
    NonUniformSampling,

    #[error("nonpositive values in decay-fit window")]
    NonpositiveValues,

    #[error("monitor '{name}' violated at t = {t} (slack {slack:.3e})")]
    MonitorViolation { name: String, t: f64, slack: f64 },

    #[error("unknown preset '{name}'; valid presets: {valid}")]
    UnknownPreset { name: String, valid: String },

    #[error("target unreachable: {0}")]
    UnreachableTarget(String),

    #[error("configuration invalid:\n{}", .0.join("\n"))]
    Validation(Vec<String>),

    #[error("wall-clock budget of {budget} s exceeded at t = {t}")]
    BudgetExceeded { budget: f64, t: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("config parse error: {0}")]
    Toml(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code per the CLI contract: 2 validation, 1 monitor, 3 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_)
            | Error::UnknownPreset { .. }
            | Error::Toml(_)
            | Error::DimensionCondition(_) => 2,
            Error::MonitorViolation { .. } => 1,
            _ => 3,
        }
    }
}

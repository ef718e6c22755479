use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("epsilon value {value} at index {index} is outside [0, 1]")]
    Domain { index: usize, value: f64 },

    #[error("epsilon value at index {index} is zero; theorem-4 plans need a positive sequence")]
    ZeroEpsilon { index: usize },

    #[error("explicit epsilon list has {len} entries, index {index} requested")]
    ListExhausted { index: usize, len: usize },

    #[error(
        "block {block}: no cut found within {horizon} indices after n = {start} \
         (best {reached:.6} against target {target:.6}); the sequence looks non-divergent"
    )]
    NonDivergence {
        block: usize,
        start: usize,
        horizon: usize,
        reached: f64,
        target: f64,
    },

    #[error("vector is not a unit vector (norm {norm})")]
    NonUnitVector { norm: f64 },

    #[error("construction precondition failed: {0}")]
    Precondition(String),

    #[error("index {index} out of range 1..={dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("dimension {dim} exceeds the cap {cap}; {hint}")]
    TooLarge { dim: usize, cap: usize, hint: &'static str },

    #[error("matrix is singular (sigma_min / sigma_max = {ratio:e})")]
    Singular { ratio: f64 },

    #[error("matrix must be square and non-empty, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("plan has {blocks} blocks, none reaches normalized root-mass {threshold}; plan more blocks")]
    PlanExhausted { blocks: usize, threshold: f64 },

    #[error("cannot split an all-zero weight list")]
    DegenerateSplit,

    #[error("permutation covers 1..={have}, but block needs 1..={needed}")]
    PermutationRange { needed: usize, have: usize },

    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),

    #[error("plan mode mismatch: {0}")]
    PlanMode(&'static str),

    #[error("config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}

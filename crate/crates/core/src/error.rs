use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("joint {joint} state {state} outside range [{lo}, {hi}]")]
    StateOutOfRange { joint: usize, state: f64, lo: f64, hi: f64 },
    #[error("unknown category `{0}`")]
    UnknownCategory(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("part {0} is degenerate (diagonal below 1e-9)")]
    DegeneratePart(usize),
    #[error("no viewpoint with all parts visible after {0} attempts")]
    ResampleLimitExceeded(usize),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("schema mismatch: {0}")]
    SchemaVersionMismatch(String),
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("part {0} has no points")]
    EmptyPart(usize),
    #[error("joint {joint} has {count} associated votes, need at least 3")]
    InsufficientVotes { joint: usize, count: usize },
    #[error("part has {0} points, need at least 3")]
    TooFewPoints(usize),
    #[error("solver diverged: {0}")]
    SolverDiverged(String),
    #[error("joint {0}: (R1 + R2) u' vanishes, axis undefined")]
    DegenerateAxis(usize),
    #[error("prediction is for scene {found}, expected scene {expected}")]
    SceneMismatch { expected: u64, found: u64 },
    #[error("invalid prediction: {0}")]
    InvalidPrediction(String),
    #[error("count mismatch: {0}")]
    CountMismatch(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

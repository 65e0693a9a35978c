use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("agents are coincident (separation {separation:e} m below {threshold:e} m)")]
    CoincidentAgents { separation: f64, threshold: f64 },

    #[error("distance must be positive, got {0}")]
    NonpositiveDistance(f64),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("leader configuration does not affinely span the plane (condition number {condition:e})")]
    DegenerateLeaderConfiguration { condition: f64 },

    #[error("singular linear system: {0}")]
    SingularSystem(String),

    #[error("follower {agent} has no neighbors")]
    NoNeighbors { agent: usize },

    #[error("gain condition violated: {0}")]
    GainConditionViolated(String),

    #[error("clearance c_c = {clearance} must lie in (0, {min_gap})")]
    InvalidClearance { clearance: f64, min_gap: f64 },

    #[error("leader {leader} has zero offset from the target")]
    ZeroOffset { leader: usize },

    #[error("collision at t = {t:.6} s between agents {i} and {j} (distance {distance:e} m)")]
    CollisionDetected { t: f64, i: usize, j: usize, distance: f64 },

    #[error("numerical blowup at t = {t:.6} s: {what}")]
    NumericalBlowup { t: f64, what: String },

    #[error("stress synthesis failed: {0}")]
    SynthesisFailed(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

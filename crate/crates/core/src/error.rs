use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("tilt by x={x} diverges for component size {j}")]
    TiltDivergence { j: usize, x: f64 },

    #[error("inconsistent model: {0}")]
    InconsistentModel(String),

    #[error("component size {j} is beyond the tree-count horizon {horizon}")]
    Horizon { j: usize, horizon: usize },

    #[error("n={n} exceeds the enumeration guard {guard}")]
    Size { n: usize, guard: usize },

    #[error("P[T_0n = n] vanishes for n={n}; the conditional law is undefined")]
    ConditioningImpossible { n: usize },

    #[error("no tail bound is available for this model: {0}")]
    TailUnknown(String),

    #[error("enumeration exceeded the node budget of {budget}")]
    Budget { budget: usize },

    #[error("operation requires a Poisson family, got {0}")]
    Family(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("internal consistency failure: {0}")]
    Internal(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input")]
    EmptyInput,

    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },

    #[error("unknown sink {0}")]
    UnknownSink(String),

    #[error("unknown user {0}")]
    UnknownUser(String),

    #[error("empty seed")]
    EmptySeed,

    #[error("empty set")]
    EmptySet,

    #[error("window too short: need at least 3 points, got {0}")]
    WindowTooShort(usize),

    #[error("inconsistent timestamp sets: subset is not contained in the full set")]
    InconsistentTimestamps,

    #[error("isolated sink: zero weighted indegree")]
    IsolatedSink,

    #[error("user {0} is not in the current suspicious set")]
    NotInSet(usize),

    #[error("degenerate seed: no incident edges")]
    DegenerateSeed,

    #[error("all seeds degenerate")]
    AllSeedsDegenerate,

    #[error("matricization requires timestamps")]
    MissingTimestamps,

    #[error("rating signal requires ratings in the input")]
    MissingRatings,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(
        "truncated SVD did not converge after {iterations} iterations (worst residual {worst_residual:.3e})"
    )]
    NotConverged {
        iterations: usize,
        residuals: Vec<f64>,
        worst_residual: f64,
    },

    #[error("too few eligible target objects: need {needed}, found {available} (short by {})", needed - available)]
    InsufficientTargets { needed: usize, available: usize },

    #[error("truth labels contain a single class")]
    SingleClass,

    #[error("infeasible density {density} for the requested shape")]
    InfeasibleDensity { density: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

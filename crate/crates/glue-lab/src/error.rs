use glue_core::GlueError;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, LabError>;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("config invalid: {0}")]
    Config(String),
    #[error("io failure on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("grid dump: {0}")]
    Dump(String),
    #[error(transparent)]
    Core(#[from] GlueError),
}

impl LabError {
    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        LabError::Io { path: path.display().to_string(), source }
    }
}

/// Process exit status of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    BoundViolated,
    Diverged,
    ConfigError,
    /// I/O and other failures outside the documented classes.
    Failure,
}

impl Status {
    pub fn code(self) -> u8 {
        match self {
            Status::Ok => 0,
            Status::Failure => 1,
            Status::BoundViolated => 2,
            Status::Diverged => 3,
            Status::ConfigError => 4,
        }
    }

    /// The more severe of two statuses (divergence outranks a violated bound).
    pub fn worst(self, other: Status) -> Status {
        let rank = |s: Status| match s {
            Status::Ok => 0,
            Status::BoundViolated => 1,
            Status::Diverged => 2,
            Status::Failure => 3,
            Status::ConfigError => 4,
        };
        if rank(other) > rank(self) {
            other
        } else {
            self
        }
    }
}

impl From<&LabError> for Status {
    fn from(e: &LabError) -> Self {
        match e {
            LabError::Config(_) => Status::ConfigError,
            LabError::Core(g) => match g {
                GlueError::BoundViolated(_)
                | GlueError::HypothesisFailed { .. }
                | GlueError::NotContractive { .. }
                | GlueError::MatchingViolated { .. }
                | GlueError::TransversalityFailed { .. } => Status::BoundViolated,
                GlueError::Diverged { .. } | GlueError::NoConvergence(_) | GlueError::StepRejected(_) | GlueError::ChartExceeded { .. } => {
                    Status::Diverged
                }
                GlueError::InvalidParams(_) | GlueError::GammaOutOfRange(_) => Status::ConfigError,
                _ => Status::Failure,
            },
            _ => Status::Failure,
        }
    }
}

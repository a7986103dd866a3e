use std::path::PathBuf;

use crate::grid::Trajectory;
use crate::ppo::TrainingMetrics;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Invalid parameters, dimension mismatches and rejected config fields.
    /// `field` is a dotted path such as `system.inertia[3]`.
    #[error("configuration error at `{field}`: {message}")]
    Config { field: String, message: String },

    /// A state component left the finite range `|x| <= 1e6`.
    #[error("numeric overflow at bus {bus}{}", step.map(|s| format!(" (step {s})")).unwrap_or_default())]
    NumericOverflow { bus: usize, step: Option<usize> },

    #[error("infeasible equilibrium: {0}")]
    InfeasibleEquilibrium(String),

    /// API misuse: stepping a finished episode, out-of-range action, and so on.
    #[error("usage error: {0}")]
    Usage(String),

    /// Non-finite values inside the policy networks or the training loss.
    #[error("numeric error in {location}: {message}")]
    Numeric { location: String, message: String },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {}: {message}", path.display())]
    Parse { path: PathBuf, message: String },

    #[error("simulation aborted at step {step}: {source}")]
    SimulationAborted {
        step: usize,
        #[source]
        source: Box<Error>,
        /// Every finite state reached before the failure.
        partial: Box<Trajectory>,
    },

    #[error("rollout failed at step {step}: {source}")]
    Rollout {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("training aborted in update {update}: {source}")]
    TrainingAborted {
        update: usize,
        #[source]
        source: Box<Error>,
        /// Metrics of every update that completed.
        metrics: Vec<TrainingMetrics>,
    },

    #[error("rollout of action (bus {target}, k' = {coefficient}) failed: {source}")]
    Action {
        target: usize,
        coefficient: f64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable name for error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config { .. } => "config",
            Error::NumericOverflow { .. } => "numeric_overflow",
            Error::InfeasibleEquilibrium(_) => "infeasible_equilibrium",
            Error::Usage(_) => "usage",
            Error::Numeric { .. } => "numeric",
            Error::Checkpoint(_) => "checkpoint",
            Error::Io { .. } => "io",
            Error::Parse { .. } => "parse",
            Error::SimulationAborted { .. } => "simulation_aborted",
            Error::Action { .. } => "action",
            Error::Rollout { .. } => "rollout",
            Error::TrainingAborted { .. } => "training_aborted",
        }
    }
}

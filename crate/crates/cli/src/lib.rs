//! Scenario-driven front end for the `contdef-core` simulation.
//!
//! The binary exposes three commands: `certify` checks a scenario's plan
//! against the safety certificate, `run` flies it and writes traces and
//! reports, and `sweep` repeats a run over a list of parameter values.

use std::path::PathBuf;

pub mod commands;
pub mod output;
pub mod report;
pub mod scenario;

pub use scenario::{Loaded, Scenario};

/// Environment variable that overrides the output directory.
pub const OUT_DIR_ENV: &str = "CONTDEF_OUT_DIR";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("scenario parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("scenario serialization error: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error("invalid scenario: {0}")]
    Config(String),
    #[error("{}: {}", module_of(.0), .0)]
    Core(#[from] contdef_core::Error),
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
    #[error("json output: {0}")]
    Json(#[from] serde_json::Error),
    #[error("output directory {0} is not empty; pass --force to overwrite")]
    OutputExists(PathBuf),
    #[error("{0}")]
    Usage(String),
}

/// Core module an error originates from.
pub fn module_of(e: &contdef_core::Error) -> &'static str {
    use contdef_core::Error::*;
    match e {
        CollinearLeaders { .. }
        | CollinearNeighbors { .. }
        | SingularTransform { .. }
        | OrientationReversed { .. }
        | InvalidFormation(_)
        | WeightSum { .. }
        | WeightMismatch { .. }
        | UnknownAgent(_) => "formation",
        FollowerOutsideTriangle(_) | InfeasibleMargins { .. } | EmptyPlan => "safety",
        DegenerateDuration { .. } | InvalidDirection { .. } | TimeOutOfRange { .. } => "guidance",
        InsufficientSamples(_) | BufferUnderrun { .. } => "vehicle",
        EmptyLog => "netsim",
        MisalignedTrace { .. } | EmptyTrace => "monitor",
        NonFinite(_) | InvalidParameter { .. } => "core",
    }
}

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    /// Certificate or constraint failure.
    Fail,
}

impl Outcome {
    pub fn from_pass(pass: bool) -> Self {
        if pass {
            Outcome::Pass
        } else {
            Outcome::Fail
        }
    }

    pub fn code(self) -> i32 {
        match self {
            Outcome::Pass => 0,
            Outcome::Fail => 1,
        }
    }
}

impl CliError {
    /// Every error is a configuration or environment problem.
    pub fn exit_code(&self) -> i32 {
        2
    }
}

//! Experiment-runner library behind the `ppredict` binary: configuration,
//! stage orchestration, and the solver benchmark.

pub mod bench;
pub mod config;
pub mod pipeline;

use ppredict_core::error::ErrorKind;
use ppredict_core::Error as CoreError;

/// CLI-level error: a core failure tagged with the pipeline stage it
/// occurred in, or a configuration/benchmark problem.
#[derive(Debug)]
pub enum CliError {
    Stage { stage: &'static str, source: CoreError },
    Config(String),
    AgreementGate { max_relative_disagreement: f64 },
}

impl CliError {
    pub fn stage(stage: &'static str, source: CoreError) -> Self {
        Self::Stage { stage, source }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Self::Config(msg.into())
    }

    pub fn agreement_gate(max: f64) -> Self {
        Self::AgreementGate { max_relative_disagreement: max }
    }

    /// Exit codes: 2 config/input, 3 numeric failure, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::AgreementGate { .. } => 3,
            Self::Stage { source, .. } => match source.kind() {
                ErrorKind::Input => 2,
                ErrorKind::Numeric => 3,
                ErrorKind::Io => 4,
            },
        }
    }

    /// Machine-readable error object for stderr.
    pub fn to_json(&self) -> serde_json::Value {
        match self {
            Self::Stage { stage, source } => serde_json::json!({
                "error": {
                    "stage": stage,
                    "name": source.name(),
                    "message": source.to_string(),
                }
            }),
            Self::Config(msg) => serde_json::json!({
                "error": { "stage": "config", "name": "InvalidConfig", "message": msg }
            }),
            Self::AgreementGate { max_relative_disagreement } => serde_json::json!({
                "error": {
                    "stage": "bench",
                    "name": "SolverDisagreement",
                    "message": format!(
                        "solver outputs disagree by {max_relative_disagreement:.3e} (gate 1e-6)"
                    ),
                }
            }),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Stage { stage, source } => write!(f, "[{stage}] {source}"),
            CliError::Config(msg) => write!(f, "[config] {msg}"),
            CliError::AgreementGate { max_relative_disagreement } => write!(
                f,
                "[bench] solver outputs disagree by {max_relative_disagreement:.3e}"
            ),
        }
    }
}

impl std::error::Error for CliError {}

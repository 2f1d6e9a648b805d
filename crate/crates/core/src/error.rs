//! Error types shared across the simulator.

use thiserror::Error;

/// Static configuration problems: bad geometry, bad masks, unresolved
/// references. These abort a run before epoch 0 (CLI exit code 2).
#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("geometry: {0}")]
    Geometry(String),
    #[error("way mask: {0}")]
    Mask(String),
    #[error("unknown device `{0}`")]
    UnknownDevice(String),
    #[error("unknown workload `{0}`")]
    UnknownWorkload(String),
    #[error("scenario: {0}")]
    Scenario(String),
}

/// Contract violations detected while a simulation is running, e.g. a device
/// exceeding its per-epoch DMA budget (CLI exit code 3).
#[derive(Debug, Error, PartialEq, Eq)]
#[error("simulation assertion: {0}")]
pub struct SimAssertion(pub String);

/// Scenario-text parse failures. Every variant carries the 1-based line
/// number of the offending input line.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("line {line}: syntax error: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: unknown section `{name}`")]
    UnknownSection { line: usize, name: String },
    #[error("line {line}: duplicate section `{name}`")]
    DuplicateSection { line: usize, name: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: bad value for `{key}`: {msg}")]
    BadValue { line: usize, key: String, msg: String },
    #[error("line {line}: unresolved reference `{name}`")]
    UnresolvedReference { line: usize, name: String },
    #[error("line {line}: invariant violation: {msg}")]
    Invariant { line: usize, msg: String },
}

impl ParseError {
    pub fn line(&self) -> usize {
        match self {
            ParseError::Syntax { line, .. }
            | ParseError::UnknownSection { line, .. }
            | ParseError::DuplicateSection { line, .. }
            | ParseError::UnknownKey { line, .. }
            | ParseError::BadValue { line, .. }
            | ParseError::UnresolvedReference { line, .. }
            | ParseError::Invariant { line, .. } => *line,
        }
    }
}

use thiserror::Error;

use crate::graph::NodeId;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegistryError {
    #[error("malformed registry: {0}")]
    Format(String),
    #[error("duplicate declaration `{0}`")]
    Duplicate(String),
    #[error("unknown type or function `{0}`")]
    UnknownName(String),
    #[error("invalid registry: {0}")]
    Invalid(String),
}

/// Errors raised while parsing, building or typechecking a graph.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum DfError {
    #[error("unknown function `{0}`")]
    UnknownFunction(String),
    #[error("arity mismatch in `{function}`: {detail}")]
    ArityMismatch { function: String, detail: String },
    #[error("type mismatch in slot `{slot}`: expected {expected}, got {got}")]
    TypeMismatch {
        slot: String,
        expected: String,
        got: String,
    },
    #[error("syntax error at byte {position}: {message}")]
    SyntaxError { position: usize, message: String },
    #[error("dangling node reference {0:?}")]
    DanglingNode(NodeId),
    #[error("edge would create a cycle")]
    Cycle,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("evaluation failed at {node:?}: {reason}")]
    Failed { node: NodeId, reason: String },
    #[error("`{function}` applied to a value outside slot type {expected}")]
    TypeViolation { function: String, expected: String },
}

impl EvalError {
    pub fn reason(&self) -> String {
        match self {
            EvalError::Failed { reason, .. } => reason.clone(),
            other => other.to_string(),
        }
    }
}

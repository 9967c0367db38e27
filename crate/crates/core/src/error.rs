use thiserror::Error;

use crate::graph::ClusterId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("duplicate variable `{0}`")]
    DuplicateVariable(String),
    #[error("variable `{0}` must have at least one state")]
    ZeroCardinality(String),
    #[error("arc {parent} -> {child} would close a directed cycle")]
    CyclicArc { parent: String, child: String },
    #[error("duplicate arc {parent} -> {child}")]
    DuplicateArc { parent: String, child: String },
    #[error("arc {parent} -> {child} does not exist")]
    MissingArc { parent: String, child: String },
    #[error("arc {parent} -> {child} references an unknown variable")]
    DanglingArc { parent: String, child: String },
    #[error("self-loop on `{0}`")]
    SelfLoop(String),
    #[error("unknown cluster {0}")]
    UnknownCluster(ClusterId),
    #[error("no edge between clusters {0} and {1}")]
    MissingEdge(ClusterId, ClusterId),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("invalid network spec: {0}")]
    InvalidSpec(String),
    #[error("{field}: {source}")]
    Field { field: String, source: Box<Error> },
    #[error("{0}")]
    Io(String),
}

impl Error {
    pub(crate) fn pre(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }

    pub(crate) fn at(self, field: impl Into<String>) -> Self {
        Error::Field { field: field.into(), source: Box::new(self) }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Syntax { line: e.line(), column: e.column(), message: e.to_string() }
    }
}

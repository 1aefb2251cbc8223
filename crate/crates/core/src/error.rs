use std::path::PathBuf;

use thiserror::Error;

use crate::model::NodeType;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("invalid name {0:?}: empty after trimming")]
    InvalidName(String),
    #[error("unknown stereotype `{0}`")]
    UnknownStereotype(String),
    #[error("stereotype `{stereotype}` cannot be applied to {target}")]
    Applicability { stereotype: String, target: String },
    #[error("no model item named `{0}`")]
    MissingTarget(String),
    #[error("node `{name}` is a {existing:?}; refusing to merge a {incoming:?}")]
    TypeConflict {
        name: String,
        existing: NodeType,
        incoming: NodeType,
    },
    #[error("self-flow on `{0}` rejected")]
    SelfFlow(String),
    #[error("invalid trace entry: {0}")]
    InvalidTrace(String),
}

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0} is not a directory")]
    NotADirectory(PathBuf),
    #[error("empty keyword")]
    EmptyKeyword,
    #[error("malformed pattern: {0}")]
    Pattern(#[from] regex::Error),
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("{file}:{line}: {message}")]
pub struct ParseError {
    pub file: String,
    pub line: usize,
    pub message: String,
}

impl ParseError {
    pub fn new(file: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Self {
            file: file.into(),
            line,
            message: message.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("catalog syntax: {0}")]
    Syntax(#[from] toml::de::Error),
    #[error("catalog entry `{entry}`: {message}")]
    Entry { entry: String, message: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("bad pattern in `{entry}`: {source}")]
    Pattern {
        entry: String,
        #[source]
        source: regex::Error,
    },
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("duplicate {kind} `{id}` in {document} document")]
    Duplicate {
        kind: &'static str,
        id: String,
        document: &'static str,
    },
    #[error("malformed document: {0}")]
    Document(String),
    #[error("no counts given")]
    Empty,
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error("no files indexed under {0}")]
    NothingIndexed(PathBuf),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error("extractor registry is empty")]
    EmptyRegistry,
}

/// Internal failure of one extractor; the pipeline logs it and moves on.
#[derive(Debug, Error)]
pub enum ExtractError {
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{0}")]
    Other(String),
}

#[derive(Debug, Error)]
pub enum DocumentError {
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid document: {0}")]
    Invalid(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

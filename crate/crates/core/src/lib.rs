//! Extraction of security-annotated dataflow diagrams from Java/Spring
//! microservice codebases, with traceability back to the code.

pub mod analysis;
pub mod error;
pub mod eval;
pub mod exec;
pub mod extractors;
pub mod model;
pub mod output;
pub mod parsers;
pub mod search;

//! Command-line and HTTP front end: ingest a repository, analyze it, write
//! or return the documents.

pub mod ingest;
pub mod request;
pub mod run;
pub mod serve;

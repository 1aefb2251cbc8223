//! One-call analysis of a local directory.

use std::path::Path;
use std::time::{Duration, Instant};

use crate::error::AnalysisError;
use crate::exec::Parallelism;
use crate::extractors::{default_registry, run_pipeline, PipelineOptions, PipelineReport};
use crate::model::Dfd;
use crate::output;
use crate::search::{FileIndex, IndexOptions};

#[derive(Debug, Clone, Default)]
pub struct AnalysisOptions {
    pub index: IndexOptions,
    pub pipeline: PipelineOptions,
}

impl AnalysisOptions {
    /// Matches the reference prototype: comments are searched too and the
    /// broader heuristics are on.
    pub fn with_paper_parity(mut self, on: bool) -> Self {
        self.pipeline.paper_parity = on;
        self.index.skip_comments = !on;
        self
    }

    pub fn with_parallelism(mut self, p: Parallelism) -> Self {
        self.pipeline.parallelism = p;
        self.index.parallelism = p;
        self
    }
}

#[derive(Debug, Clone)]
pub struct Analysis {
    pub dfd: Dfd,
    pub report: PipelineReport,
    pub files_indexed: usize,
    /// Indexing plus extraction, excluding any clone.
    pub elapsed: Duration,
}

impl Analysis {
    pub fn json(&self) -> Vec<u8> {
        output::dfd_to_json(&self.dfd)
    }

    pub fn trace_json(&self) -> Vec<u8> {
        output::trace_to_json(self.dfd.trace())
    }

    pub fn dot(&self) -> String {
        output::dfd_to_dot(&self.dfd)
    }
}

pub fn analyze_directory(root: &Path, options: &AnalysisOptions) -> Result<Analysis, AnalysisError> {
    let started = Instant::now();
    let index = FileIndex::build(root, options.index.clone())?;
    if index.is_empty() {
        return Err(AnalysisError::NothingIndexed(root.to_path_buf()));
    }
    let registry = default_registry(&options.pipeline);
    let (dfd, mut report) = run_pipeline(&index, &registry, &options.pipeline)?;
    report
        .warnings
        .extend(index.warnings().iter().map(|w| format!("{}: {}", w.path, w.message)));
    report.warnings.sort();
    Ok(Analysis {
        dfd,
        report,
        files_indexed: index.len(),
        elapsed: started.elapsed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_directory_is_fatal() {
        let dir = tempfile::tempdir().unwrap();
        let err = analyze_directory(dir.path(), &AnalysisOptions::default()).unwrap_err();
        assert!(matches!(err, AnalysisError::NothingIndexed(_)));
    }

    #[test]
    fn missing_directory_is_fatal() {
        let err = analyze_directory(Path::new("/no/such/dir/anywhere"), &AnalysisOptions::default()).unwrap_err();
        assert!(matches!(err, AnalysisError::Search(_)));
    }

    #[test]
    fn parity_searches_comments() {
        let o = AnalysisOptions::default().with_paper_parity(true);
        assert!(o.pipeline.paper_parity && !o.index.skip_comments);
    }
}

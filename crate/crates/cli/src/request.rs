use std::path::PathBuf;

use anyhow::{bail, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Trace,
    Dot,
    Png,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Source {
    Path(PathBuf),
    RepoUrl(String),
}

impl Source {
    /// URLs and scp-style git addresses are cloned, anything else is a path.
    pub fn guess(text: &str) -> Source {
        if text.contains("://") || text.starts_with("git@") {
            Source::RepoUrl(text.to_string())
        } else {
            Source::Path(PathBuf::from(text))
        }
    }

    pub fn is_empty(&self) -> bool {
        match self {
            Source::Path(p) => p.as_os_str().is_empty(),
            Source::RepoUrl(u) => u.trim().is_empty(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct AnalysisRequest {
    pub source: Source,
    /// Branch, tag or commit to check out; the remote HEAD when absent.
    pub git_ref: Option<String>,
    pub output_dir: PathBuf,
    pub formats: Vec<Format>,
    pub rules: Vec<PathBuf>,
    pub images: Vec<PathBuf>,
    pub eval_truth: Option<PathBuf>,
    pub paper_parity: bool,
}

impl AnalysisRequest {
    pub fn new(source: Source) -> Self {
        Self {
            source,
            git_ref: None,
            output_dir: PathBuf::from("."),
            formats: vec![Format::Json, Format::Trace, Format::Dot],
            rules: Vec::new(),
            images: Vec::new(),
            eval_truth: None,
            paper_parity: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.source.is_empty() {
            bail!("empty source");
        }
        if self.formats.is_empty() {
            bail!("no output format requested");
        }
        if self.git_ref.is_some() && matches!(self.source, Source::Path(_)) {
            bail!("--ref only applies to --repo-url");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn guesses_sources() {
        assert_eq!(Source::guess("https://x/y.git"), Source::RepoUrl("https://x/y.git".into()));
        assert_eq!(Source::guess("git@host:a/b"), Source::RepoUrl("git@host:a/b".into()));
        assert_eq!(Source::guess("./app"), Source::Path("./app".into()));
    }

    #[test]
    fn validation() {
        let mut r = AnalysisRequest::new(Source::Path("a".into()));
        assert!(r.validate().is_ok());
        r.formats.clear();
        assert!(r.validate().is_err());
        let mut r = AnalysisRequest::new(Source::Path("".into()));
        assert!(r.validate().is_err());
        r.source = Source::Path("a".into());
        r.git_ref = Some("main".into());
        assert!(r.validate().is_err());
    }
}

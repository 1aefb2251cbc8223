//! Opening a local directory or a shallow clone of a git repository.

use std::path::{Path, PathBuf};
use std::process::Command;

use anyhow::{bail, Context, Result};
use tempfile::TempDir;

use crate::request::Source;

/// A directory ready for analysis. A clone lives in a temporary directory
/// that is removed when this is dropped.
#[derive(Debug)]
pub struct Checkout {
    pub root: PathBuf,
    /// The resolved commit of a clone.
    pub commit: Option<String>,
    _clone: Option<TempDir>,
}

pub fn open(source: &Source, git_ref: Option<&str>) -> Result<Checkout> {
    match source {
        Source::Path(p) => {
            if !p.is_dir() {
                bail!("{} is not a readable directory", p.display());
            }
            Ok(Checkout {
                root: p.clone(),
                commit: None,
                _clone: None,
            })
        }
        Source::RepoUrl(url) => {
            let dir = tempfile::tempdir().context("creating clone directory")?;
            let commit = shallow_clone(url, git_ref, dir.path())?;
            Ok(Checkout {
                root: dir.path().to_path_buf(),
                commit: Some(commit),
                _clone: Some(dir),
            })
        }
    }
}

fn git(dir: &Path, args: &[&str]) -> Result<String> {
    let out = Command::new("git")
        .args(args)
        .current_dir(dir)
        .output()
        .context("running git; is it installed?")?;
    if !out.status.success() {
        bail!("git {} failed: {}", args.join(" "), String::from_utf8_lossy(&out.stderr).trim());
    }
    Ok(String::from_utf8_lossy(&out.stdout).trim().to_string())
}

/// Fetches a single commit, so branches, tags and full commit ids all work
/// as `git_ref`. Returns the checked-out commit id.
pub fn shallow_clone(url: &str, git_ref: Option<&str>, dir: &Path) -> Result<String> {
    git(dir, &["init", "--quiet"])?;
    git(dir, &["remote", "add", "origin", url])?;
    git(dir, &["fetch", "--quiet", "--depth", "1", "origin", git_ref.unwrap_or("HEAD")])
        .with_context(|| format!("cloning {url}"))?;
    git(dir, &["checkout", "--quiet", "--detach", "FETCH_HEAD"])?;
    git(dir, &["rev-parse", "HEAD"])
}

/// Name used for output files: the last path or URL segment.
pub fn app_name(source: &Source) -> String {
    let raw = match source {
        Source::Path(p) => std::fs::canonicalize(p)
            .ok()
            .and_then(|c| c.file_name().map(|n| n.to_string_lossy().into_owned()))
            .unwrap_or_default(),
        Source::RepoUrl(u) => {
            let tail = u.trim_end_matches('/').rsplit(['/', ':']).next().unwrap_or_default();
            tail.trim_end_matches(".git").to_string()
        }
    };
    if raw.is_empty() {
        "app".to_string()
    } else {
        raw
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names() {
        assert_eq!(app_name(&Source::RepoUrl("https://github.com/sqshq/piggymetrics.git".into())), "piggymetrics");
        assert_eq!(app_name(&Source::RepoUrl("git@host:team/shop/".into())), "shop");
        assert_eq!(app_name(&Source::RepoUrl("".into())), "app");
    }

    #[test]
    fn missing_directory() {
        let err = open(&Source::Path("/no/such/place".into()), None).unwrap_err();
        assert!(err.to_string().contains("not a readable directory"));
    }
}

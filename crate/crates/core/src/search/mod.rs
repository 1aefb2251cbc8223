//! Text index over a codebase snapshot and the grep-style search primitives
//! every extractor is built on.

mod classify;
mod env;
mod find;
mod iterative;

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use walkdir::WalkDir;

pub use classify::{ClassRule, Classifier, LangClass};
pub use env::{parse_env_token, EnvResolution};
pub use find::{Keyword, Match};
pub use iterative::{EvidenceChain, IdentifierRule, MAX_CHAIN_LEN};

use crate::error::SearchError;
use crate::exec::{self, Parallelism};

const DEFAULT_MAX_FILE_SIZE: u64 = 2 * 1024 * 1024;

#[derive(Debug, Clone)]
pub struct IndexOptions {
    /// Drop hits inside Java comments.
    pub skip_comments: bool,
    pub max_file_size: u64,
    /// Directory names never descended into.
    pub ignore_dirs: Vec<String>,
    pub classifier: Classifier,
    pub parallelism: Parallelism,
}

impl Default for IndexOptions {
    fn default() -> Self {
        Self {
            skip_comments: true,
            max_file_size: DEFAULT_MAX_FILE_SIZE,
            ignore_dirs: [".git", "target", "build", "node_modules"]
                .into_iter()
                .map(String::from)
                .collect(),
            classifier: Classifier::default(),
            parallelism: Parallelism::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexWarning {
    pub path: String,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct IndexedFile {
    /// Path relative to the index root, `/`-separated.
    pub path: String,
    pub lines: Vec<String>,
    pub class: LangClass,
    /// Per line: true when the whole line is commented out.
    comment: Vec<bool>,
}

impl IndexedFile {
    pub fn new(path: &str, content: &str, class: LangClass) -> Self {
        let lines: Vec<String> = content
            .split('\n')
            .map(|l| l.strip_suffix('\r').unwrap_or(l).to_string())
            .collect();
        let mut lines = lines;
        if lines.last().is_some_and(|l| l.is_empty()) {
            lines.pop();
        }
        let comment = if class == LangClass::Java {
            java_comment_lines(&lines)
        } else {
            vec![false; lines.len()]
        };
        Self {
            path: path.to_string(),
            lines,
            class,
            comment,
        }
    }

    pub fn is_comment_line(&self, idx: usize) -> bool {
        self.comment.get(idx).copied().unwrap_or(false)
    }

    /// 1-based line lookup.
    pub fn line(&self, line: usize) -> Option<&str> {
        line.checked_sub(1)
            .and_then(|i| self.lines.get(i))
            .map(String::as_str)
    }

    pub fn file_name(&self) -> &str {
        self.path.rsplit('/').next().unwrap_or(&self.path)
    }

    pub fn dir(&self) -> &str {
        parent_dir(&self.path)
    }

    pub fn text(&self) -> String {
        self.lines.join("\n")
    }
}

pub fn parent_dir(path: &str) -> &str {
    path.rfind('/').map(|i| &path[..i]).unwrap_or("")
}

/// Marks lines that start with `//` or lie inside a block comment.
fn java_comment_lines(lines: &[String]) -> Vec<bool> {
    let mut out = Vec::with_capacity(lines.len());
    let mut in_block = false;
    for line in lines {
        let t = line.trim_start();
        if in_block {
            out.push(true);
            if let Some(pos) = t.find("*/") {
                in_block = false;
                if t[pos + 2..].contains("/*") && !t[pos + 2..].contains("*/") {
                    in_block = true;
                }
            }
            continue;
        }
        if t.starts_with("//") {
            out.push(true);
        } else if let Some(rest) = t.strip_prefix("/*") {
            out.push(true);
            in_block = !rest.contains("*/");
        } else {
            out.push(false);
            if let Some(pos) = find_outside_strings(t, "/*") {
                in_block = !t[pos + 2..].contains("*/");
            }
        }
    }
    out
}

fn find_outside_strings(line: &str, needle: &str) -> Option<usize> {
    let bytes = line.as_bytes();
    let mut in_str = false;
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'\\' if in_str => i += 1,
            b'"' => in_str = !in_str,
            _ if !in_str && line[i..].starts_with(needle) => return Some(i),
            b'/' if !in_str && line[i..].starts_with("//") => return None,
            _ => {}
        }
        i += 1;
    }
    None
}

/// Immutable text snapshot of a codebase.
#[derive(Debug, Clone)]
pub struct FileIndex {
    root: PathBuf,
    files: Vec<IndexedFile>,
    by_path: HashMap<String, usize>,
    warnings: Vec<IndexWarning>,
    options: IndexOptions,
}

impl FileIndex {
    /// Indexes every regular text file under `root`.
    pub fn build(root: impl AsRef<Path>, options: IndexOptions) -> Result<Self, SearchError> {
        let root = root.as_ref();
        let meta = fs::metadata(root).map_err(|source| SearchError::Io {
            path: root.to_path_buf(),
            source,
        })?;
        if !meta.is_dir() {
            return Err(SearchError::NotADirectory(root.to_path_buf()));
        }
        fs::read_dir(root).map_err(|source| SearchError::Io {
            path: root.to_path_buf(),
            source,
        })?;

        let mut warnings = Vec::new();
        let mut candidates = Vec::new();
        let walker = WalkDir::new(root)
            .sort_by_file_name()
            .into_iter()
            .filter_entry(|e| {
                e.depth() == 0
                    || !(e.file_type().is_dir()
                        && options
                            .ignore_dirs
                            .iter()
                            .any(|d| e.file_name().to_str() == Some(d.as_str())))
            });
        for entry in walker {
            let entry = match entry {
                Ok(e) => e,
                Err(e) => {
                    warnings.push(IndexWarning {
                        path: e
                            .path()
                            .map(|p| p.display().to_string())
                            .unwrap_or_default(),
                        message: e.to_string(),
                    });
                    continue;
                }
            };
            if !entry.file_type().is_file() {
                continue;
            }
            let rel = match entry.path().strip_prefix(root) {
                Ok(r) => r
                    .components()
                    .map(|c| c.as_os_str().to_string_lossy())
                    .collect::<Vec<_>>()
                    .join("/"),
                Err(_) => continue,
            };
            candidates.push((entry.path().to_path_buf(), rel));
        }

        let results = exec::map(&candidates, options.parallelism, |(abs, rel)| {
            read_candidate(abs, rel, &options)
        });
        let mut files = Vec::new();
        for r in results {
            match r {
                Ok(Some(f)) => files.push(f),
                Ok(None) => {}
                Err(w) => warnings.push(w),
            }
        }
        files.sort_by(|a, b| a.path.cmp(&b.path));
        Ok(Self::from_files(root.to_path_buf(), files, warnings, options))
    }

    /// Index over in-memory files, mostly for tests and services.
    pub fn from_memory<'a>(
        files: impl IntoIterator<Item = (&'a str, &'a str)>,
        options: IndexOptions,
    ) -> Self {
        let mut indexed: Vec<IndexedFile> = files
            .into_iter()
            .map(|(p, c)| IndexedFile::new(p, c, options.classifier.classify(p)))
            .collect();
        indexed.sort_by(|a, b| a.path.cmp(&b.path));
        indexed.dedup_by(|a, b| a.path == b.path);
        Self::from_files(PathBuf::new(), indexed, Vec::new(), options)
    }

    fn from_files(
        root: PathBuf,
        files: Vec<IndexedFile>,
        warnings: Vec<IndexWarning>,
        options: IndexOptions,
    ) -> Self {
        let by_path = files
            .iter()
            .enumerate()
            .map(|(i, f)| (f.path.clone(), i))
            .collect();
        Self {
            root,
            files,
            by_path,
            warnings,
            options,
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn files(&self) -> &[IndexedFile] {
        &self.files
    }

    pub fn file(&self, path: &str) -> Option<&IndexedFile> {
        self.by_path.get(path).map(|&i| &self.files[i])
    }

    pub fn files_of(&self, class: LangClass) -> impl Iterator<Item = &IndexedFile> {
        self.files.iter().filter(move |f| f.class == class)
    }

    pub fn warnings(&self) -> &[IndexWarning] {
        &self.warnings
    }

    pub fn options(&self) -> &IndexOptions {
        &self.options
    }

    pub fn len(&self) -> usize {
        self.files.len()
    }

    pub fn is_empty(&self) -> bool {
        self.files.is_empty()
    }

    pub fn parallelism(&self) -> Parallelism {
        self.options.parallelism
    }

    /// Same content, different scheduling.
    pub fn with_parallelism(mut self, parallelism: Parallelism) -> Self {
        self.options.parallelism = parallelism;
        self
    }
}

fn read_candidate(
    abs: &Path,
    rel: &str,
    options: &IndexOptions,
) -> Result<Option<IndexedFile>, IndexWarning> {
    let warn = |message: String| IndexWarning {
        path: rel.to_string(),
        message,
    };
    let meta = fs::metadata(abs).map_err(|e| warn(e.to_string()))?;
    if meta.len() > options.max_file_size {
        return Ok(None);
    }
    let bytes = fs::read(abs).map_err(|e| warn(e.to_string()))?;
    if bytes.iter().take(8192).any(|&b| b == 0) {
        return Ok(None);
    }
    let content = String::from_utf8_lossy(&bytes);
    let class = options.classifier.classify(rel);
    Ok(Some(IndexedFile::new(rel, &content, class)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comment_lines_detected() {
        let src = "class A {\n  // @EnableX\n  /* start\n   * @EnableY\n   */\n  @EnableZ /* trailing */\n}\n";
        let f = IndexedFile::new("A.java", src, LangClass::Java);
        let flags: Vec<bool> = (0..f.lines.len()).map(|i| f.is_comment_line(i)).collect();
        assert_eq!(flags, vec![false, true, true, true, true, false, false]);
    }

    #[test]
    fn url_in_string_is_not_a_comment() {
        let src = "String u = \"http://x/*\";\nint a = 1;\n";
        let f = IndexedFile::new("A.java", src, LangClass::Java);
        assert!(!f.is_comment_line(1));
    }

    #[test]
    fn build_index_skips_ignored_and_binary() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path();
        fs::create_dir_all(p.join(".git/objects")).unwrap();
        fs::create_dir_all(p.join("src/main/resources")).unwrap();
        fs::create_dir_all(p.join("target")).unwrap();
        fs::write(p.join(".git/config"), "[core]").unwrap();
        fs::write(p.join("target/A.class"), "x").unwrap();
        fs::write(p.join("src/A.java"), "class A {}").unwrap();
        fs::write(p.join("src/main/resources/bootstrap.yml"), "a: b").unwrap();
        fs::write(p.join("pom.xml"), "<project/>").unwrap();
        fs::write(p.join("logo.png"), [0x89u8, 0x50, 0, 0, 1]).unwrap();
        let idx = FileIndex::build(p, IndexOptions::default()).unwrap();
        let paths: Vec<&str> = idx.files().iter().map(|f| f.path.as_str()).collect();
        assert_eq!(paths, vec!["pom.xml", "src/A.java", "src/main/resources/bootstrap.yml"]);
        assert_eq!(idx.file("src/main/resources/bootstrap.yml").unwrap().class, LangClass::Yaml);
    }

    #[test]
    fn oversized_files_skipped() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("big.txt"), "x".repeat(64)).unwrap();
        let opts = IndexOptions {
            max_file_size: 10,
            ..IndexOptions::default()
        };
        assert!(FileIndex::build(dir.path(), opts).unwrap().is_empty());
    }

    #[test]
    fn missing_root_is_an_error() {
        let err = FileIndex::build("/definitely/not/here", IndexOptions::default()).unwrap_err();
        assert!(matches!(err, SearchError::Io { .. }));
    }
}

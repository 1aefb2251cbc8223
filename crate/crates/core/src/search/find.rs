use regex::Regex;

use super::{FileIndex, IndexedFile, LangClass};
use crate::error::SearchError;
use crate::exec;
use crate::model::{Span, TraceEntry};

/// What to search for. Literals are case-sensitive substrings.
#[derive(Debug, Clone, Copy)]
pub enum Keyword<'a> {
    Literal(&'a str),
    /// A literal that does not continue an identifier on either side, so
    /// `@EnableHystrix` misses `@EnableHystrixDashboard`.
    Word(&'a str),
    Pattern(&'a str),
    Compiled(&'a Regex),
}

/// One keyword hit.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Match {
    pub file: String,
    /// 1-based.
    pub line: usize,
    pub span: Span,
    pub line_text: String,
}

impl Match {
    pub fn text(&self) -> &str {
        &self.line_text[self.span.start..self.span.end]
    }

    pub fn trace(&self) -> TraceEntry {
        TraceEntry::new(self.file.clone(), self.line, self.span, self.text())
            .expect("matches have non-empty spans")
    }

    /// Trace for a sub-slice of this match's line.
    pub fn trace_at(&self, start: usize, evidence: &str) -> Option<TraceEntry> {
        TraceEntry::at(&self.file, self.line, &self.line_text, start, evidence)
    }

    /// Trace for the first occurrence of `evidence` on this line at or after
    /// the match, falling back to the match itself.
    pub fn trace_of(&self, evidence: &str) -> TraceEntry {
        if !evidence.is_empty() {
            if let Some(pos) = self.line_text[self.span.start..].find(evidence) {
                if let Some(t) = self.trace_at(self.span.start + pos, evidence) {
                    return t;
                }
            }
            if let Some(pos) = self.line_text.find(evidence) {
                if let Some(t) = self.trace_at(pos, evidence) {
                    return t;
                }
            }
        }
        self.trace()
    }
}

enum Matcher<'a> {
    Literal(&'a str),
    Word(&'a str),
    Regex(std::borrow::Cow<'a, Regex>),
}

impl Matcher<'_> {
    fn spans(&self, line: &str, out: &mut Vec<Span>) {
        match self {
            Matcher::Literal(k) => {
                for (i, m) in line.match_indices(k) {
                    out.push(Span::new(i, i + m.len()));
                }
            }
            Matcher::Word(k) => {
                let ident = |c: Option<char>| c.is_some_and(|c| c.is_alphanumeric() || c == '_');
                let first = k.chars().next();
                let last = k.chars().next_back();
                for (i, m) in line.match_indices(k) {
                    let before = line[..i].chars().next_back();
                    let after = line[i + m.len()..].chars().next();
                    if (ident(first) && ident(before)) || (ident(last) && ident(after)) {
                        continue;
                    }
                    out.push(Span::new(i, i + m.len()));
                }
            }
            Matcher::Regex(re) => {
                for m in re.find_iter(line) {
                    if m.start() < m.end() {
                        out.push(Span::new(m.start(), m.end()));
                    }
                }
            }
        }
    }
}

fn matcher<'a>(keyword: &Keyword<'a>) -> Result<Matcher<'a>, SearchError> {
    Ok(match *keyword {
        Keyword::Literal(k) => {
            if k.is_empty() {
                return Err(SearchError::EmptyKeyword);
            }
            Matcher::Literal(k)
        }
        Keyword::Word(k) => {
            if k.is_empty() {
                return Err(SearchError::EmptyKeyword);
            }
            Matcher::Word(k)
        }
        Keyword::Pattern(p) => {
            if p.is_empty() {
                return Err(SearchError::EmptyKeyword);
            }
            Matcher::Regex(std::borrow::Cow::Owned(Regex::new(p)?))
        }
        Keyword::Compiled(re) => Matcher::Regex(std::borrow::Cow::Borrowed(re)),
    })
}

fn scan_file(file: &IndexedFile, m: &Matcher<'_>, skip_comments: bool) -> Vec<Match> {
    let mut out = Vec::new();
    let mut spans = Vec::new();
    for (i, line) in file.lines.iter().enumerate() {
        if skip_comments && file.is_comment_line(i) {
            continue;
        }
        spans.clear();
        m.spans(line, &mut spans);
        for span in &spans {
            out.push(Match {
                file: file.path.clone(),
                line: i + 1,
                span: *span,
                line_text: line.clone(),
            });
        }
    }
    out
}

impl FileIndex {
    /// Every occurrence of `keyword` in files of the given classes (all files
    /// when `filter` is `None`), ordered by path, line and column.
    pub fn find_keyword(
        &self,
        keyword: Keyword<'_>,
        filter: Option<&[LangClass]>,
    ) -> Result<Vec<Match>, SearchError> {
        let m = matcher(&keyword)?;
        let skip = self.options().skip_comments;
        let files: Vec<&IndexedFile> = self
            .files()
            .iter()
            .filter(|f| filter.is_none_or(|cs| cs.contains(&f.class)))
            .collect();
        let per_file = exec::map(&files, self.parallelism(), |f| scan_file(f, &m, skip));
        Ok(per_file.into_iter().flatten().collect())
    }

    /// Literal search restricted to the given classes.
    pub fn find(&self, literal: &str, classes: &[LangClass]) -> Vec<Match> {
        self.find_keyword(Keyword::Literal(literal), Some(classes))
            .unwrap_or_default()
    }

    /// Occurrences inside one file.
    pub fn find_in_file(&self, path: &str, keyword: Keyword<'_>) -> Result<Vec<Match>, SearchError> {
        let m = matcher(&keyword)?;
        Ok(self
            .file(path)
            .map(|f| scan_file(f, &m, self.options().skip_comments))
            .unwrap_or_default())
    }
}

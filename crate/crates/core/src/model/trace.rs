use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::ModelError;

/// Half-open byte interval `[start, end)` within one line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    /// Parses the `"(start:end)"` rendering.
    pub fn parse(text: &str) -> Option<Span> {
        let inner = text.trim().strip_prefix('(')?.strip_suffix(')')?;
        let (a, b) = inner.split_once(':')?;
        Some(Span::new(a.trim().parse().ok()?, b.trim().parse().ok()?))
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}:{})", self.start, self.end)
    }
}

/// Location of one piece of code evidence.
///
/// `evidence` is the exact text covered by `span` on `line` of `file`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TraceEntry {
    pub file: String,
    pub line: usize,
    pub span: Span,
    pub evidence: String,
}

impl TraceEntry {
    pub fn new(
        file: impl Into<String>,
        line: usize,
        span: Span,
        evidence: impl Into<String>,
    ) -> Result<Self, ModelError> {
        let entry = Self {
            file: file.into(),
            line,
            span,
            evidence: evidence.into(),
        };
        if entry.line == 0 {
            return Err(ModelError::InvalidTrace("line numbers are 1-based".into()));
        }
        if entry.span.is_empty() {
            return Err(ModelError::InvalidTrace(format!(
                "empty span {} in {}:{}",
                entry.span, entry.file, entry.line
            )));
        }
        Ok(entry)
    }

    /// Trace pointing at `evidence` found at byte `start` of `line_text`.
    pub fn at(file: &str, line: usize, line_text: &str, start: usize, evidence: &str) -> Option<Self> {
        let end = start + evidence.len();
        if line_text.get(start..end) != Some(evidence) {
            return None;
        }
        Self::new(file, line, Span::new(start, end), evidence).ok()
    }
}

impl fmt::Display for TraceEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{} {}", self.file, self.line, self.span)
    }
}

/// All evidence recorded for one model item.
///
/// Entries are kept ordered so that the primary entry (the smallest) does not
/// depend on the order evidence was added in.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TraceRecord {
    pub entries: BTreeSet<TraceEntry>,
    pub sub_items: BTreeMap<String, BTreeSet<TraceEntry>>,
}

impl TraceRecord {
    pub fn primary(&self) -> Option<&TraceEntry> {
        self.entries.iter().next()
    }

    pub fn files(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.file.as_str())
    }

    pub fn all_entries(&self) -> impl Iterator<Item = &TraceEntry> {
        self.entries
            .iter()
            .chain(self.sub_items.values().flat_map(|s| s.iter()))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TraceStore {
    records: BTreeMap<String, TraceRecord>,
}

impl TraceStore {
    pub fn record(&mut self, item_id: &str, entry: TraceEntry) {
        self.records
            .entry(item_id.to_string())
            .or_default()
            .entries
            .insert(entry);
    }

    pub fn record_sub_item(&mut self, item_id: &str, key: &str, entry: TraceEntry) {
        self.records
            .entry(item_id.to_string())
            .or_default()
            .sub_items
            .entry(key.to_string())
            .or_default()
            .insert(entry);
    }

    pub(crate) fn clear_entries(&mut self, item_id: &str) {
        if let Some(r) = self.records.get_mut(item_id) {
            r.entries.clear();
        }
    }

    pub fn get(&self, item_id: &str) -> Option<&TraceRecord> {
        self.records.get(item_id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &TraceRecord)> {
        self.records.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub(crate) fn insert_record(&mut self, item_id: String, record: TraceRecord) {
        self.records.insert(item_id, record);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn span_renders_like_listing() {
        assert_eq!(Span::new(10, 30).to_string(), "(10:30)");
        assert_eq!(Span::parse("(8:12)"), Some(Span::new(8, 12)));
        assert_eq!(Span::parse("8:12"), None);
    }

    #[test]
    fn empty_span_rejected() {
        assert!(TraceEntry::new("a", 1, Span::new(3, 3), "").is_err());
        assert!(TraceEntry::new("a", 0, Span::new(0, 3), "abc").is_err());
    }

    #[test]
    fn at_checks_text() {
        let line = "    name: notification-service";
        let t = TraceEntry::at("bootstrap.yml", 3, line, 10, "notification-service").unwrap();
        assert_eq!(t.span, Span::new(10, 30));
        assert!(TraceEntry::at("bootstrap.yml", 3, line, 9, "notification-service").is_none());
    }

    #[test]
    fn primary_is_order_independent() {
        let a = TraceEntry::new("b.java", 4, Span::new(0, 2), "ab").unwrap();
        let b = TraceEntry::new("a.java", 9, Span::new(1, 2), "x").unwrap();
        let mut s1 = TraceStore::default();
        s1.record("n", a.clone());
        s1.record("n", b.clone());
        let mut s2 = TraceStore::default();
        s2.record("n", b.clone());
        s2.record("n", a);
        assert_eq!(s1, s2);
        assert_eq!(s1.get("n").unwrap().primary(), Some(&b));
    }
}

//! Flattened configuration properties from Spring YAML and `.properties`
//! files.

use std::collections::BTreeMap;

use super::yaml::{parse_yaml, YamlNode, YamlValue};
use crate::error::ParseError;
use crate::model::{Span, TraceEntry};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PropertyValue {
    pub value: String,
    pub trace: TraceEntry,
}

/// Dotted, lowercase keys mapped to values with their source location.
/// Sequence items are indexed as `key[i]`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PropertyMap {
    entries: BTreeMap<String, PropertyValue>,
}

impl PropertyMap {
    /// Keeps the first value seen for a key.
    pub fn insert(&mut self, key: &str, value: PropertyValue) {
        self.entries.entry(key.to_lowercase()).or_insert(value);
    }

    pub fn get(&self, key: &str) -> Option<&PropertyValue> {
        self.entries.get(&key.to_lowercase())
    }

    pub fn value(&self, key: &str) -> Option<&str> {
        self.get(key).map(|v| v.value.as_str())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &PropertyValue)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Entries whose key equals `prefix` or continues it with `.` or `[`.
    pub fn under<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = (&'a str, &'a PropertyValue)> + 'a {
        let prefix = prefix.to_lowercase();
        self.entries
            .iter()
            .filter(move |(k, _)| {
                k.strip_prefix(prefix.as_str())
                    .is_some_and(|r| r.is_empty() || r.starts_with('.') || r.starts_with('['))
            })
            .map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn extend_from(&mut self, other: &PropertyMap) {
        for (k, v) in &other.entries {
            self.entries.entry(k.clone()).or_insert_with(|| v.clone());
        }
    }

    /// Nested form of the flat keys.
    pub fn unflatten(&self) -> PlainTree {
        let mut root = PlainTree::Map(BTreeMap::new());
        for (k, v) in &self.entries {
            root.insert_path(&split_key(k), v.value.clone());
        }
        root
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Segment {
    Key(String),
    Index(usize),
}

fn split_key(key: &str) -> Vec<Segment> {
    let mut out = Vec::new();
    for part in key.split('.') {
        let mut rest = part;
        if let Some(b) = rest.find('[') {
            out.push(Segment::Key(rest[..b].to_string()));
            rest = &rest[b..];
            while let Some(inner) = rest.strip_prefix('[') {
                let Some(close) = inner.find(']') else { break };
                match inner[..close].parse() {
                    Ok(i) => out.push(Segment::Index(i)),
                    Err(_) => out.push(Segment::Key(inner[..close].to_string())),
                }
                rest = &inner[close + 1..];
            }
        } else {
            out.push(Segment::Key(rest.to_string()));
        }
    }
    out
}

/// Untraced nested configuration, used to check the flattening.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PlainTree {
    Leaf(String),
    Map(BTreeMap<String, PlainTree>),
    Seq(BTreeMap<usize, PlainTree>),
}

impl PlainTree {
    fn insert_path(&mut self, path: &[Segment], value: String) {
        let Some((head, rest)) = path.split_first() else {
            *self = PlainTree::Leaf(value);
            return;
        };
        let child = match head {
            Segment::Key(k) => {
                if !matches!(self, PlainTree::Map(_)) {
                    *self = PlainTree::Map(BTreeMap::new());
                }
                let PlainTree::Map(m) = self else { unreachable!() };
                m.entry(k.clone()).or_insert(PlainTree::Leaf(String::new()))
            }
            Segment::Index(i) => {
                if !matches!(self, PlainTree::Seq(_)) {
                    *self = PlainTree::Seq(BTreeMap::new());
                }
                let PlainTree::Seq(s) = self else { unreachable!() };
                s.entry(*i).or_insert(PlainTree::Leaf(String::new()))
            }
        };
        child.insert_path(rest, value);
    }

    pub fn flatten(&self) -> BTreeMap<String, String> {
        let mut out = BTreeMap::new();
        self.flatten_into("", &mut out);
        out
    }

    fn flatten_into(&self, prefix: &str, out: &mut BTreeMap<String, String>) {
        match self {
            PlainTree::Leaf(v) => {
                out.insert(prefix.to_string(), v.clone());
            }
            PlainTree::Map(m) => {
                for (k, v) in m {
                    v.flatten_into(&join_key(prefix, k), out);
                }
            }
            PlainTree::Seq(s) => {
                for (i, v) in s {
                    v.flatten_into(&format!("{prefix}[{i}]"), out);
                }
            }
        }
    }
}

fn join_key(prefix: &str, key: &str) -> String {
    if prefix.is_empty() {
        key.to_lowercase()
    } else {
        format!("{prefix}.{}", key.to_lowercase())
    }
}

fn flatten_yaml(file: &str, node: &YamlNode, prefix: &str, out: &mut PropertyMap) {
    match &node.value {
        YamlValue::Scalar(s) => {
            if s.is_null() || prefix.is_empty() {
                return;
            }
            if let Some(trace) = s.trace(file) {
                out.insert(
                    prefix,
                    PropertyValue {
                        value: s.text.clone(),
                        trace,
                    },
                );
            }
        }
        YamlValue::Map(entries) => {
            for (k, v) in entries {
                if k.text.is_empty() {
                    continue;
                }
                flatten_yaml(file, v, &join_key(prefix, &k.text), out);
            }
        }
        YamlValue::Seq(items) => {
            for (i, v) in items.iter().enumerate() {
                flatten_yaml(file, v, &format!("{prefix}[{i}]"), out);
            }
        }
    }
}

/// One document of a configuration file.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PropertyDocument {
    pub profile: Option<String>,
    pub map: PropertyMap,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PropertyFile {
    pub path: String,
    pub documents: Vec<PropertyDocument>,
}

impl PropertyFile {
    /// All documents in one map. Plain keys come from the first document that
    /// sets them, unprofiled documents first; keys of a profiled document are
    /// also kept as `profile:key`.
    pub fn merged(&self) -> PropertyMap {
        let mut out = PropertyMap::default();
        let (plain, profiled): (Vec<_>, Vec<_>) =
            self.documents.iter().partition(|d| d.profile.is_none());
        for d in plain.iter().chain(profiled.iter()) {
            out.extend_from(&d.map);
        }
        for d in profiled {
            let p = d.profile.as_deref().unwrap_or_default();
            for (k, v) in d.map.iter() {
                out.insert(&format!("{p}:{k}"), v.clone());
            }
        }
        out
    }
}

fn profile_of(map: &PropertyMap) -> Option<String> {
    ["spring.profiles", "spring.config.activate.on-profile", "spring.profiles[0]"]
        .iter()
        .find_map(|k| map.value(k))
        .map(|p| p.trim().to_string())
        .filter(|p| !p.is_empty())
}

fn document(map: PropertyMap) -> PropertyDocument {
    PropertyDocument {
        profile: profile_of(&map),
        map,
    }
}

/// Parses a Spring YAML configuration file.
pub fn parse_yaml_properties(file: &str, content: &str) -> Result<PropertyFile, ParseError> {
    let docs = parse_yaml(file, content)?;
    Ok(PropertyFile {
        path: file.to_string(),
        documents: docs
            .iter()
            .map(|d| {
                let mut map = PropertyMap::default();
                flatten_yaml(file, d, "", &mut map);
                document(map)
            })
            .filter(|d| !d.map.is_empty())
            .collect(),
    })
}

/// Parses a Java `.properties` file. `#---` separates documents.
pub fn parse_java_properties(file: &str, content: &str) -> Result<PropertyFile, ParseError> {
    let lines: Vec<&str> = content
        .split('\n')
        .map(|l| l.strip_suffix('\r').unwrap_or(l))
        .collect();
    let mut documents = Vec::new();
    let mut map = PropertyMap::default();
    let mut i = 0;
    while i < lines.len() {
        let line = lines[i];
        let line_no = i + 1;
        i += 1;
        let trimmed = line.trim_start();
        if trimmed == "#---" || trimmed == "!---" {
            documents.push(document(std::mem::take(&mut map)));
            continue;
        }
        if trimmed.is_empty() || trimmed.starts_with('#') || trimmed.starts_with('!') {
            continue;
        }
        let indent = line.len() - trimmed.len();
        let sep = trimmed
            .char_indices()
            .find(|&(j, c)| (c == '=' || c == ':') && !trimmed[..j].ends_with('\\'))
            .map(|(j, _)| j)
            .or_else(|| trimmed.find(char::is_whitespace));
        let Some(sep) = sep else {
            continue;
        };
        let key = trimmed[..sep].trim();
        if key.is_empty() {
            return Err(ParseError::new(file, line_no, "property without a key"));
        }
        let after = &trimmed[sep + 1..];
        let lead = after.len() - after.trim_start().len();
        let start = indent + sep + 1 + lead;
        let mut value = after.trim().to_string();
        let first_line_value = value.trim_end_matches('\\').trim_end().to_string();
        while value.ends_with('\\') && i < lines.len() {
            value.pop();
            value.push_str(lines[i].trim());
            i += 1;
        }
        if first_line_value.is_empty() {
            continue;
        }
        let trace = TraceEntry::new(
            file,
            line_no,
            Span::new(start, start + first_line_value.len()),
            first_line_value.clone(),
        )
        .map_err(|e| ParseError::new(file, line_no, e.to_string()))?;
        map.insert(key, PropertyValue { value, trace });
    }
    documents.push(document(map));
    documents.retain(|d| !d.map.is_empty());
    Ok(PropertyFile {
        path: file.to_string(),
        documents,
    })
}

/// Dispatches on the file extension.
pub fn parse_properties(file: &str, content: &str) -> Result<PropertyFile, ParseError> {
    if file.ends_with(".properties") {
        parse_java_properties(file, content)
    } else {
        parse_yaml_properties(file, content)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bootstrap_listing() {
        let src = "spring:\n  application:\n    name: notification-service\n  cloud:\n    config:\n      uri:http://config:8888\n";
        let f = parse_properties("bootstrap.yml", src).unwrap();
        let m = f.merged();
        assert_eq!(m.len(), 2);
        assert_eq!(m.value("spring.application.name"), Some("notification-service"));
        assert_eq!(m.value("spring.cloud.config.uri"), Some("http://config:8888"));
        let t = &m.get("spring.application.name").unwrap().trace;
        assert_eq!((t.line, t.span.to_string().as_str()), (3, "(10:30)"));
    }

    #[test]
    fn properties_file() {
        let f = parse_properties("application.properties", "# c\nserver.ssl.enabled = True\nServer.Port: 8080\n").unwrap();
        let m = f.merged();
        assert_eq!(m.value("server.ssl.enabled"), Some("True"));
        assert_eq!(m.value("server.port"), Some("8080"));
        let t = &m.get("server.ssl.enabled").unwrap().trace;
        assert_eq!(t.evidence, "True");
        assert_eq!(t.span, Span::new(21, 25));
    }

    #[test]
    fn empty_files() {
        assert!(parse_properties("application.yml", "").unwrap().merged().is_empty());
        assert!(parse_properties("a.properties", "").unwrap().merged().is_empty());
    }

    #[test]
    fn lists_are_indexed() {
        let f = parse_properties("application.yml", "a:\n  b:\n    - x\n    - y: 1\n").unwrap();
        let m = f.merged();
        assert_eq!(m.value("a.b[0]"), Some("x"));
        assert_eq!(m.value("a.b[1].y"), Some("1"));
    }

    #[test]
    fn profiles_kept_apart() {
        let src = "server:\n  port: 1\n---\nspring:\n  profiles: docker\nserver:\n  port: 2\n  extra: e\n";
        let f = parse_properties("application.yml", src).unwrap();
        assert_eq!(f.documents.len(), 2);
        assert_eq!(f.documents[1].profile.as_deref(), Some("docker"));
        let m = f.merged();
        assert_eq!(m.value("server.port"), Some("1"));
        assert_eq!(m.value("server.extra"), Some("e"));
        assert_eq!(m.value("docker:server.port"), Some("2"));
    }

    #[test]
    fn continuation_lines() {
        let f = parse_properties("a.properties", "k = a\\\n    b\n").unwrap();
        assert_eq!(f.merged().value("k"), Some("ab"));
    }

    #[test]
    fn unflatten_roundtrip() {
        let f = parse_properties("application.yml", "a:\n  b: 1\n  c:\n    - x\n    - y\nd: 2\n").unwrap();
        let m = f.merged();
        let flat: BTreeMap<String, String> =
            m.iter().map(|(k, v)| (k.to_string(), v.value.clone())).collect();
        assert_eq!(m.unflatten().flatten(), flat);
    }
}

use std::collections::{BTreeMap, BTreeSet};
use std::sync::LazyLock;

use quick_xml::events::Event;
use quick_xml::Reader;
use regex::Regex;

use crate::error::ParseError;
use crate::model::TraceEntry;
use crate::search::{parent_dir, FileIndex, IndexedFile};

/// A build module that may be a deployable service.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BuildModule {
    pub name: String,
    /// Relative directory, empty for the root.
    pub dir: String,
    pub trace: TraceEntry,
}

#[derive(Debug, Default)]
struct Pom {
    artifact_id: Option<(String, TraceEntry)>,
    packaging: Option<String>,
    modules: Vec<(String, TraceEntry)>,
}

fn line_of(content: &str, offset: usize) -> (usize, usize) {
    let before = &content[..offset.min(content.len())];
    let line = before.matches('\n').count() + 1;
    let col = offset - before.rfind('\n').map(|i| i + 1).unwrap_or(0);
    (line, col)
}

fn text_trace(file: &IndexedFile, content: &str, from: usize, text: &str) -> Option<TraceEntry> {
    let off = content[from..].find(text)? + from;
    let (line, col) = line_of(content, off);
    TraceEntry::at(&file.path, line, file.line(line)?, col, text)
}

fn parse_pom(file: &IndexedFile) -> Result<Pom, ParseError> {
    let content = file.text();
    let mut reader = Reader::from_str(&content);
    reader.config_mut().trim_text(true);
    let mut path: Vec<String> = Vec::new();
    let mut pom = Pom::default();
    loop {
        let before = reader.buffer_position() as usize;
        let ev = reader.read_event().map_err(|e| {
            let (line, _) = line_of(&content, reader.error_position() as usize);
            ParseError::new(&file.path, line, e.to_string())
        })?;
        match ev {
            Event::Start(e) => path.push(String::from_utf8_lossy(e.local_name().as_ref()).into_owned()),
            Event::End(_) => {
                path.pop();
            }
            Event::Text(t) => {
                let text = t
                    .unescape()
                    .map_err(|e| ParseError::new(&file.path, line_of(&content, before).0, e.to_string()))?
                    .trim()
                    .to_string();
                if text.is_empty() {
                    continue;
                }
                let p: Vec<&str> = path.iter().map(String::as_str).collect();
                match p.as_slice() {
                    ["project", "artifactId"] => {
                        if let Some(t) = text_trace(file, &content, before, &text) {
                            pom.artifact_id = Some((text, t));
                        }
                    }
                    ["project", "packaging"] => pom.packaging = Some(text),
                    ["project", "modules", "module"] => {
                        if let Some(t) = text_trace(file, &content, before, &text) {
                            pom.modules.push((text, t));
                        }
                    }
                    _ => {}
                }
            }
            Event::Eof => break,
            _ => {}
        }
    }
    if !path.is_empty() {
        return Err(ParseError::new(&file.path, file.lines.len().max(1), "unclosed element"));
    }
    Ok(pom)
}

static GRADLE_INCLUDE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\s*include\b(.*)$").unwrap());
static QUOTED: LazyLock<Regex> = LazyLock::new(|| Regex::new(r#"['"]([^'"]+)['"]"#).unwrap());

fn gradle_includes(file: &IndexedFile) -> Vec<(String, TraceEntry)> {
    let mut out = Vec::new();
    for (i, line) in file.lines.iter().enumerate() {
        let Some(c) = GRADLE_INCLUDE.captures(line) else { continue };
        let rest = c.get(1).unwrap();
        for q in QUOTED.captures_iter(rest.as_str()) {
            let m = q.get(1).unwrap();
            let start = rest.start() + m.start();
            if let Some(t) = TraceEntry::at(&file.path, i + 1, line, start, m.as_str()) {
                out.push((m.as_str().to_string(), t));
            }
        }
    }
    out
}

fn is_build_file(name: &str) -> bool {
    matches!(name, "pom.xml" | "build.gradle" | "build.gradle.kts")
}

fn join_dir(base: &str, rel: &str) -> String {
    let mut parts: Vec<&str> = if base.is_empty() { Vec::new() } else { base.split('/').collect() };
    for seg in rel.split('/') {
        match seg {
            "" | "." => {}
            ".." => {
                parts.pop();
            }
            s => parts.push(s),
        }
    }
    parts.join("/")
}

fn basename(dir: &str) -> &str {
    dir.rsplit('/').next().unwrap_or(dir)
}

/// Service candidates from Maven and Gradle build files. Aggregator builds
/// (modules or includes, or `pom` packaging) are not candidates; every other
/// directory with its own build file is.
pub fn parse_build(index: &FileIndex) -> (Vec<BuildModule>, Vec<ParseError>) {
    let mut errors = Vec::new();
    let mut build_dirs: BTreeMap<String, &IndexedFile> = BTreeMap::new();
    for f in index.files() {
        if is_build_file(f.file_name()) {
            build_dirs.entry(f.dir().to_string()).or_insert(f);
        }
    }
    let mut aggregators = BTreeSet::new();
    let mut declared: BTreeMap<String, (String, TraceEntry)> = BTreeMap::new();
    let mut artifacts: BTreeMap<String, (String, TraceEntry)> = BTreeMap::new();

    for f in index.files().iter().filter(|f| f.file_name() == "pom.xml") {
        match parse_pom(f) {
            Ok(pom) => {
                let dir = f.dir().to_string();
                if pom.packaging.as_deref() == Some("pom") || !pom.modules.is_empty() {
                    aggregators.insert(dir.clone());
                }
                for (m, t) in pom.modules {
                    let d = join_dir(&dir, &m);
                    declared.entry(d.clone()).or_insert((basename(&d).to_string(), t));
                }
                if let Some(a) = pom.artifact_id {
                    artifacts.insert(dir, a);
                }
            }
            Err(e) => errors.push(e),
        }
    }
    for f in index
        .files()
        .iter()
        .filter(|f| matches!(f.file_name(), "settings.gradle" | "settings.gradle.kts"))
    {
        let includes = gradle_includes(f);
        if !includes.is_empty() {
            aggregators.insert(parent_dir(&f.path).to_string());
        }
        for (inc, t) in includes {
            let rel = inc.trim_start_matches(':').replace(':', "/");
            let d = join_dir(f.dir(), &rel);
            declared.entry(d.clone()).or_insert((basename(&d).to_string(), t));
        }
    }

    let mut out = Vec::new();
    for (dir, file) in &build_dirs {
        if aggregators.contains(dir) {
            continue;
        }
        let (name, trace) = if let Some((n, t)) = declared.get(dir) {
            (n.clone(), t.clone())
        } else if let Some((a, t)) = artifacts.get(dir) {
            let name = if dir.is_empty() { a.clone() } else { basename(dir).to_string() };
            (name, t.clone())
        } else {
            let name = if dir.is_empty() { "app".to_string() } else { basename(dir).to_string() };
            let first = file.lines.iter().position(|l| !l.trim().is_empty()).unwrap_or(0);
            let line = file.lines.get(first).map(String::as_str).unwrap_or("");
            let start = line.len() - line.trim_start().len();
            match TraceEntry::at(&file.path, first + 1, line, start, line.trim()) {
                Some(t) => (name, t),
                None => continue,
            }
        };
        out.push(BuildModule {
            name,
            dir: dir.clone(),
            trace,
        });
    }
    (out, errors)
}

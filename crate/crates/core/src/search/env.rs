use super::{parent_dir, FileIndex, Match};
use crate::model::Span;

/// Splits `${NAME}` / `${NAME:default}` into the name and optional default.
pub fn parse_env_token(token: &str) -> Option<(&str, Option<&str>)> {
    let inner = token.trim().strip_prefix("${")?.strip_suffix('}')?;
    let (name, default) = match inner.split_once(':') {
        Some((n, d)) => (n, Some(d)),
        None => (inner, None),
    };
    let name = name.trim();
    if name.is_empty() || !name.chars().all(|c| c.is_alphanumeric() || "_.-".contains(c)) {
        return None;
    }
    Some((name, default))
}

/// A resolved `${...}` token and where its value came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnvResolution {
    pub name: String,
    pub value: String,
    /// The `.env` line that defined the value; `None` when the inline default
    /// was used.
    pub definition: Option<Match>,
}

/// One `KEY=VALUE` line of a `.env` file, with the byte range of the value.
fn env_assignment(line: &str) -> Option<(&str, &str, usize)> {
    let body_start = line.len() - line.trim_start().len();
    let mut body = &line[body_start..];
    let mut offset = body_start;
    if body.starts_with('#') {
        return None;
    }
    if let Some(rest) = body.strip_prefix("export ") {
        offset += body.len() - rest.len();
        body = rest;
    }
    let eq = body.find('=')?;
    let key = body[..eq].trim();
    let raw = &body[eq + 1..];
    let lead = raw.len() - raw.trim_start().len();
    let mut value = raw.trim();
    let mut vstart = offset + eq + 1 + lead;
    if value.len() >= 2
        && ((value.starts_with('"') && value.ends_with('"'))
            || (value.starts_with('\'') && value.ends_with('\'')))
    {
        value = &value[1..value.len() - 1];
        vstart += 1;
    }
    Some((key, value, vstart))
}

impl FileIndex {
    /// The `.env` file closest to `origin`, walking up to the index root.
    fn nearest_env_files(&self, origin: &str) -> Vec<&super::IndexedFile> {
        let mut out = Vec::new();
        let mut dir = if self.file(origin).is_some() {
            parent_dir(origin)
        } else {
            origin.trim_end_matches('/')
        };
        loop {
            let candidate = if dir.is_empty() {
                ".env".to_string()
            } else {
                format!("{dir}/.env")
            };
            if let Some(f) = self.file(&candidate) {
                out.push(f);
            }
            if dir.is_empty() {
                break;
            }
            dir = parent_dir(dir);
        }
        out
    }

    /// Value of an environment token referenced from `origin` (a file or
    /// directory path relative to the root).
    pub fn resolve_env_var(&self, token: &str, origin: &str) -> Option<String> {
        self.resolve_env_var_traced(token, origin).map(|r| r.value)
    }

    pub fn resolve_env_var_traced(&self, token: &str, origin: &str) -> Option<EnvResolution> {
        let (name, default) = parse_env_token(token)?;
        for file in self.nearest_env_files(origin) {
            for (i, line) in file.lines.iter().enumerate() {
                let Some((key, value, vstart)) = env_assignment(line) else {
                    continue;
                };
                if key != name {
                    continue;
                }
                let definition = (!value.is_empty()).then(|| Match {
                    file: file.path.clone(),
                    line: i + 1,
                    span: Span::new(vstart, vstart + value.len()),
                    line_text: line.clone(),
                });
                return Some(EnvResolution {
                    name: name.to_string(),
                    value: value.to_string(),
                    definition,
                });
            }
        }
        default.map(|d| EnvResolution {
            name: name.to_string(),
            value: d.to_string(),
            definition: None,
        })
    }
}

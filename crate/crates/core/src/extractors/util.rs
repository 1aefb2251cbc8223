use std::sync::LazyLock;

use regex::Regex;

use super::ExtractorContext;
use crate::model::normalize_name;
use crate::search::{parse_env_token, FileIndex, IndexedFile, Match};

/// Pieces of a connection URL that extractors care about.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct UrlParts {
    pub scheme: String,
    pub user: Option<String>,
    pub password: Option<String>,
    pub host: String,
    pub port: Option<u16>,
    pub path: String,
}

static HOST_PORT: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(?P<host>[A-Za-z0-9_.\-]+)(?::(?P<port>\d{1,5}))?(?P<path>/.*)?$").unwrap());

/// Parses `http://host:port/path`, `jdbc:mysql://host/db`, `lb://name` and bare
/// `host:port` strings. Placeholders make a URL unparsable.
pub(crate) fn parse_url(raw: &str) -> Option<UrlParts> {
    let raw = raw.trim().trim_matches(|c| c == '"' || c == '\'');
    if raw.is_empty() || raw.contains("${") {
        return None;
    }
    let body = raw.strip_prefix("jdbc:").unwrap_or(raw);
    if let Some((scheme, _)) = body.split_once("://") {
        // jdbc:mysql://, mongodb://, http:// ...
        let scheme = scheme.to_ascii_lowercase();
        let normalized = format!("http://{}", &body[scheme.len() + 3..]);
        // multi-host mongodb URLs: keep the first host
        let normalized = match normalized.find(',') {
            Some(i) if normalized[..i].rfind('/').is_some_and(|s| s < 7) => {
                let rest = &normalized[i..];
                let tail = rest.find('/').map(|j| &rest[j..]).unwrap_or("");
                format!("{}{}", &normalized[..i], tail)
            }
            _ => normalized,
        };
        let u = url::Url::parse(&normalized).ok()?;
        let host = u.host_str()?.trim_matches(|c| c == '[' || c == ']').to_string();
        if host.is_empty() {
            return None;
        }
        let user = (!u.username().is_empty()).then(|| u.username().to_string());
        return Some(UrlParts {
            scheme,
            user,
            password: u.password().map(String::from),
            host,
            port: u.port(),
            path: u.path().to_string(),
        });
    }
    let c = HOST_PORT.captures(body)?;
    let host = c.name("host")?.as_str().to_string();
    if !host.chars().any(|ch| ch.is_ascii_alphabetic()) && !host.contains('.') {
        return None;
    }
    Some(UrlParts {
        scheme: String::new(),
        user: None,
        password: None,
        host,
        port: c.name("port").and_then(|p| p.as_str().parse().ok()),
        path: c.name("path").map(|p| p.as_str().to_string()).unwrap_or_default(),
    })
}

pub(crate) fn is_local_host(host: &str) -> bool {
    matches!(host.to_ascii_lowercase().as_str(), "localhost" | "127.0.0.1" | "0.0.0.0" | "::1")
}

pub(crate) fn is_ip_literal(host: &str) -> bool {
    host.parse::<std::net::IpAddr>().is_ok()
}

pub(crate) fn is_truthy(v: &str) -> bool {
    matches!(v.trim().to_ascii_lowercase().as_str(), "true" | "yes" | "on" | "1")
}

pub(crate) fn canonical(name: &str) -> Option<String> {
    normalize_name(name).ok()
}

/// Resolves `${NAME:default}` through `.env`, then the owner's properties,
/// then the default. Plain text is returned unchanged.
pub(crate) fn resolve_text(ctx: &ExtractorContext<'_>, text: &str, origin: &str, owner: Option<&str>) -> Option<String> {
    let text = text.trim();
    if parse_env_token(text).is_none() {
        return (!text.is_empty()).then(|| text.to_string());
    }
    let (name, default) = parse_env_token(text)?;
    if let Some(r) = ctx.index.resolve_env_var_traced(&format!("${{{name}}}"), origin) {
        return Some(r.value);
    }
    if let Some(svc) = owner.and_then(|o| ctx.project.service(o)) {
        if let Some(v) = svc.properties.value(&name.to_ascii_lowercase()) {
            if parse_env_token(v).is_none() {
                return Some(v.to_string());
            }
        }
    }
    default.map(|d| d.trim().to_string()).filter(|d| !d.is_empty())
}

/// Plain text as is; a `${..}` token through `.env` and its default only.
pub(crate) fn resolve_env_default(index: &FileIndex, text: &str, origin: &str) -> Option<String> {
    let text = text.trim();
    if parse_env_token(text).is_some() {
        return index.resolve_env_var(text, origin).filter(|v| !v.trim().is_empty());
    }
    (!text.is_empty()).then(|| text.to_string())
}

/// Lines of an annotation or call starting at `line` (1-based), up to the
/// line where its parentheses balance; at most `max` lines.
pub(crate) fn statement_lines(file: &IndexedFile, line: usize, max: usize) -> Vec<Match> {
    let mut out = Vec::new();
    let mut depth: i32 = 0;
    let mut opened = false;
    for (i, text) in file.lines.iter().enumerate().skip(line.saturating_sub(1)).take(max) {
        out.push(Match {
            file: file.path.clone(),
            line: i + 1,
            span: crate::model::Span::new(0, text.len().max(1)),
            line_text: text.clone(),
        });
        for c in text.chars() {
            match c {
                '(' => {
                    depth += 1;
                    opened = true;
                }
                ')' => depth -= 1,
                _ => {}
            }
        }
        if !opened || depth <= 0 {
            break;
        }
    }
    out
}

/// A match at `span` of `m`'s line.
pub(crate) fn sub_match(m: &Match, start: usize, end: usize) -> Match {
    Match {
        file: m.file.clone(),
        line: m.line,
        span: crate::model::Span::new(start, end),
        line_text: m.line_text.clone(),
    }
}

static STRING_LIT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r#""((?:[^"\\]|\\.)*)""#).unwrap());

/// String literals on a line with the byte offset of their content.
pub(crate) fn string_literals(line: &str) -> Vec<(&str, usize)> {
    STRING_LIT
        .captures_iter(line)
        .filter_map(|c| c.get(1))
        .map(|m| (m.as_str(), m.start()))
        .collect()
}

/// Splits the argument list that follows byte `open` (an opening
/// parenthesis) at top-level commas. Returns trimmed arguments with their
/// start offsets; stops at the matching parenthesis or end of line.
pub(crate) fn call_args(line: &str, open: usize) -> Vec<(&str, usize)> {
    let bytes = line.as_bytes();
    if bytes.get(open) != Some(&b'(') {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut in_str = false;
    let mut start = open + 1;
    let mut i = open + 1;
    while i < bytes.len() {
        let c = bytes[i];
        if in_str {
            if c == b'\\' {
                i += 1;
            } else if c == b'"' {
                in_str = false;
            }
        } else {
            match c {
                b'"' => in_str = true,
                b'(' | b'[' | b'{' | b'<' => depth += 1,
                b')' | b']' | b'}' | b'>' if depth > 0 => depth -= 1,
                b')' => {
                    push_arg(line, start, i, &mut out);
                    return out;
                }
                b',' if depth == 0 => {
                    push_arg(line, start, i, &mut out);
                    start = i + 1;
                }
                _ => {}
            }
        }
        i += 1;
    }
    push_arg(line, start, line.len(), &mut out);
    out
}

fn push_arg<'a>(line: &'a str, start: usize, end: usize, out: &mut Vec<(&'a str, usize)>) {
    let raw = &line[start..end];
    let lead = raw.len() - raw.trim_start().len();
    let arg = raw.trim();
    if !arg.is_empty() {
        out.push((arg, start + lead));
    }
}

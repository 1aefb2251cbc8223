use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::yaml::{parse_yaml, Scalar, YamlNode, YamlValue};
use super::Traced;
use crate::error::ParseError;
use crate::model::{Span, TraceEntry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PortMapping {
    pub host: Option<u16>,
    pub container: u16,
}

/// One entry under `services:` of a compose file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServiceDecl {
    pub name: String,
    pub image: Option<Traced<String>>,
    pub build_context: Option<Traced<String>>,
    pub ports: Vec<Traced<PortMapping>>,
    pub depends_on: Vec<String>,
    pub environment: BTreeMap<String, Traced<String>>,
    pub source: TraceEntry,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ComposeFile {
    pub services: Vec<ServiceDecl>,
    pub warnings: Vec<String>,
}

fn key_trace(file: &str, key: &Scalar) -> Option<TraceEntry> {
    key.trace(file)
}

fn scalar_traced(file: &str, node: &YamlNode, fallback: &TraceEntry) -> Option<Traced<String>> {
    let s = node.as_scalar()?;
    Some(Traced {
        value: s.text.clone(),
        trace: s.trace(file).unwrap_or_else(|| fallback.clone()),
    })
}

/// `"8080:80"`, `"80"`, `"127.0.0.1:8080:80/tcp"`; ranges are not mappings
/// of single ports and are skipped.
pub fn parse_port_spec(spec: &str) -> Option<PortMapping> {
    let spec = spec.trim().trim_matches('"');
    let spec = spec.split('/').next()?;
    let parts: Vec<&str> = spec.rsplitn(3, ':').collect();
    let port = |s: &str| s.trim().parse::<u16>().ok().filter(|p| *p > 0);
    match parts.as_slice() {
        [c] => Some(PortMapping {
            host: None,
            container: port(c)?,
        }),
        [c, h, ..] => Some(PortMapping {
            host: if h.is_empty() { None } else { Some(port(h)?) },
            container: port(c)?,
        }),
        [] => None,
    }
}

fn parse_ports(file: &str, node: &YamlNode, fallback: &TraceEntry, warnings: &mut Vec<String>) -> Vec<Traced<PortMapping>> {
    let mut out = Vec::new();
    for item in node.as_seq().unwrap_or_default() {
        let trace_of = |n: &YamlNode| {
            n.as_scalar()
                .and_then(|s| s.trace(file))
                .unwrap_or_else(|| fallback.clone())
        };
        let mapping = match &item.value {
            YamlValue::Scalar(s) => parse_port_spec(&s.text).map(|m| (m, trace_of(item))),
            YamlValue::Map(_) => {
                let target = item.get("target").and_then(|n| n.as_str()).and_then(|s| s.parse().ok());
                let published = item
                    .get("published")
                    .and_then(|n| n.as_str())
                    .and_then(|s| s.parse().ok());
                target.filter(|t| *t > 0).map(|container| {
                    let t = item.get("target").map(trace_of).unwrap_or_else(|| fallback.clone());
                    (
                        PortMapping {
                            host: published.filter(|p| *p > 0),
                            container,
                        },
                        t,
                    )
                })
            }
            YamlValue::Seq(_) => None,
        };
        match mapping {
            Some((value, trace)) => out.push(Traced { value, trace }),
            None => warnings.push(format!("{file}:{}: unsupported port entry", item.line)),
        }
    }
    out
}

fn parse_service(file: &str, key: &Scalar, body: &YamlNode, warnings: &mut Vec<String>) -> Option<ServiceDecl> {
    let source = key_trace(file, key)?;
    let mut decl = ServiceDecl {
        name: key.text.clone(),
        image: None,
        build_context: None,
        ports: Vec::new(),
        depends_on: Vec::new(),
        environment: BTreeMap::new(),
        source: source.clone(),
    };
    if body.as_map().is_none() {
        return Some(decl);
    }
    decl.image = body.get("image").and_then(|n| scalar_traced(file, n, &source));
    decl.build_context = match body.get("build") {
        Some(b) if b.as_scalar().is_some() => scalar_traced(file, b, &source),
        Some(b) => b.get("context").and_then(|n| scalar_traced(file, n, &source)),
        None => None,
    };
    if let Some(p) = body.get("ports") {
        decl.ports = parse_ports(file, p, &source, warnings);
    }
    if let Some(d) = body.get("depends_on") {
        match &d.value {
            YamlValue::Seq(items) => decl
                .depends_on
                .extend(items.iter().filter_map(|i| i.as_str().map(String::from))),
            YamlValue::Map(entries) => decl.depends_on.extend(entries.iter().map(|(k, _)| k.text.clone())),
            YamlValue::Scalar(s) => decl.depends_on.push(s.text.clone()),
        }
    }
    if let Some(env) = body.get("environment") {
        match &env.value {
            YamlValue::Map(entries) => {
                for (k, v) in entries {
                    let fallback = k.trace(file).unwrap_or_else(|| source.clone());
                    let value = v.as_str().unwrap_or_default().to_string();
                    let trace = v.as_scalar().and_then(|s| s.trace(file)).unwrap_or(fallback);
                    decl.environment.insert(k.text.clone(), Traced { value, trace });
                }
            }
            YamlValue::Seq(items) => {
                for item in items {
                    let Some(s) = item.as_scalar() else { continue };
                    let (k, v) = s.text.split_once('=').unwrap_or((s.text.as_str(), ""));
                    let trace = s.trace(file).unwrap_or_else(|| source.clone());
                    decl.environment.insert(
                        k.trim().to_string(),
                        Traced {
                            value: v.trim().to_string(),
                            trace,
                        },
                    );
                }
            }
            YamlValue::Scalar(_) => {}
        }
    }
    Some(decl)
}

/// Services of a docker-compose file.
pub fn parse_compose(file: &str, content: &str) -> Result<ComposeFile, ParseError> {
    let docs = parse_yaml(file, content)?;
    let mut out = ComposeFile::default();
    let Some(services) = docs.first().and_then(|d| d.get("services")) else {
        out.warnings.push(format!("{file}: no `services:` section"));
        return Ok(out);
    };
    for (key, body) in services.as_map().unwrap_or_default() {
        if key.text.trim().is_empty() {
            continue;
        }
        if let Some(decl) = parse_service(file, key, body, &mut out.warnings) {
            out.services.push(decl);
        }
    }
    Ok(out)
}

/// Minimal compose text for the given declarations (name, image, ports,
/// dependencies, environment).
pub fn serialize_compose(services: &[ServiceDecl]) -> String {
    let mut out = String::from("version: '3'\nservices:\n");
    for s in services {
        let _ = writeln!(out, "  {}:", s.name);
        if let Some(img) = &s.image {
            let _ = writeln!(out, "    image: \"{}\"", img.value);
        }
        if let Some(ctx) = &s.build_context {
            let _ = writeln!(out, "    build: \"{}\"", ctx.value);
        }
        if !s.ports.is_empty() {
            out.push_str("    ports:\n");
            for p in &s.ports {
                match p.value.host {
                    Some(h) => {
                        let _ = writeln!(out, "      - \"{h}:{}\"", p.value.container);
                    }
                    None => {
                        let _ = writeln!(out, "      - \"{}\"", p.value.container);
                    }
                }
            }
        }
        if !s.depends_on.is_empty() {
            out.push_str("    depends_on:\n");
            for d in &s.depends_on {
                let _ = writeln!(out, "      - {d}");
            }
        }
        if !s.environment.is_empty() {
            out.push_str("    environment:\n");
            for (k, v) in &s.environment {
                let _ = writeln!(out, "      {k}: \"{}\"", v.value);
            }
        }
    }
    out
}

/// Placeholder trace used when building declarations in memory.
pub fn synthetic_trace(file: &str, text: &str) -> TraceEntry {
    TraceEntry::new(file, 1, Span::new(0, text.len().max(1)), text).expect("non-empty span")
}

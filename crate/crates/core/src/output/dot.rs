use std::io::{self, Write};
use std::path::Path;
use std::process::{Command, Stdio};

use crate::model::{Dfd, NodeType, Stereotype, Tags};

fn escape(text: &str, record: bool) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '"' | '\\' => {
                out.push('\\');
                out.push(c);
            }
            '{' | '}' | '|' | '<' | '>' if record => {
                out.push('\\');
                out.push(c);
            }
            '\n' => out.push_str("\\n"),
            _ => out.push(c),
        }
    }
    out
}

fn label<'a>(head: Option<&str>, stereotypes: impl Iterator<Item = &'a Stereotype>, tags: &Tags, record: bool) -> String {
    let mut lines: Vec<String> = head.map(|h| escape(h, record)).into_iter().collect();
    lines.extend(stereotypes.map(|s| format!("--{}--", escape(s.as_str(), record))));
    lines.extend(tags.pairs().map(|(k, v)| escape(&format!("{k} = {v}"), record)));
    lines.join("\\n")
}

/// Graphviz rendering: services as rounded boxes, databases as records with
/// a bar on the left, external entities as plain boxes.
pub fn dfd_to_dot(dfd: &Dfd) -> String {
    let mut out = String::from("digraph dfd {\n    node [fontname=\"Helvetica\", fontsize=10];\n    edge [fontname=\"Helvetica\", fontsize=9];\n");
    for n in dfd.nodes() {
        let id = escape(&n.canonical_name, false);
        let line = match n.node_type {
            NodeType::Service => format!(
                "    \"{id}\" [shape=box, style=rounded, label=\"{}\"];\n",
                label(Some(&n.canonical_name), n.stereotypes.iter(), &n.tagged_values, false)
            ),
            NodeType::Database => format!(
                "    \"{id}\" [shape=record, label=\"|{}\"];\n",
                label(Some(&n.canonical_name), n.stereotypes.iter(), &n.tagged_values, true)
            ),
            NodeType::ExternalEntity => format!(
                "    \"{id}\" [shape=box, label=\"{}\"];\n",
                label(Some(&n.canonical_name), n.stereotypes.iter(), &n.tagged_values, false)
            ),
        };
        out.push_str(&line);
    }
    for f in dfd.flows() {
        out.push_str(&format!(
            "    \"{}\" -> \"{}\" [label=\"{}\"];\n",
            escape(&f.sender, false),
            escape(&f.receiver, false),
            label(None, f.stereotypes.iter(), &f.tagged_values, false)
        ));
    }
    out.push_str("}\n");
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RenderOutcome {
    Rendered,
    /// The graphviz `dot` binary is not installed; nothing was written.
    BinaryMissing,
}

/// Renders DOT text to a PNG with the graphviz `dot` binary.
pub fn render_png(dot: &str, out: &Path) -> io::Result<RenderOutcome> {
    render_with("dot", dot, out)
}

fn render_with(binary: &str, dot: &str, out: &Path) -> io::Result<RenderOutcome> {
    let child = Command::new(binary)
        .arg("-Tpng")
        .arg("-o")
        .arg(out)
        .stdin(Stdio::piped())
        .stdout(Stdio::null())
        .stderr(Stdio::piped())
        .spawn();
    let mut child = match child {
        Ok(c) => c,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(RenderOutcome::BinaryMissing),
        Err(e) => return Err(e),
    };
    child.stdin.take().expect("piped stdin").write_all(dot.as_bytes())?;
    let result = child.wait_with_output()?;
    if !result.status.success() {
        return Err(io::Error::other(format!(
            "{binary} exited with {}: {}",
            result.status,
            String::from_utf8_lossy(&result.stderr).trim()
        )));
    }
    Ok(RenderOutcome::Rendered)
}

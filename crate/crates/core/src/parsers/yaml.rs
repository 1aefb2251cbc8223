//! YAML documents as a position-carrying tree, built on the `yaml-rust2`
//! event stream. Anchors, aliases and `<<` merge keys are resolved here.

use std::collections::HashMap;
use std::sync::LazyLock;

use regex::Regex;
use yaml_rust2::parser::{Event, MarkedEventReceiver, Parser};
use yaml_rust2::scanner::{Marker, TScalarStyle};

use crate::error::ParseError;
use crate::model::{Span, TraceEntry};

/// Where a scalar's text sits in the source: 1-based line and byte span.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Loc {
    pub line: usize,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scalar {
    pub text: String,
    pub plain: bool,
    pub line: usize,
    pub loc: Option<Loc>,
    evidence: Option<String>,
}

impl Scalar {
    pub fn is_null(&self) -> bool {
        self.plain && matches!(self.text.as_str(), "" | "~" | "null" | "Null" | "NULL")
    }

    /// Trace pointing at the scalar's source text.
    pub fn trace(&self, file: &str) -> Option<TraceEntry> {
        let loc = self.loc?;
        TraceEntry::new(file, loc.line, loc.span, self.evidence.clone()?).ok()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum YamlValue {
    Scalar(Scalar),
    Seq(Vec<YamlNode>),
    Map(Vec<(Scalar, YamlNode)>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct YamlNode {
    pub value: YamlValue,
    /// 1-based line where the node starts.
    pub line: usize,
}

impl YamlNode {
    pub fn as_scalar(&self) -> Option<&Scalar> {
        match &self.value {
            YamlValue::Scalar(s) if !s.is_null() => Some(s),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        self.as_scalar().map(|s| s.text.as_str())
    }

    pub fn as_map(&self) -> Option<&[(Scalar, YamlNode)]> {
        match &self.value {
            YamlValue::Map(m) => Some(m),
            _ => None,
        }
    }

    pub fn as_seq(&self) -> Option<&[YamlNode]> {
        match &self.value {
            YamlValue::Seq(s) => Some(s),
            _ => None,
        }
    }

    /// Mapping lookup by exact key.
    pub fn get(&self, key: &str) -> Option<&YamlNode> {
        self.as_map()?
            .iter()
            .find(|(k, _)| k.text == key)
            .map(|(_, v)| v)
    }

    pub fn entry(&self, key: &str) -> Option<(&Scalar, &YamlNode)> {
        self.as_map()?
            .iter()
            .find(|(k, _)| k.text == key)
            .map(|(k, v)| (k, v))
    }
}

/// `key:value` written without the space, which plain YAML reads as one
/// scalar. Accepted as a mapping entry when it sits on its own line.
static JAMMED_PAIR: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^([A-Za-z_][\w-]*(?:\.[\w-]+)*):(\S.*)$").unwrap());

fn char_to_byte(line: &str, col: usize) -> usize {
    line.char_indices().nth(col).map(|(i, _)| i).unwrap_or(line.len())
}

enum Frame {
    Seq {
        items: Vec<YamlNode>,
        anchor: usize,
        line: usize,
    },
    Map {
        entries: Vec<(Scalar, YamlNode)>,
        key: Option<Scalar>,
        anchor: usize,
        line: usize,
    },
}

struct Builder<'a> {
    lines: Vec<&'a str>,
    stack: Vec<Frame>,
    anchors: HashMap<usize, YamlNode>,
    docs: Vec<YamlNode>,
    doc_has_root: bool,
}

impl<'a> Builder<'a> {
    fn scalar(&self, text: String, style: TScalarStyle, mark: Marker) -> Scalar {
        let line_no = mark.line();
        let plain = style == TScalarStyle::Plain;
        let mut scalar = Scalar {
            text,
            plain,
            line: line_no,
            loc: None,
            evidence: None,
        };
        let Some(line) = line_no.checked_sub(1).and_then(|i| self.lines.get(i)) else {
            return scalar;
        };
        let mut start = char_to_byte(line, mark.col());
        match style {
            TScalarStyle::SingleQuoted | TScalarStyle::DoubleQuoted => start += 1,
            TScalarStyle::Literal | TScalarStyle::Folded => {
                // point at the first content line instead of the indicator
                if let Some(next) = self.lines.get(line_no) {
                    let body = next.trim();
                    if !body.is_empty() {
                        let s = next.len() - next.trim_start().len();
                        scalar.loc = Some(Loc {
                            line: line_no + 1,
                            span: Span::new(s, s + body.len()),
                        });
                        scalar.evidence = Some(body.to_string());
                    }
                }
                return scalar;
            }
            TScalarStyle::Plain => {}
        }
        let rest = line.get(start..).unwrap_or("");
        let evidence = if !scalar.text.is_empty() && rest.starts_with(&scalar.text) {
            scalar.text.clone()
        } else {
            let end = match style {
                TScalarStyle::SingleQuoted => rest.find('\'').unwrap_or(rest.len()),
                TScalarStyle::DoubleQuoted => rest.find('"').unwrap_or(rest.len()),
                _ => rest.len(),
            };
            rest[..end].trim_end().to_string()
        };
        if !evidence.is_empty() {
            scalar.loc = Some(Loc {
                line: line_no,
                span: Span::new(start, start + evidence.len()),
            });
            scalar.evidence = Some(evidence);
        }
        scalar
    }

    fn push(&mut self, node: YamlNode) {
        match self.stack.last_mut() {
            None => {
                self.docs.push(node);
                self.doc_has_root = true;
            }
            Some(Frame::Seq { items, .. }) => items.push(node),
            Some(Frame::Map { entries, key, .. }) => match key.take() {
                None => {
                    let k = match node.value {
                        YamlValue::Scalar(s) => s,
                        _ => Scalar {
                            text: String::new(),
                            plain: true,
                            line: node.line,
                            loc: None,
                            evidence: None,
                        },
                    };
                    *key = Some(k);
                }
                Some(k) => {
                    let node = split_jammed(&k, node);
                    entries.push((k, node));
                }
            },
        }
    }

    fn remember(&mut self, anchor: usize, node: &YamlNode) {
        if anchor > 0 {
            self.anchors.insert(anchor, node.clone());
        }
    }
}

fn split_jammed(key: &Scalar, node: YamlNode) -> YamlNode {
    let YamlValue::Scalar(s) = &node.value else {
        return node;
    };
    if !s.plain || s.line <= key.line {
        return node;
    }
    let Some(c) = JAMMED_PAIR.captures(&s.text) else {
        return node;
    };
    let (k, v) = (c.get(1).unwrap().as_str(), c.get(2).unwrap().as_str());
    if v.starts_with("//") {
        return node;
    }
    let sub = |text: &str, offset: usize| Scalar {
        text: text.to_string(),
        plain: true,
        line: s.line,
        loc: s.loc.map(|l| Loc {
            line: l.line,
            span: Span::new(l.span.start + offset, l.span.start + offset + text.len()),
        }),
        evidence: s.evidence.as_ref().map(|_| text.to_string()),
    };
    let value = YamlNode {
        value: YamlValue::Scalar(sub(v, k.len() + 1)),
        line: s.line,
    };
    YamlNode {
        value: YamlValue::Map(vec![(sub(k, 0), value)]),
        line: s.line,
    }
}

/// Applies `<<` merge keys; explicit entries win over merged ones.
fn resolve_merges(entries: Vec<(Scalar, YamlNode)>) -> Vec<(Scalar, YamlNode)> {
    if !entries.iter().any(|(k, _)| k.plain && k.text == "<<") {
        return entries;
    }
    let mut out: Vec<(Scalar, YamlNode)> = Vec::new();
    let mut merged: Vec<(Scalar, YamlNode)> = Vec::new();
    for (k, v) in entries {
        if k.plain && k.text == "<<" {
            let sources: Vec<&YamlNode> = match &v.value {
                YamlValue::Seq(items) => items.iter().collect(),
                _ => vec![&v],
            };
            for src in sources {
                if let Some(m) = src.as_map() {
                    merged.extend(m.iter().cloned());
                }
            }
        } else {
            out.push((k, v));
        }
    }
    for (k, v) in merged {
        if !out.iter().any(|(e, _)| e.text == k.text) {
            out.push((k, v));
        }
    }
    out
}

impl MarkedEventReceiver for Builder<'_> {
    fn on_event(&mut self, ev: Event, mark: Marker) {
        match ev {
            Event::DocumentStart => self.doc_has_root = false,
            Event::DocumentEnd => {
                if !self.doc_has_root {
                    self.docs.push(YamlNode {
                        value: YamlValue::Map(Vec::new()),
                        line: mark.line(),
                    });
                }
                self.doc_has_root = false;
            }
            Event::Scalar(text, style, anchor, _) => {
                let s = self.scalar(text, style, mark);
                let node = YamlNode {
                    line: s.line,
                    value: YamlValue::Scalar(s),
                };
                self.remember(anchor, &node);
                self.push(node);
            }
            Event::Alias(id) => {
                let node = self.anchors.get(&id).cloned().unwrap_or(YamlNode {
                    value: YamlValue::Scalar(Scalar {
                        text: String::new(),
                        plain: true,
                        line: mark.line(),
                        loc: None,
                        evidence: None,
                    }),
                    line: mark.line(),
                });
                self.push(node);
            }
            Event::SequenceStart(anchor, _) => self.stack.push(Frame::Seq {
                items: Vec::new(),
                anchor,
                line: mark.line(),
            }),
            Event::MappingStart(anchor, _) => self.stack.push(Frame::Map {
                entries: Vec::new(),
                key: None,
                anchor,
                line: mark.line(),
            }),
            Event::SequenceEnd | Event::MappingEnd => {
                let node = match self.stack.pop() {
                    Some(Frame::Seq { items, anchor, line }) => {
                        (YamlNode { value: YamlValue::Seq(items), line }, anchor)
                    }
                    Some(Frame::Map {
                        entries,
                        anchor,
                        line,
                        ..
                    }) => (
                        YamlNode {
                            value: YamlValue::Map(resolve_merges(entries)),
                            line,
                        },
                        anchor,
                    ),
                    None => return,
                };
                self.remember(node.1, &node.0);
                self.push(node.0);
            }
            Event::StreamStart | Event::StreamEnd | Event::Nothing => {}
        }
    }
}

/// Parses every document of a YAML stream.
pub fn parse_yaml(file: &str, content: &str) -> Result<Vec<YamlNode>, ParseError> {
    let mut builder = Builder {
        lines: content.split('\n').map(|l| l.strip_suffix('\r').unwrap_or(l)).collect(),
        stack: Vec::new(),
        anchors: HashMap::new(),
        docs: Vec::new(),
        doc_has_root: false,
    };
    let mut parser = Parser::new_from_str(content);
    parser
        .load(&mut builder, true)
        .map_err(|e| ParseError::new(file, e.marker().line().max(1), e.info()))?;
    Ok(builder.docs)
}

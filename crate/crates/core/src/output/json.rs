use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::DocumentError;
use crate::model::{Dfd, Flow, Node, NodeType, Span, Stereotype, Tags, TraceEntry, TraceRecord, TraceStore};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub name: String,
    #[serde(rename = "type")]
    pub node_type: NodeType,
    pub stereotypes: Vec<String>,
    pub tagged_values: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowRecord {
    pub sender: String,
    pub receiver: String,
    pub stereotypes: Vec<String>,
    pub tagged_values: BTreeMap<String, Value>,
}

/// The serialized form of a diagram. Also the ground-truth format of the
/// evaluation harness.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DfdDocument {
    pub nodes: Vec<NodeRecord>,
    pub flows: Vec<FlowRecord>,
}

fn is_integer_literal(s: &str) -> bool {
    let digits = s.strip_prefix('-').unwrap_or(s);
    !digits.is_empty()
        && digits.bytes().all(|b| b.is_ascii_digit())
        && (digits == "0" || !digits.starts_with('0'))
        && s.parse::<i64>().is_ok()
}

fn scalar(s: &str) -> Value {
    if is_integer_literal(s) {
        Value::from(s.parse::<i64>().expect("checked literal"))
    } else {
        Value::from(s)
    }
}

fn tag_values(tags: &Tags) -> BTreeMap<String, Value> {
    tags.iter()
        .map(|(k, vs)| {
            let v = match vs.len() {
                1 => scalar(vs.iter().next().expect("one value")),
                _ => Value::Array(vs.iter().map(|s| scalar(s)).collect()),
            };
            (k.to_string(), v)
        })
        .collect()
}

/// Text forms of a tagged value; arrays give one text per element.
pub(crate) fn tag_texts(v: &Value) -> Vec<String> {
    match v {
        Value::Null => Vec::new(),
        Value::String(s) => vec![s.clone()],
        Value::Array(items) => items.iter().flat_map(tag_texts).collect(),
        other => vec![other.to_string()],
    }
}

impl DfdDocument {
    pub fn from_dfd(dfd: &Dfd) -> Self {
        let nodes = dfd
            .nodes()
            .map(|n| NodeRecord {
                name: n.canonical_name.clone(),
                node_type: n.node_type,
                stereotypes: n.stereotypes.iter().map(|s| s.as_str().to_string()).collect::<BTreeSet<_>>().into_iter().collect(),
                tagged_values: tag_values(&n.tagged_values),
            })
            .collect();
        let flows = dfd
            .flows()
            .map(|f| FlowRecord {
                sender: f.sender.clone(),
                receiver: f.receiver.clone(),
                stereotypes: f.stereotypes.iter().map(|s| s.as_str().to_string()).collect::<BTreeSet<_>>().into_iter().collect(),
                tagged_values: tag_values(&f.tagged_values),
            })
            .collect();
        Self { nodes, flows }
    }

    /// Rebuilds the diagram; stereotypes must come from the catalog.
    pub fn to_dfd(&self) -> Result<Dfd, DocumentError> {
        let mut nodes = Vec::new();
        let mut seen = BTreeSet::new();
        for r in &self.nodes {
            let mut n = Node::new(&r.name, r.node_type)?;
            if !seen.insert(n.canonical_name.clone()) {
                return Err(DocumentError::Invalid(format!("duplicate node `{}`", n.canonical_name)));
            }
            for s in &r.stereotypes {
                n.stereotypes.insert(s.parse::<Stereotype>()?);
            }
            for (k, v) in &r.tagged_values {
                for t in tag_texts(v) {
                    n.tagged_values.insert(k.clone(), t);
                }
            }
            nodes.push(n);
        }
        let mut flows = Vec::new();
        let mut seen = BTreeSet::new();
        for r in &self.flows {
            let mut f = Flow::new(&r.sender, &r.receiver)?;
            if !seen.insert(f.key()) {
                return Err(DocumentError::Invalid(format!("duplicate flow `{}`", f.key())));
            }
            for s in &r.stereotypes {
                let s = s.parse::<Stereotype>()?;
                if !s.applicability().flow {
                    return Err(DocumentError::Invalid(format!("`{s}` is not a flow stereotype")));
                }
                f.stereotypes.insert(s);
            }
            for (k, v) in &r.tagged_values {
                for t in tag_texts(v) {
                    f.tagged_values.insert(k.clone(), t);
                }
            }
            flows.push(f);
        }
        Ok(Dfd::from_parts(nodes, flows)?)
    }
}

fn pretty<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = Vec::new();
    let fmt = serde_json::ser::PrettyFormatter::with_indent(b"    ");
    let mut ser = serde_json::Serializer::with_formatter(&mut out, fmt);
    value.serialize(&mut ser).expect("in-memory serialization cannot fail");
    out.push(b'\n');
    out
}

pub fn dfd_to_json(dfd: &Dfd) -> Vec<u8> {
    pretty(&DfdDocument::from_dfd(dfd))
}

fn records(v: Option<&Value>) -> Vec<(Option<&str>, &Map<String, Value>)> {
    match v {
        Some(Value::Array(items)) => items.iter().filter_map(|i| i.as_object().map(|o| (None, o))).collect(),
        Some(Value::Object(m)) => m
            .iter()
            .filter_map(|(k, i)| i.as_object().map(|o| (Some(k.as_str()), o)))
            .collect(),
        _ => Vec::new(),
    }
}

fn string_list(o: &Map<String, Value>) -> Vec<String> {
    let v = o.get("stereotypes").or_else(|| o.get("stereotype_instances"));
    match v {
        Some(Value::Array(items)) => items.iter().filter_map(|i| i.as_str()).map(|s| s.trim().to_string()).collect(),
        Some(Value::String(s)) => vec![s.trim().to_string()],
        _ => Vec::new(),
    }
}

fn tag_map(o: &Map<String, Value>) -> BTreeMap<String, Value> {
    match o.get("tagged_values") {
        Some(Value::Object(m)) => m.iter().map(|(k, v)| (k.clone(), v.clone())).collect(),
        // [[key, value], ...]
        Some(Value::Array(pairs)) => {
            let mut out: BTreeMap<String, Vec<Value>> = BTreeMap::new();
            for p in pairs {
                if let Some([k, v]) = p.as_array().map(Vec::as_slice) {
                    if let Some(k) = k.as_str() {
                        out.entry(k.to_string()).or_default().push(v.clone());
                    }
                }
            }
            out.into_iter()
                .map(|(k, mut vs)| (k, if vs.len() == 1 { vs.remove(0) } else { Value::Array(vs) }))
                .collect()
        }
        _ => BTreeMap::new(),
    }
}

fn node_type_of(o: &Map<String, Value>, stereotypes: &[String], external: bool) -> Result<NodeType, DocumentError> {
    if external {
        return Ok(NodeType::ExternalEntity);
    }
    match o.get("type").and_then(Value::as_str) {
        Some("service") => Ok(NodeType::Service),
        Some("database") => Ok(NodeType::Database),
        Some("external_entity") | Some("external") => Ok(NodeType::ExternalEntity),
        Some(other) => Err(DocumentError::Invalid(format!("unknown node type `{other}`"))),
        None if stereotypes.iter().any(|s| s == "database") => Ok(NodeType::Database),
        None => Ok(NodeType::Service),
    }
}

/// Reads a diagram document. Besides the shape written by [`dfd_to_json`]
/// this accepts the dataset variant: flows under `information_flows`,
/// external entities in their own `external_entities` list, lists given as
/// objects keyed by id, stereotypes under `stereotype_instances`, tagged
/// values as `[key, value]` pairs, and a missing `type`.
pub fn document_from_json(bytes: &[u8]) -> Result<DfdDocument, DocumentError> {
    let root: Value = serde_json::from_slice(bytes)?;
    let root = root
        .as_object()
        .ok_or_else(|| DocumentError::Invalid("top level must be an object".into()))?;
    let mut doc = DfdDocument::default();
    let groups = [(root.get("nodes"), false), (root.get("external_entities"), true)];
    for (group, external) in groups {
        for (key, o) in records(group) {
            let name = o
                .get("name")
                .and_then(Value::as_str)
                .or(key)
                .ok_or_else(|| DocumentError::Invalid("node without a name".into()))?;
            let stereotypes = string_list(o);
            doc.nodes.push(NodeRecord {
                name: name.to_string(),
                node_type: node_type_of(o, &stereotypes, external)?,
                stereotypes,
                tagged_values: tag_map(o),
            });
        }
    }
    for (_, o) in records(root.get("flows").or_else(|| root.get("information_flows"))) {
        let end = |k: &str| {
            o.get(k)
                .and_then(Value::as_str)
                .map(String::from)
                .ok_or_else(|| DocumentError::Invalid(format!("flow without a {k}")))
        };
        doc.flows.push(FlowRecord {
            sender: end("sender")?,
            receiver: end("receiver")?,
            stereotypes: string_list(o),
            tagged_values: tag_map(o),
        });
    }
    Ok(doc)
}

pub fn dfd_from_json(bytes: &[u8]) -> Result<Dfd, DocumentError> {
    document_from_json(bytes)?.to_dfd()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct TraceLeaf {
    file: String,
    line: usize,
    span: String,
    evidence: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct TraceItem {
    file: String,
    line: usize,
    span: String,
    evidence: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    sub_items: BTreeMap<String, TraceLeaf>,
}

fn leaf(e: &TraceEntry) -> TraceLeaf {
    TraceLeaf {
        file: e.file.clone(),
        line: e.line,
        span: e.span.to_string(),
        evidence: e.evidence.clone(),
    }
}

fn entry(file: &str, line: usize, span: &str, evidence: &str) -> Result<TraceEntry, DocumentError> {
    let span = Span::parse(span).ok_or_else(|| DocumentError::Invalid(format!("bad span `{span}`")))?;
    Ok(TraceEntry::new(file, line, span, evidence)?)
}

/// One object per item id with the primary evidence and, per sub-item, its
/// primary evidence.
pub fn trace_to_json(store: &TraceStore) -> Vec<u8> {
    let items: BTreeMap<&str, TraceItem> = store
        .iter()
        .filter_map(|(id, r)| {
            let p = leaf(r.primary()?);
            let sub_items = r
                .sub_items
                .iter()
                .filter_map(|(k, s)| s.iter().next().map(|e| (k.clone(), leaf(e))))
                .collect();
            Some((
                id,
                TraceItem {
                    file: p.file,
                    line: p.line,
                    span: p.span,
                    evidence: p.evidence,
                    sub_items,
                },
            ))
        })
        .collect();
    pretty(&items)
}

/// Reads a traceability document back; only primary entries survive a round
/// trip.
pub fn trace_from_json(bytes: &[u8]) -> Result<TraceStore, DocumentError> {
    let items: BTreeMap<String, TraceItem> = serde_json::from_slice(bytes)?;
    let mut store = TraceStore::default();
    for (id, item) in items {
        let mut record = TraceRecord::default();
        record.entries.insert(entry(&item.file, item.line, &item.span, &item.evidence)?);
        for (k, l) in item.sub_items {
            record
                .sub_items
                .entry(k)
                .or_default()
                .insert(entry(&l.file, l.line, &l.span, &l.evidence)?);
        }
        store.insert_record(id, record);
    }
    Ok(store)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(line: usize) -> TraceEntry {
        TraceEntry::new("a.yml", line, Span::new(0, 4), "abcd").unwrap()
    }

    #[test]
    fn empty_document() {
        let text = String::from_utf8(dfd_to_json(&Dfd::new())).unwrap();
        assert_eq!(text, "{\n    \"nodes\": [],\n    \"flows\": []\n}\n");
    }

    #[test]
    fn integer_tags_are_numbers() {
        assert!(is_integer_literal("8000"));
        assert!(is_integer_literal("-1"));
        assert!(!is_integer_literal("0800"));
        assert!(!is_integer_literal("8000.0"));
        assert!(!is_integer_literal(""));
        let mut d = Dfd::new();
        d.upsert_node(Node::service("n").unwrap().with_tag("Port", "8000").with_tag("Endpoints", "/a").with_tag("Endpoints", "/b"), t(1))
            .unwrap();
        let v: Value = serde_json::from_slice(&dfd_to_json(&d)).unwrap();
        assert_eq!(v["nodes"][0]["tagged_values"]["Port"], Value::from(8000));
        assert_eq!(v["nodes"][0]["tagged_values"]["Endpoints"], serde_json::json!(["/a", "/b"]));
    }

    #[test]
    fn dataset_shape_is_adapted() {
        let text = br#"{
            "nodes": {"n1": {"name": "account-service", "stereotype_instances": ["internal"], "tagged_values": [["Port", 6000]]},
                      "n2": {"name": "account-db", "stereotype_instances": ["database"]}},
            "external_entities": {"e1": {"name": "user", "stereotype_instances": ["user", "entrypoint"]}},
            "information_flows": {"f1": {"sender": "user", "receiver": "account-service", "stereotype_instances": ["restful_http"]}}
        }"#;
        let doc = document_from_json(text).unwrap();
        assert_eq!(doc.nodes.len(), 3);
        assert_eq!(doc.nodes.iter().find(|n| n.name == "user").unwrap().node_type, NodeType::ExternalEntity);
        assert_eq!(doc.nodes.iter().find(|n| n.name == "account-db").unwrap().node_type, NodeType::Database);
        let d = doc.to_dfd().unwrap();
        assert!(d.node("account_service").unwrap().tagged_values.contains("Port", "6000"));
        assert!(d.flow("user", "account_service").is_some());
    }

    #[test]
    fn malformed_documents() {
        assert!(document_from_json(b"[]").is_err());
        assert!(document_from_json(b"{\"flows\": [{\"sender\": \"a\"}]}").is_err());
        let dup = br#"{"nodes": [{"name": "a", "type": "service", "stereotypes": [], "tagged_values": {}},
                                 {"name": "A", "type": "service", "stereotypes": [], "tagged_values": {}}], "flows": []}"#;
        assert!(dfd_from_json(dup).is_err());
        let dangling = br#"{"nodes": [], "flows": [{"sender": "a", "receiver": "b", "stereotypes": [], "tagged_values": {}}]}"#;
        assert!(dfd_from_json(dangling).is_err());
    }

    #[test]
    fn trace_without_sub_items_omits_them() {
        let mut s = TraceStore::default();
        s.record("n", t(3));
        let text = String::from_utf8(trace_to_json(&s)).unwrap();
        assert!(!text.contains("sub_items"));
        assert!(text.contains("\"span\": \"(0:4)\""));
        assert_eq!(trace_from_json(text.as_bytes()).unwrap(), s);
    }
}

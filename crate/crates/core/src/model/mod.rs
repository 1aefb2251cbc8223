//! Dataflow diagram model: nodes, flows, annotations and their traceability.
//!
//! A [`Dfd`] is a single-writer builder. Every mutation carries a
//! [`TraceEntry`] so each item, stereotype and tagged value can be traced back
//! to the code that proves it. Nodes are keyed by their canonical name (see
//! [`normalize_name`]), flows by the ordered `(sender, receiver)` pair, and all
//! collections iterate in lexicographic order.

mod stereotype;
mod trace;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

pub use stereotype::{Applicability, Stereotype};
pub use trace::{Span, TraceEntry, TraceRecord, TraceStore};

use crate::error::ModelError;

/// Canonical form of a node name: lowercase, separators folded to `_`.
pub fn normalize_name(raw: &str) -> Result<String, ModelError> {
    let trimmed = raw
        .trim()
        .trim_matches(|c| c == '"' || c == '\'')
        .trim();
    let mut out = String::with_capacity(trimmed.len());
    for c in trimmed.chars() {
        let c = match c {
            '-' | '.' | ' ' | '/' => '_',
            c => c,
        };
        if c == '_' && out.ends_with('_') {
            continue;
        }
        out.extend(c.to_lowercase());
    }
    let out = out.trim_matches('_').to_string();
    if out.is_empty() {
        return Err(ModelError::InvalidName(raw.to_string()));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeType {
    Service,
    Database,
    ExternalEntity,
}

impl NodeType {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeType::Service => "service",
            NodeType::Database => "database",
            NodeType::ExternalEntity => "external_entity",
        }
    }
}

/// Multi-valued tagged values. Two different values for one key are two facts
/// and both are kept.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct Tags(BTreeMap<String, BTreeSet<String>>);

impl Tags {
    pub fn insert(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.0
            .entry(key.into())
            .or_default()
            .insert(value.into().trim().to_string());
    }

    pub fn merge(&mut self, other: &Tags) {
        for (k, vs) in &other.0 {
            self.0.entry(k.clone()).or_default().extend(vs.iter().cloned());
        }
    }

    pub fn get(&self, key: &str) -> Option<&BTreeSet<String>> {
        self.0.get(key)
    }

    /// The value of a single-valued tag.
    pub fn single(&self, key: &str) -> Option<&str> {
        match self.0.get(key) {
            Some(vs) if vs.len() == 1 => vs.iter().next().map(String::as_str),
            _ => None,
        }
    }

    pub fn contains(&self, key: &str, value: &str) -> bool {
        self.0.get(key).is_some_and(|vs| vs.contains(value.trim()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &BTreeSet<String>)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0
            .iter()
            .flat_map(|(k, vs)| vs.iter().map(move |v| (k.as_str(), v.as_str())))
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Node {
    pub display_name: String,
    pub canonical_name: String,
    pub node_type: NodeType,
    pub stereotypes: BTreeSet<Stereotype>,
    pub tagged_values: Tags,
    auto_created: bool,
}

impl Node {
    pub fn new(display_name: &str, node_type: NodeType) -> Result<Self, ModelError> {
        let canonical_name = normalize_name(display_name)?;
        let mut stereotypes = BTreeSet::new();
        if node_type == NodeType::Database {
            stereotypes.insert(Stereotype::Database);
        }
        Ok(Self {
            display_name: display_name
                .trim()
                .trim_matches(|c| c == '"' || c == '\'')
                .to_string(),
            canonical_name,
            node_type,
            stereotypes,
            tagged_values: Tags::default(),
            auto_created: false,
        })
    }

    pub fn service(name: &str) -> Result<Self, ModelError> {
        Self::new(name, NodeType::Service)
    }

    pub fn external(name: &str) -> Result<Self, ModelError> {
        Self::new(name, NodeType::ExternalEntity)
    }

    pub fn with_stereotype(mut self, s: Stereotype) -> Self {
        self.stereotypes.insert(s);
        self
    }

    pub fn with_stereotypes(mut self, s: impl IntoIterator<Item = Stereotype>) -> Self {
        self.stereotypes.extend(s);
        self
    }

    pub fn with_tag(mut self, key: &str, value: &str) -> Self {
        self.tagged_values.insert(key, value);
        self
    }

    pub fn has(&self, s: Stereotype) -> bool {
        self.stereotypes.contains(&s)
    }

    /// Created only because a flow referenced it.
    pub fn is_auto_created(&self) -> bool {
        self.auto_created
    }

    fn check_stereotypes(&self) -> Result<(), ModelError> {
        for s in &self.stereotypes {
            check_node_applicability(*s, self.node_type, &self.canonical_name)?;
        }
        Ok(())
    }
}

fn check_node_applicability(s: Stereotype, node_type: NodeType, name: &str) -> Result<(), ModelError> {
    let a = s.applicability();
    let ok = match node_type {
        NodeType::ExternalEntity => a.external,
        NodeType::Service | NodeType::Database => a.node,
    };
    if ok {
        Ok(())
    } else {
        Err(ModelError::Applicability {
            stereotype: s.to_string(),
            target: format!("{} `{}`", node_type.as_str(), name),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FlowKey {
    pub sender: String,
    pub receiver: String,
}

impl FlowKey {
    pub fn item_id(&self) -> String {
        flow_item_id(&self.sender, &self.receiver)
    }
}

impl fmt::Display for FlowKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> {}", self.sender, self.receiver)
    }
}

/// Trace-store identifier of the flow `sender -> receiver`.
pub fn flow_item_id(sender: &str, receiver: &str) -> String {
    format!("{sender}->{receiver}")
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Flow {
    pub sender: String,
    pub receiver: String,
    pub stereotypes: BTreeSet<Stereotype>,
    pub tagged_values: Tags,
}

impl Flow {
    pub fn new(sender: &str, receiver: &str) -> Result<Self, ModelError> {
        Ok(Self {
            sender: normalize_name(sender)?,
            receiver: normalize_name(receiver)?,
            stereotypes: BTreeSet::new(),
            tagged_values: Tags::default(),
        })
    }

    pub fn with_stereotype(mut self, s: Stereotype) -> Self {
        self.stereotypes.insert(s);
        self
    }

    pub fn with_stereotypes(mut self, s: impl IntoIterator<Item = Stereotype>) -> Self {
        self.stereotypes.extend(s);
        self
    }

    pub fn with_tag(mut self, key: &str, value: &str) -> Self {
        self.tagged_values.insert(key, value);
        self
    }

    pub fn key(&self) -> FlowKey {
        FlowKey {
            sender: self.sender.clone(),
            receiver: self.receiver.clone(),
        }
    }

    pub fn has(&self, s: Stereotype) -> bool {
        self.stereotypes.contains(&s)
    }
}

/// The item an annotation is attached to.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Target {
    Node(String),
    Flow(String, String),
}

impl Target {
    pub fn node(name: &str) -> Result<Self, ModelError> {
        Ok(Target::Node(normalize_name(name)?))
    }

    pub fn flow(sender: &str, receiver: &str) -> Result<Self, ModelError> {
        Ok(Target::Flow(normalize_name(sender)?, normalize_name(receiver)?))
    }

    pub fn item_id(&self) -> String {
        match self {
            Target::Node(n) => n.clone(),
            Target::Flow(s, r) => flow_item_id(s, r),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Annotation {
    Stereotype(Stereotype),
    Tag(String, String),
}

impl Annotation {
    pub fn tag(key: &str, value: &str) -> Self {
        Annotation::Tag(key.to_string(), value.trim().to_string())
    }

    fn sub_item_key(&self) -> &str {
        match self {
            Annotation::Stereotype(s) => s.as_str(),
            Annotation::Tag(k, _) => k,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Dfd {
    nodes: BTreeMap<String, Node>,
    flows: BTreeMap<FlowKey, Flow>,
    trace: TraceStore,
    allow_self_flows: bool,
}

impl Dfd {
    pub fn new() -> Self {
        Self::default()
    }

    /// Accept flows from a node to itself instead of rejecting them.
    pub fn set_allow_self_flows(&mut self, allow: bool) {
        self.allow_self_flows = allow;
    }

    pub fn nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values()
    }

    pub fn flows(&self) -> impl Iterator<Item = &Flow> {
        self.flows.values()
    }

    pub fn node(&self, name: &str) -> Option<&Node> {
        match self.nodes.get(name) {
            Some(n) => Some(n),
            None => normalize_name(name).ok().and_then(|c| self.nodes.get(&c)),
        }
    }

    pub fn flow(&self, sender: &str, receiver: &str) -> Option<&Flow> {
        let key = FlowKey {
            sender: normalize_name(sender).ok()?,
            receiver: normalize_name(receiver).ok()?,
        };
        self.flows.get(&key)
    }

    pub fn outgoing<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Flow> + 'a {
        self.flows.values().filter(move |f| f.sender == name)
    }

    pub fn incoming<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Flow> + 'a {
        self.flows.values().filter(move |f| f.receiver == name)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn flow_count(&self) -> usize {
        self.flows.len()
    }

    pub fn trace(&self) -> &TraceStore {
        &self.trace
    }

    pub fn annotation_count(&self) -> usize {
        let n: usize = self
            .nodes
            .values()
            .map(|n| n.stereotypes.len() + n.tagged_values.pairs().count())
            .sum();
        let f: usize = self
            .flows
            .values()
            .map(|f| f.stereotypes.len() + f.tagged_values.pairs().count())
            .sum();
        n + f
    }

    /// Insert a node or merge it into the existing node with the same
    /// canonical name.
    pub fn upsert_node(&mut self, node: Node, trace: TraceEntry) -> Result<(), ModelError> {
        node.check_stereotypes()?;
        let id = node.canonical_name.clone();
        match self.nodes.get_mut(&id) {
            None => {
                self.nodes.insert(id.clone(), node.clone());
            }
            Some(existing) => {
                let merged_type = merge_type(existing, &node)?;
                if existing.auto_created && !node.auto_created {
                    // placeholder evidence is superseded by the declaration
                    self.trace.clear_entries(&id);
                }
                if merged_type != existing.node_type {
                    existing.node_type = merged_type;
                    if merged_type == NodeType::Database {
                        existing.stereotypes.insert(Stereotype::Database);
                    }
                    existing.check_stereotypes()?;
                }
                existing.auto_created = existing.auto_created && node.auto_created;
                if node.display_name < existing.display_name {
                    existing.display_name = node.display_name.clone();
                }
                existing.stereotypes.extend(node.stereotypes.iter().copied());
                existing.tagged_values.merge(&node.tagged_values);
            }
        }
        self.record_item(&id, &node.stereotypes, &node.tagged_values, trace);
        Ok(())
    }

    /// Insert a flow, creating missing endpoints as plain services, or merge it
    /// into the existing flow between the same ordered pair.
    pub fn upsert_flow(&mut self, flow: Flow, trace: TraceEntry) -> Result<(), ModelError> {
        if flow.sender == flow.receiver && !self.allow_self_flows {
            return Err(ModelError::SelfFlow(flow.sender));
        }
        for s in &flow.stereotypes {
            if !s.applicability().flow {
                return Err(ModelError::Applicability {
                    stereotype: s.to_string(),
                    target: format!("flow {} -> {}", flow.sender, flow.receiver),
                });
            }
        }
        for endpoint in [&flow.sender, &flow.receiver] {
            if !self.nodes.contains_key(endpoint) {
                let mut node = Node::service(endpoint)?;
                node.auto_created = true;
                self.nodes.insert(endpoint.clone(), node);
                self.trace.record(endpoint, trace.clone());
            }
        }
        let key = flow.key();
        let id = key.item_id();
        match self.flows.get_mut(&key) {
            None => {
                self.flows.insert(key, flow.clone());
            }
            Some(existing) => {
                existing.stereotypes.extend(flow.stereotypes.iter().copied());
                existing.tagged_values.merge(&flow.tagged_values);
            }
        }
        self.record_item(&id, &flow.stereotypes, &flow.tagged_values, trace);
        Ok(())
    }

    /// Attach one stereotype or tagged value to an existing node or flow.
    pub fn annotate(
        &mut self,
        target: &Target,
        annotation: Annotation,
        trace: TraceEntry,
    ) -> Result<(), ModelError> {
        match target {
            Target::Node(name) => {
                let node = self
                    .nodes
                    .get_mut(name)
                    .ok_or_else(|| ModelError::MissingTarget(name.clone()))?;
                match &annotation {
                    Annotation::Stereotype(s) => {
                        check_node_applicability(*s, node.node_type, name)?;
                        node.stereotypes.insert(*s);
                    }
                    Annotation::Tag(k, v) => node.tagged_values.insert(k.clone(), v.clone()),
                }
            }
            Target::Flow(sender, receiver) => {
                let key = FlowKey {
                    sender: sender.clone(),
                    receiver: receiver.clone(),
                };
                let flow = self
                    .flows
                    .get_mut(&key)
                    .ok_or_else(|| ModelError::MissingTarget(key.to_string()))?;
                match &annotation {
                    Annotation::Stereotype(s) => {
                        if !s.applicability().flow {
                            return Err(ModelError::Applicability {
                                stereotype: s.to_string(),
                                target: format!("flow {key}"),
                            });
                        }
                        flow.stereotypes.insert(*s);
                    }
                    Annotation::Tag(k, v) => flow.tagged_values.insert(k.clone(), v.clone()),
                }
            }
        }
        self.trace
            .record_sub_item(&target.item_id(), annotation.sub_item_key(), trace);
        Ok(())
    }

    /// Extra evidence for an existing item under a named sub-item that is not
    /// an annotation (for example where a service is also declared).
    pub fn attach_evidence(&mut self, target: &Target, key: &str, trace: TraceEntry) -> Result<(), ModelError> {
        let exists = match target {
            Target::Node(n) => self.nodes.contains_key(n),
            Target::Flow(s, r) => self.flows.contains_key(&FlowKey {
                sender: s.clone(),
                receiver: r.clone(),
            }),
        };
        if !exists {
            return Err(ModelError::MissingTarget(target.item_id()));
        }
        self.trace.record_sub_item(&target.item_id(), key, trace);
        Ok(())
    }

    fn record_item(
        &mut self,
        id: &str,
        stereotypes: &BTreeSet<Stereotype>,
        tags: &Tags,
        trace: TraceEntry,
    ) {
        for s in stereotypes {
            self.trace.record_sub_item(id, s.as_str(), trace.clone());
        }
        for k in tags.keys() {
            self.trace.record_sub_item(id, k, trace.clone());
        }
        self.trace.record(id, trace);
    }

    /// Lists every violated model invariant; empty when the diagram is sound.
    pub fn check_invariants(&self) -> Vec<String> {
        let mut problems = Vec::new();
        for (name, node) in &self.nodes {
            if *name != node.canonical_name {
                problems.push(format!("node key {name} differs from {}", node.canonical_name));
            }
            if node.node_type == NodeType::Database && !node.has(Stereotype::Database) {
                problems.push(format!("database {name} lacks the database stereotype"));
            }
            if let Err(e) = node.check_stereotypes() {
                problems.push(e.to_string());
            }
            self.check_trace(name, &node.stereotypes, &node.tagged_values, &mut problems);
        }
        for (key, flow) in &self.flows {
            for end in [&key.sender, &key.receiver] {
                if !self.nodes.contains_key(end) {
                    problems.push(format!("flow {key} references missing node {end}"));
                }
            }
            if key.sender == key.receiver && !self.allow_self_flows {
                problems.push(format!("self-flow {key}"));
            }
            if flow.stereotypes.iter().any(|s| !s.applicability().flow) {
                problems.push(format!("flow {key} carries a non-flow stereotype"));
            }
            self.check_trace(&key.item_id(), &flow.stereotypes, &flow.tagged_values, &mut problems);
        }
        problems
    }

    fn check_trace(
        &self,
        id: &str,
        stereotypes: &BTreeSet<Stereotype>,
        tags: &Tags,
        problems: &mut Vec<String>,
    ) {
        let Some(record) = self.trace.get(id) else {
            problems.push(format!("{id} has no trace"));
            return;
        };
        if record.entries.is_empty() {
            problems.push(format!("{id} has no primary trace"));
        }
        let keys = stereotypes.iter().map(|s| s.as_str()).chain(tags.keys());
        for key in keys {
            if !record.sub_items.contains_key(key) {
                problems.push(format!("{id}: `{key}` has no trace"));
            }
        }
    }

    /// Rebuilds a diagram from already-validated parts (deserialization).
    pub(crate) fn from_parts(nodes: Vec<Node>, flows: Vec<Flow>) -> Result<Self, ModelError> {
        let mut dfd = Dfd::new();
        for node in nodes {
            node.check_stereotypes()?;
            dfd.nodes.insert(node.canonical_name.clone(), node);
        }
        for flow in flows {
            for end in [&flow.sender, &flow.receiver] {
                if !dfd.nodes.contains_key(end) {
                    return Err(ModelError::MissingTarget(end.clone()));
                }
            }
            if flow.sender == flow.receiver {
                dfd.allow_self_flows = true;
            }
            dfd.flows.insert(flow.key(), flow);
        }
        Ok(dfd)
    }

    /// Structural equality ignoring traceability.
    pub fn same_items(&self, other: &Dfd) -> bool {
        self.nodes.len() == other.nodes.len()
            && self.flows.len() == other.flows.len()
            && self.nodes.iter().zip(other.nodes.iter()).all(|((a, x), (b, y))| {
                a == b
                    && x.node_type == y.node_type
                    && x.stereotypes == y.stereotypes
                    && x.tagged_values == y.tagged_values
            })
            && self.flows.iter().zip(other.flows.iter()).all(|((a, x), (b, y))| {
                a == b && x.stereotypes == y.stereotypes && x.tagged_values == y.tagged_values
            })
    }
}

fn merge_type(existing: &Node, incoming: &Node) -> Result<NodeType, ModelError> {
    use NodeType::*;
    if existing.auto_created {
        return Ok(incoming.node_type);
    }
    if incoming.auto_created {
        return Ok(existing.node_type);
    }
    match (existing.node_type, incoming.node_type) {
        (a, b) if a == b => Ok(a),
        (Service, Database) | (Database, Service) => Ok(Database),
        (a, b) => Err(ModelError::TypeConflict {
            name: existing.canonical_name.clone(),
            existing: a,
            incoming: b,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(line: usize) -> TraceEntry {
        TraceEntry::new("src/App.java", line, Span::new(0, 3), "abc").unwrap()
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize_name("notification-service").unwrap(), "notification_service");
        assert_eq!(normalize_name("config").unwrap(), "config");
        assert_eq!(normalize_name("Account..Service").unwrap(), "account_service");
        assert_eq!(normalize_name("  \"gateway\" ").unwrap(), "gateway");
        assert!(matches!(normalize_name("  ''  "), Err(ModelError::InvalidName(_))));
        assert!(normalize_name("").is_err());
    }

    #[test]
    fn insert_into_empty() {
        let mut d = Dfd::new();
        d.upsert_node(Node::service("a").unwrap(), t(1)).unwrap();
        assert_eq!(d.node_count(), 1);
        assert!(d.check_invariants().is_empty());
    }

    #[test]
    fn stereotypes_union_on_merge() {
        let mut d = Dfd::new();
        let a = Node::service("notification-service").unwrap().with_stereotype(Stereotype::Internal);
        let b = Node::service("notification_service")
            .unwrap()
            .with_stereotype(Stereotype::ResourceServer);
        d.upsert_node(a, t(1)).unwrap();
        d.upsert_node(b, t(2)).unwrap();
        let n = d.node("notification_service").unwrap();
        assert_eq!(
            n.stereotypes.iter().copied().collect::<Vec<_>>(),
            vec![Stereotype::Internal, Stereotype::ResourceServer]
        );
        assert_eq!(d.trace().get("notification_service").unwrap().entries.len(), 2);
    }

    #[test]
    fn idempotent_tag_merge_and_multi_values() {
        let mut d = Dfd::new();
        d.upsert_node(Node::service("s").unwrap().with_tag("Port", "8000"), t(1)).unwrap();
        d.upsert_node(Node::service("s").unwrap().with_tag("Port", "8000"), t(2)).unwrap();
        assert_eq!(d.node("s").unwrap().tagged_values.single("Port"), Some("8000"));
        d.upsert_node(Node::service("s").unwrap().with_tag("Port", "9000"), t(3)).unwrap();
        assert_eq!(d.node("s").unwrap().tagged_values.get("Port").unwrap().len(), 2);
    }

    #[test]
    fn service_upgrades_to_database() {
        let mut d = Dfd::new();
        d.upsert_node(Node::service("db").unwrap(), t(1)).unwrap();
        d.upsert_node(Node::new("db", NodeType::Database).unwrap(), t(2)).unwrap();
        let n = d.node("db").unwrap();
        assert_eq!(n.node_type, NodeType::Database);
        assert!(n.has(Stereotype::Database));
    }

    #[test]
    fn database_external_conflict_first_writer_wins() {
        let mut d = Dfd::new();
        d.upsert_node(Node::new("db", NodeType::Database).unwrap(), t(1)).unwrap();
        let err = d.upsert_node(Node::external("db").unwrap(), t(2)).unwrap_err();
        assert!(matches!(err, ModelError::TypeConflict { .. }));
        assert_eq!(d.node("db").unwrap().node_type, NodeType::Database);
    }

    #[test]
    fn flow_auto_creates_endpoints() {
        let mut d = Dfd::new();
        d.upsert_flow(Flow::new("a", "b").unwrap(), t(1)).unwrap();
        assert_eq!(d.node_count(), 2);
        assert_eq!(d.flow_count(), 1);
        assert!(d.node("a").unwrap().is_auto_created());
        assert!(d.check_invariants().is_empty());
        // a later real declaration replaces the placeholder type
        d.upsert_node(Node::external("b").unwrap(), t(2)).unwrap();
        assert_eq!(d.node("b").unwrap().node_type, NodeType::ExternalEntity);
    }

    #[test]
    fn duplicate_flow_merges() {
        let mut d = Dfd::new();
        d.upsert_flow(Flow::new("a", "b").unwrap().with_stereotype(Stereotype::RestfulHttp), t(1))
            .unwrap();
        d.upsert_flow(
            Flow::new("a", "b").unwrap().with_stereotype(Stereotype::FeignConnection),
            t(2),
        )
        .unwrap();
        assert_eq!(d.flow_count(), 1);
        assert_eq!(d.flow("a", "b").unwrap().stereotypes.len(), 2);
    }

    #[test]
    fn flow_direction_is_kept() {
        let mut d = Dfd::new();
        d.upsert_flow(Flow::new("config", "notification-service").unwrap(), t(1)).unwrap();
        assert!(d.flow("config", "notification_service").is_some());
        assert!(d.flow("notification_service", "config").is_none());
    }

    #[test]
    fn self_flows_rejected_by_default() {
        let mut d = Dfd::new();
        assert!(matches!(
            d.upsert_flow(Flow::new("m", "m").unwrap(), t(1)),
            Err(ModelError::SelfFlow(_))
        ));
        d.set_allow_self_flows(true);
        d.upsert_flow(Flow::new("m", "m").unwrap(), t(1)).unwrap();
        assert_eq!(d.flow_count(), 1);
    }

    #[test]
    fn annotate_node_and_errors() {
        let mut d = Dfd::new();
        d.upsert_node(Node::service("auth-service").unwrap(), t(1)).unwrap();
        d.upsert_flow(Flow::new("a", "b").unwrap(), t(2)).unwrap();
        let target = Target::node("auth_service").unwrap();
        d.annotate(&target, Annotation::Stereotype(Stereotype::AuthorizationServer), t(3))
            .unwrap();
        assert!(d.node("auth_service").unwrap().has(Stereotype::AuthorizationServer));

        let flow = Target::flow("a", "b").unwrap();
        let err = d
            .annotate(&flow, Annotation::Stereotype(Stereotype::Gateway), t(4))
            .unwrap_err();
        assert!(matches!(err, ModelError::Applicability { .. }));

        let missing = Target::node("nope").unwrap();
        assert!(matches!(
            d.annotate(&missing, Annotation::tag("Port", "1"), t(5)),
            Err(ModelError::MissingTarget(_))
        ));
    }

    #[test]
    fn annotate_tag_records_sub_item() {
        let mut d = Dfd::new();
        d.upsert_node(Node::service("notification-service").unwrap(), t(3)).unwrap();
        let port = TraceEntry::new("notification-service.yml", 13, Span::new(8, 12), "8000").unwrap();
        d.annotate(
            &Target::node("notification_service").unwrap(),
            Annotation::tag("Port", "8000"),
            port.clone(),
        )
        .unwrap();
        let rec = d.trace().get("notification_service").unwrap();
        let sub = rec.sub_items.get("Port").unwrap().iter().next().unwrap();
        assert_eq!(sub, &port);
        assert_eq!(sub.span.to_string(), "(8:12)");
    }

    #[test]
    fn external_only_stereotype_on_service_rejected() {
        let n = Node::service("x").unwrap().with_stereotype(Stereotype::MailServer);
        let mut d = Dfd::new();
        assert!(d.upsert_node(n, t(1)).is_err());
    }
}

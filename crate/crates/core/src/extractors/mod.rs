//! Technology-specific extractors and the pipeline that runs them.
//!
//! Each [`Extractor`] reads the immutable index plus a snapshot of the diagram
//! and returns a [`Delta`]. Extractors of one [`Phase`] run side by side on the
//! same snapshot; their deltas are merged afterwards in a canonical order, so
//! the registry order inside a phase never changes the result.

mod code;
mod config;
mod finalize;
mod parse;
mod pipeline;
mod project;
mod rules;
mod util;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

pub use pipeline::{run_pipeline, ExtractorReport, PipelineReport, UnresolvedEvidence};
pub use project::{NameSource, Project, ServiceInfo};
pub use rules::{CredentialRule, LinkScope, Rule, RuleSet};

use crate::error::{ExtractError, ParseError};
use crate::exec::Parallelism;
use crate::model::{Annotation, Dfd, Flow, Node, Stereotype, Target, TraceEntry};
use crate::parsers::{BuildModule, ComposeFile, DockerfileInfo, ImageCatalog, PropertyFile};
use crate::search::FileIndex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Parse,
    Node,
    Flow,
    Annotation,
    Finalize,
}

impl Phase {
    pub const ALL: [Phase; 5] = [Phase::Parse, Phase::Node, Phase::Flow, Phase::Annotation, Phase::Finalize];

    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Parse => "parse",
            Phase::Node => "node",
            Phase::Flow => "flow",
            Phase::Annotation => "annotation",
            Phase::Finalize => "finalize",
        }
    }

    pub fn parse(s: &str) -> Option<Phase> {
        Phase::ALL.into_iter().find(|p| p.as_str() == s)
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Kinds of partial evidence handed from one extractor to a later one.
///
/// Payload keys per kind:
/// - `ssl_enabled`: `value`
/// - `endpoint_declared`: `path`, `method`
/// - `port`: `port`
/// - `message_exchange`: `exchange`, plus `queue` and `routing_key` for bindings
/// - `message_queue`: `queue`
/// - `discovery_registration`: `url`, `host`
/// - `config_client`: `uri`, `host`
/// - `credentials_found`: `key`, `kind` (`username` or `password`), `value`
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    SslEnabled,
    EndpointDeclared,
    Port,
    MessageExchange,
    MessageQueue,
    DiscoveryRegistration,
    ConfigClient,
    CredentialsFound,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Feature {
    pub kind: FeatureKind,
    /// Canonical name of the service the evidence belongs to.
    pub owner: String,
    pub payload: BTreeMap<String, String>,
    pub trace: TraceEntry,
}

impl Feature {
    pub fn new(kind: FeatureKind, owner: &str, trace: TraceEntry) -> Self {
        Self {
            kind,
            owner: owner.to_string(),
            payload: BTreeMap::new(),
            trace,
        }
    }

    pub fn with(mut self, key: &str, value: &str) -> Self {
        self.payload.insert(key.to_string(), value.to_string());
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.payload.get(key).map(String::as_str)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FeatureStore(BTreeSet<Feature>);

impl FeatureStore {
    pub fn insert(&mut self, f: Feature) {
        self.0.insert(f);
    }

    pub fn of_kind(&self, kind: FeatureKind) -> impl Iterator<Item = &Feature> {
        self.0.iter().filter(move |f| f.kind == kind)
    }

    pub fn of(&self, kind: FeatureKind, owner: &str) -> impl Iterator<Item = &Feature> {
        let owner = owner.to_string();
        self.0.iter().filter(move |f| f.kind == kind && f.owner == owner)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// One diagram mutation. The variant order is the merge order: nodes, then
/// flows, then annotations, then extra evidence.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Op {
    UpsertNode(Node, TraceEntry),
    UpsertFlow(Flow, TraceEntry),
    Annotate(Target, Annotation, TraceEntry),
    Evidence(Target, String, TraceEntry),
}

/// Parsed configuration handed from the parse phase to the project layout.
#[derive(Debug, Clone)]
pub enum Artifact {
    Properties(PropertyFile),
    Compose(String, ComposeFile),
    Modules(Vec<BuildModule>),
    Dockerfile(String, DockerfileInfo),
}

#[derive(Debug, Clone, Default)]
pub struct Delta {
    pub ops: Vec<Op>,
    pub features: Vec<Feature>,
    pub artifacts: Vec<Artifact>,
    pub unresolved: Vec<(String, Option<TraceEntry>)>,
    pub parse_errors: Vec<ParseError>,
}

impl Delta {
    pub fn is_empty(&self) -> bool {
        self.ops.is_empty() && self.features.is_empty() && self.artifacts.is_empty()
    }

    pub fn node(&mut self, node: Node, trace: TraceEntry) {
        self.ops.push(Op::UpsertNode(node, trace));
    }

    pub fn flow(&mut self, flow: Flow, trace: TraceEntry) {
        self.ops.push(Op::UpsertFlow(flow, trace));
    }

    pub fn annotate(&mut self, target: Target, annotation: Annotation, trace: TraceEntry) {
        self.ops.push(Op::Annotate(target, annotation, trace));
    }

    pub fn stereotype(&mut self, target: Target, s: Stereotype, trace: TraceEntry) {
        self.annotate(target, Annotation::Stereotype(s), trace);
    }

    pub fn tag(&mut self, target: Target, key: &str, value: &str, trace: TraceEntry) {
        self.annotate(target, Annotation::tag(key, value), trace);
    }

    pub fn evidence(&mut self, target: Target, key: &str, trace: TraceEntry) {
        self.ops.push(Op::Evidence(target, key.to_string(), trace));
    }

    pub fn feature(&mut self, f: Feature) {
        self.features.push(f);
    }

    pub fn unresolved(&mut self, message: impl Into<String>, trace: Option<TraceEntry>) {
        self.unresolved.push((message.into(), trace));
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOptions {
    /// Reproduce the reference prototype's broader heuristics.
    pub paper_parity: bool,
    pub rules: Arc<RuleSet>,
    pub images: ImageCatalog,
    pub parallelism: Parallelism,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            paper_parity: false,
            rules: Arc::new(RuleSet::default()),
            images: ImageCatalog::default(),
            parallelism: Parallelism::default(),
        }
    }
}

/// What an extractor sees: the index, the diagram as of the end of the
/// previous phase, the service layout and earlier features.
pub struct ExtractorContext<'a> {
    pub index: &'a FileIndex,
    pub dfd: &'a Dfd,
    pub project: &'a Project,
    pub features: &'a FeatureStore,
    pub options: &'a PipelineOptions,
}

pub trait Extractor: Send + Sync {
    fn name(&self) -> &str;
    fn phase(&self) -> Phase;
    /// Stereotypes this extractor can produce.
    fn emits(&self) -> Vec<Stereotype>;
    fn run(&self, ctx: &ExtractorContext<'_>) -> Result<Delta, ExtractError>;
}

/// The shipped extractor set, in registry order.
pub fn default_registry(options: &PipelineOptions) -> Vec<Box<dyn Extractor>> {
    let mut out: Vec<Box<dyn Extractor>> = Vec::new();
    out.extend(parse::extractors());
    out.extend(config::extractors());
    out.extend(code::extractors());
    for phase in [Phase::Node, Phase::Flow, Phase::Annotation, Phase::Finalize] {
        if options.rules.rules.iter().any(|r| r.phase == phase) {
            out.push(Box::new(rules::RuleExtractor::new(phase, options.rules.clone())));
        }
    }
    out.extend(finalize::extractors());
    out
}

/// Only the configuration parsers.
pub fn parse_only_registry() -> Vec<Box<dyn Extractor>> {
    parse::extractors()
}

/// Stereotypes the service layout assigns from the image catalog.
pub fn layout_emits(images: &ImageCatalog) -> BTreeSet<Stereotype> {
    let mut out: BTreeSet<Stereotype> = images
        .entries()
        .iter()
        .flat_map(|e| e.stereotypes.iter().copied())
        .collect();
    out.insert(Stereotype::Database);
    out
}

pub(crate) type RunFn = fn(&ExtractorContext<'_>) -> Result<Delta, ExtractError>;

/// An extractor defined by a plain function.
pub(crate) struct FnExtractor {
    pub name: &'static str,
    pub phase: Phase,
    pub emits: &'static [Stereotype],
    pub run: RunFn,
}

impl Extractor for FnExtractor {
    fn name(&self) -> &str {
        self.name
    }

    fn phase(&self) -> Phase {
        self.phase
    }

    fn emits(&self) -> Vec<Stereotype> {
        self.emits.to_vec()
    }

    fn run(&self, ctx: &ExtractorContext<'_>) -> Result<Delta, ExtractError> {
        (self.run)(ctx)
    }
}

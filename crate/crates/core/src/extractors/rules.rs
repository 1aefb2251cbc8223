use std::collections::BTreeSet;
use std::sync::{Arc, LazyLock};

use regex::Regex;
use serde::Deserialize;

use super::{Delta, Extractor, ExtractorContext, Phase};
use crate::error::{CatalogError, ExtractError};
use crate::model::{Flow, Node, Stereotype, Target};
use crate::search::{IdentifierRule, Keyword, LangClass, Match};

const BUILTIN: &str = include_str!("../../data/rules.toml");

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRules {
    #[serde(default)]
    rule: Vec<RawRule>,
    #[serde(default)]
    credential: Vec<RawCredential>,
    #[serde(default)]
    database_hints: Vec<String>,
    placeholder: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRule {
    name: String,
    #[serde(default = "default_phase")]
    phase: String,
    #[serde(default = "default_files")]
    files: Vec<String>,
    #[serde(default)]
    keywords: Vec<String>,
    pattern: Option<String>,
    #[serde(default)]
    stereotypes: Vec<String>,
    #[serde(default)]
    tags: std::collections::BTreeMap<String, String>,
    #[serde(default = "default_links")]
    links: String,
    parity_links: Option<String>,
    #[serde(default)]
    link_stereotypes: Vec<String>,
    #[serde(default)]
    flow_filter: Vec<String>,
    iterative: Option<RawIterative>,
    external: Option<RawExternal>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIterative {
    seed: String,
    class: String,
    #[serde(default)]
    follow: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExternal {
    name: String,
    #[serde(default)]
    stereotypes: Vec<String>,
    direction: String,
    #[serde(default)]
    flow_stereotypes: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCredential {
    keys: Vec<String>,
    kind: String,
    node: Option<String>,
    link_property: Option<String>,
    #[serde(default)]
    link_stereotypes: Vec<String>,
}

fn default_phase() -> String {
    "annotation".into()
}

fn default_files() -> Vec<String> {
    vec!["java".into()]
}

fn default_links() -> String {
    "none".into()
}

/// Which flows of the matched service a rule's link stereotypes go to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkScope {
    None,
    /// Every flow leaving the service.
    Outgoing,
    /// Flows leaving the service whose evidence is in the matched file.
    OutgoingSameFile,
    /// Flows into the service from other services.
    IncomingInternal,
}

impl LinkScope {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "none" => LinkScope::None,
            "outgoing" => LinkScope::Outgoing,
            "outgoing_same_file" => LinkScope::OutgoingSameFile,
            "incoming_internal" => LinkScope::IncomingInternal,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone)]
pub enum RuleMatcher {
    Literals(Vec<String>),
    Pattern(Regex),
    Iterative {
        seed: String,
        rule: IdentifierRule,
        follow: Vec<String>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    ToOwner,
    FromOwner,
}

#[derive(Debug, Clone)]
pub struct ExternalSpec {
    pub name: String,
    pub stereotypes: Vec<Stereotype>,
    pub direction: Direction,
    pub flow_stereotypes: Vec<Stereotype>,
}

/// One keyword rule: evidence in a service's files adds stereotypes and
/// tags to that service and optionally to some of its flows.
#[derive(Debug, Clone)]
pub struct Rule {
    pub name: String,
    pub phase: Phase,
    pub files: Vec<LangClass>,
    pub matcher: RuleMatcher,
    pub stereotypes: Vec<Stereotype>,
    pub tags: Vec<(String, String)>,
    pub links: LinkScope,
    pub parity_links: Option<LinkScope>,
    pub link_stereotypes: Vec<Stereotype>,
    pub flow_filter: Vec<Stereotype>,
    pub external: Option<ExternalSpec>,
}

impl Rule {
    pub fn emits(&self) -> Vec<Stereotype> {
        let mut out: BTreeSet<Stereotype> = self.stereotypes.iter().copied().collect();
        out.extend(self.link_stereotypes.iter().copied());
        if let Some(e) = &self.external {
            out.extend(e.stereotypes.iter().copied());
            out.extend(e.flow_stereotypes.iter().copied());
        }
        out.into_iter().collect()
    }
}

/// Credential key patterns: the first rule whose key glob matches a
/// configuration key decides how a plaintext value is reported.
#[derive(Debug, Clone)]
pub struct CredentialRule {
    pub keys: Vec<String>,
    /// `username` or `password`; also the tag key.
    pub kind: String,
    /// Node that receives the credential instead of the owning service.
    pub node: Option<String>,
    /// Property naming the peer the credential is sent to.
    pub link_property: Option<String>,
    pub link_stereotypes: Vec<Stereotype>,
}

impl CredentialRule {
    pub fn matches(&self, key: &str) -> bool {
        let key = key.split_once(':').map(|(_, k)| k).unwrap_or(key);
        self.keys.iter().any(|g| glob(g, key))
    }
}

fn glob(pattern: &str, key: &str) -> bool {
    match pattern.split_once('*') {
        None => pattern == key,
        Some((pre, post)) => key.len() >= pre.len() + post.len() && key.starts_with(pre) && key.ends_with(post),
    }
}

#[derive(Debug, Clone)]
pub struct RuleSet {
    pub rules: Vec<Rule>,
    pub credentials: Vec<CredentialRule>,
    /// Image or service name fragments that mark an unknown image as a database.
    pub database_hints: Vec<String>,
    /// Values matching this are placeholders, not plaintext secrets.
    pub placeholder: Regex,
}

static BUILTIN_RULES: LazyLock<RuleSet> =
    LazyLock::new(|| RuleSet::from_toml(BUILTIN).expect("shipped rule table is valid"));

impl Default for RuleSet {
    fn default() -> Self {
        BUILTIN_RULES.clone()
    }
}

fn stereotypes(entry: &str, names: &[String]) -> Result<Vec<Stereotype>, CatalogError> {
    names
        .iter()
        .map(|n| {
            n.parse().map_err(|_| CatalogError::Entry {
                entry: entry.to_string(),
                message: format!("unknown stereotype `{n}`"),
            })
        })
        .collect()
}

fn entry_err(entry: &str, message: impl Into<String>) -> CatalogError {
    CatalogError::Entry {
        entry: entry.to_string(),
        message: message.into(),
    }
}

impl RuleSet {
    pub fn from_toml(text: &str) -> Result<Self, CatalogError> {
        let raw: RawRules = toml::from_str(text)?;
        let mut rules = Vec::new();
        for r in raw.rule {
            let name = r.name.clone();
            let phase = Phase::parse(&r.phase)
                .filter(|p| *p != Phase::Parse)
                .ok_or_else(|| entry_err(&name, format!("bad phase `{}`", r.phase)))?;
            let files = r
                .files
                .iter()
                .map(|f| f.parse::<LangClass>().map_err(|m| entry_err(&name, m)))
                .collect::<Result<Vec<_>, _>>()?;
            let matcher = match (&r.iterative, &r.pattern, r.keywords.is_empty()) {
                (Some(it), None, true) => RuleMatcher::Iterative {
                    seed: it.seed.clone(),
                    rule: IdentifierRule::declared_instance(&it.class),
                    follow: it.follow.clone(),
                },
                (None, Some(p), true) => RuleMatcher::Pattern(Regex::new(p).map_err(|source| CatalogError::Pattern {
                    entry: name.clone(),
                    source,
                })?),
                (None, None, false) => {
                    if r.keywords.iter().any(|k| k.is_empty()) {
                        return Err(entry_err(&name, "empty keyword"));
                    }
                    RuleMatcher::Literals(r.keywords.clone())
                }
                _ => return Err(entry_err(&name, "exactly one of keywords, pattern, iterative is required")),
            };
            let node_st = stereotypes(&name, &r.stereotypes)?;
            if let Some(bad) = node_st.iter().find(|s| !s.applicability().node) {
                return Err(entry_err(&name, format!("`{bad}` is not a service stereotype")));
            }
            let link_st = stereotypes(&name, &r.link_stereotypes)?;
            if let Some(bad) = link_st.iter().find(|s| !s.applicability().flow) {
                return Err(entry_err(&name, format!("`{bad}` is not a flow stereotype")));
            }
            let links = LinkScope::parse(&r.links).ok_or_else(|| entry_err(&name, format!("bad links `{}`", r.links)))?;
            let parity_links = match &r.parity_links {
                Some(l) => Some(LinkScope::parse(l).ok_or_else(|| entry_err(&name, format!("bad parity_links `{l}`")))?),
                None => None,
            };
            let external = match r.external {
                Some(e) => {
                    let st = stereotypes(&name, &e.stereotypes)?;
                    if let Some(bad) = st.iter().find(|s| !s.applicability().external) {
                        return Err(entry_err(&name, format!("`{bad}` is not an external-entity stereotype")));
                    }
                    let direction = match e.direction.as_str() {
                        "to_owner" => Direction::ToOwner,
                        "from_owner" => Direction::FromOwner,
                        d => return Err(entry_err(&name, format!("bad direction `{d}`"))),
                    };
                    Some(ExternalSpec {
                        name: e.name,
                        stereotypes: st,
                        direction,
                        flow_stereotypes: stereotypes(&name, &e.flow_stereotypes)?,
                    })
                }
                None => None,
            };
            rules.push(Rule {
                name,
                phase,
                files,
                matcher,
                stereotypes: node_st,
                tags: r.tags.into_iter().collect(),
                links,
                parity_links,
                link_stereotypes: link_st,
                flow_filter: stereotypes(&r.name, &r.flow_filter)?,
                external,
            });
        }
        let mut credentials = Vec::new();
        for c in raw.credential {
            let entry = c.keys.join(",");
            if !matches!(c.kind.as_str(), "username" | "password") {
                return Err(entry_err(&entry, format!("bad kind `{}`", c.kind)));
            }
            credentials.push(CredentialRule {
                link_stereotypes: stereotypes(&entry, &c.link_stereotypes)?,
                keys: c.keys.into_iter().map(|k| k.to_lowercase()).collect(),
                kind: c.kind,
                node: c.node,
                link_property: c.link_property.map(|p| p.to_lowercase()),
            });
        }
        let placeholder = Regex::new(raw.placeholder.as_deref().unwrap_or(r"\$\{")).map_err(|source| {
            CatalogError::Pattern {
                entry: "placeholder".into(),
                source,
            }
        })?;
        Ok(Self {
            rules,
            credentials,
            database_hints: raw.database_hints.into_iter().map(|h| h.to_lowercase()).collect(),
            placeholder,
        })
    }

    /// Rules of `overrides` replace same-named rules and add new ones;
    /// credential rules and hints are prepended so they take precedence.
    pub fn with_overrides(mut self, overrides: RuleSet) -> Self {
        for o in overrides.rules {
            self.rules.retain(|r| r.name != o.name);
            self.rules.push(o);
        }
        let mut creds = overrides.credentials;
        creds.append(&mut self.credentials);
        self.credentials = creds;
        let mut hints = overrides.database_hints;
        hints.append(&mut self.database_hints);
        self.database_hints = hints;
        self
    }

    pub fn credential_rule(&self, key: &str) -> Option<&CredentialRule> {
        self.credentials.iter().find(|c| c.matches(key))
    }

    pub fn is_placeholder(&self, value: &str) -> bool {
        value.trim().is_empty() || self.placeholder.is_match(value)
    }
}

/// Runs every rule of one phase.
pub(crate) struct RuleExtractor {
    phase: Phase,
    name: String,
    rules: Arc<RuleSet>,
}

impl RuleExtractor {
    pub(crate) fn new(phase: Phase, rules: Arc<RuleSet>) -> Self {
        Self {
            phase,
            name: format!("rules_{}", phase.as_str()),
            rules,
        }
    }

    fn hits(&self, rule: &Rule, ctx: &ExtractorContext<'_>) -> Result<Vec<Match>, ExtractError> {
        let files = Some(rule.files.as_slice());
        Ok(match &rule.matcher {
            RuleMatcher::Literals(ks) => {
                let mut out = Vec::new();
                for k in ks {
                    out.extend(ctx.index.find_keyword(Keyword::Word(k), files)?);
                }
                out
            }
            RuleMatcher::Pattern(re) => ctx.index.find_keyword(Keyword::Compiled(re), files)?,
            RuleMatcher::Iterative { seed, rule: id, follow } => {
                let follow: Vec<&str> = follow.iter().map(String::as_str).collect();
                ctx.index
                    .iterative_search(seed, id, &follow)?
                    .into_iter()
                    .filter(|c| c.resolved)
                    .filter(|c| ctx.index.file(&c.seed().file).is_some_and(|f| rule.files.contains(&f.class)))
                    .map(|c| c.last().clone())
                    .collect()
            }
        })
    }

    fn apply(&self, rule: &Rule, ctx: &ExtractorContext<'_>, delta: &mut Delta) -> Result<(), ExtractError> {
        let mut hits = self.hits(rule, ctx)?;
        hits.sort();
        hits.dedup();
        for m in hits {
            let Some(owner) = ctx.project.owner_of(&m.file) else {
                delta.unresolved(format!("{}: evidence outside any service", rule.name), Some(m.trace()));
                continue;
            };
            let trace = m.trace();
            let target = Target::Node(owner.name.clone());
            for s in &rule.stereotypes {
                delta.stereotype(target.clone(), *s, trace.clone());
            }
            for (k, v) in &rule.tags {
                delta.tag(target.clone(), k, v, trace.clone());
            }
            let scope = if ctx.options.paper_parity {
                rule.parity_links.unwrap_or(rule.links)
            } else {
                rule.links
            };
            if !rule.link_stereotypes.is_empty() {
                for f in linked_flows(ctx, &owner.name, scope, &m.file, &rule.flow_filter) {
                    for s in &rule.link_stereotypes {
                        delta.stereotype(Target::Flow(f.0.clone(), f.1.clone()), *s, trace.clone());
                    }
                }
            }
            if let Some(ext) = &rule.external {
                let node = Node::external(&ext.name)?.with_stereotypes(ext.stereotypes.iter().copied());
                let ext_name = node.canonical_name.clone();
                delta.node(node, trace.clone());
                let flow = match ext.direction {
                    Direction::ToOwner => Flow::new(&ext_name, &owner.name)?,
                    Direction::FromOwner => Flow::new(&owner.name, &ext_name)?,
                };
                delta.flow(flow.with_stereotypes(ext.flow_stereotypes.iter().copied()), trace.clone());
            }
        }
        Ok(())
    }
}

/// `(sender, receiver)` of the flows a rule's links cover.
pub(crate) fn linked_flows(
    ctx: &ExtractorContext<'_>,
    owner: &str,
    scope: LinkScope,
    file: &str,
    filter: &[Stereotype],
) -> Vec<(String, String)> {
    let dfd = ctx.dfd;
    let keep = |f: &crate::model::Flow| filter.is_empty() || filter.iter().any(|s| f.has(*s));
    let flows: Vec<&crate::model::Flow> = match scope {
        LinkScope::None => Vec::new(),
        LinkScope::Outgoing => dfd.outgoing(owner).filter(|f| keep(f)).collect(),
        LinkScope::OutgoingSameFile => dfd
            .outgoing(owner)
            .filter(|f| keep(f))
            .filter(|f| {
                let id = crate::model::flow_item_id(&f.sender, &f.receiver);
                dfd.trace()
                    .get(&id)
                    .is_some_and(|r| r.all_entries().any(|e| e.file == file))
            })
            .collect(),
        LinkScope::IncomingInternal => dfd
            .incoming(owner)
            .filter(|f| keep(f))
            .filter(|f| {
                dfd.node(&f.sender)
                    .is_some_and(|n| n.node_type == crate::model::NodeType::Service)
            })
            .collect(),
    };
    flows.into_iter().map(|f| (f.sender.clone(), f.receiver.clone())).collect()
}

impl Extractor for RuleExtractor {
    fn name(&self) -> &str {
        &self.name
    }

    fn phase(&self) -> Phase {
        self.phase
    }

    fn emits(&self) -> Vec<Stereotype> {
        let set: BTreeSet<Stereotype> = self
            .rules
            .rules
            .iter()
            .filter(|r| r.phase == self.phase)
            .flat_map(|r| r.emits())
            .collect();
        set.into_iter().collect()
    }

    fn run(&self, ctx: &ExtractorContext<'_>) -> Result<Delta, ExtractError> {
        let mut delta = Delta::default();
        for rule in self.rules.rules.iter().filter(|r| r.phase == self.phase) {
            // a misfiring rule only loses its own evidence
            let mut own = Delta::default();
            match self.apply(rule, ctx, &mut own) {
                Ok(()) => {
                    delta.ops.append(&mut own.ops);
                    delta.unresolved.append(&mut own.unresolved);
                }
                Err(e) => delta.unresolved(format!("rule {} failed: {e}", rule.name), None),
            }
        }
        Ok(delta)
    }
}

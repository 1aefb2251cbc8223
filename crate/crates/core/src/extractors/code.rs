//! Extractors reading Java source: declarative clients, REST calls,
//! request mappings and messaging.

use std::collections::BTreeSet;
use std::sync::LazyLock;

use regex::Regex;

use super::util::{call_args, canonical, is_ip_literal, is_local_host, parse_url, resolve_text, statement_lines, string_literals, sub_match};
use super::{Delta, Extractor, ExtractorContext, Feature, FeatureKind, FnExtractor, Phase, RunFn};
use crate::error::ExtractError;
use crate::model::{Flow, Node, Stereotype, Target};
use crate::search::{IndexedFile, Keyword, LangClass, Match};

const STATEMENT_LINES: usize = 8;

pub(crate) fn extractors() -> Vec<Box<dyn Extractor>> {
    use Stereotype as S;
    let table: [(&'static str, Phase, &'static [Stereotype], RunFn); 5] = [
        ("endpoints", Phase::Node, &[], endpoints),
        ("broker_bindings", Phase::Node, &[], broker_bindings),
        ("feign", Phase::Flow, &[S::RestfulHttp, S::FeignConnection, S::CircuitBreakerLink, S::ExternalWebsite], feign),
        ("rest_calls", Phase::Flow, &[S::RestfulHttp, S::ExternalWebsite], rest_calls),
        (
            "message_broker",
            Phase::Flow,
            &[
                S::MessageBroker,
                S::Infrastructural,
                S::MessageProducerKafka,
                S::MessageProducerRabbitmq,
                S::MessageConsumerKafka,
                S::MessageConsumerRabbitmq,
            ],
            message_broker,
        ),
    ];
    table
        .into_iter()
        .map(|(name, phase, emits, run)| Box::new(FnExtractor { name, phase, emits, run }) as Box<dyn Extractor>)
        .collect()
}

fn is_test(path: &str) -> bool {
    path.contains("/src/test/") || path.starts_with("src/test/")
}

fn java_hits(ctx: &ExtractorContext<'_>, keyword: Keyword<'_>) -> Result<Vec<Match>, ExtractError> {
    let mut hits: Vec<Match> = ctx
        .index
        .find_keyword(keyword, Some(&[LangClass::Java]))?
        .into_iter()
        .filter(|m| !is_test(&m.file))
        .collect();
    hits.sort();
    Ok(hits)
}

/// The literal an argument expression stands for. `"a" + b` yields `a`.
fn resolve_arg(ctx: &ExtractorContext<'_>, line: &Match, arg: &str, start: usize, owner: &str) -> Option<String> {
    let arg = arg.trim();
    let value = if arg.starts_with('"') {
        string_literals(arg).first().map(|(s, _)| s.to_string())?
    } else {
        let head = arg.split('+').next()?.trim();
        if head.starts_with('"') {
            string_literals(head).first().map(|(s, _)| s.to_string())?
        } else {
            let m = sub_match(line, start, (start + head.len()).min(line.line_text.len()));
            let chain = ctx.index.resolve_identifier(&m, head);
            match chain.value {
                Some(v) if chain.resolved => v,
                _ => head.to_string(),
            }
        }
    };
    if value.contains("${") {
        return resolve_text(ctx, &value, &line.file, Some(owner));
    }
    (!value.is_empty()).then_some(value)
}

/// Canonical node name a host refers to.
fn target_of(ctx: &ExtractorContext<'_>, host: &str) -> Option<String> {
    if let Some(s) = ctx.project.resolve_host(host) {
        return Some(s.name.clone());
    }
    let c = canonical(host)?;
    ctx.dfd.node(&c).map(|n| n.canonical_name.clone())
}

static ATTR: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\b(name|value|url|fallback|fallbackFactory)\s*=\s*").unwrap());

/// Attributes of a multi-line annotation: `(attribute, argument, line, start)`.
/// A bare first argument is reported as `value`.
fn annotation_args<'a>(lines: &'a [Match], keyword: &str) -> Vec<(String, &'a str, &'a Match, usize)> {
    let mut out = Vec::new();
    let mut first = true;
    for (i, m) in lines.iter().enumerate() {
        let open = if i == 0 {
            match m.line_text.find(keyword).and_then(|k| m.line_text[k..].find('(').map(|p| k + p)) {
                Some(p) => p,
                None => return out,
            }
        } else {
            // continuation lines: pretend the argument list reopens here
            usize::MAX
        };
        let args: Vec<(&str, usize)> = if open == usize::MAX {
            continuation_args(&m.line_text)
        } else {
            call_args(&m.line_text, open)
        };
        for (arg, start) in args {
            if let Some(c) = ATTR.captures(arg) {
                let whole = c.get(0).expect("match");
                if whole.start() == 0 {
                    let rest = &arg[whole.end()..];
                    out.push((c[1].to_string(), rest.trim(), m, start + whole.end()));
                    first = false;
                    continue;
                }
            }
            if first && !arg.contains('=') {
                out.push(("value".to_string(), arg, m, start));
            }
            first = false;
        }
    }
    out
}

/// Comma-separated arguments of a continuation line, up to the closing
/// parenthesis of the annotation.
fn continuation_args(line: &str) -> Vec<(&str, usize)> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut in_str = false;
    let mut start = 0;
    let bytes = line.as_bytes();
    let mut end = line.len();
    for (i, &c) in bytes.iter().enumerate() {
        if in_str {
            if c == b'"' && (i == 0 || bytes[i - 1] != b'\\') {
                in_str = false;
            }
            continue;
        }
        match c {
            b'"' => in_str = true,
            b'(' | b'{' => depth += 1,
            b')' | b'}' if depth > 0 => depth -= 1,
            b')' => {
                end = i;
                break;
            }
            b',' if depth == 0 => {
                push(line, start, i, &mut out);
                start = i + 1;
            }
            _ => {}
        }
    }
    push(line, start, end, &mut out);
    out
}

fn push<'a>(line: &'a str, start: usize, end: usize, out: &mut Vec<(&'a str, usize)>) {
    let raw = &line[start..end];
    let lead = raw.len() - raw.trim_start().len();
    let arg = raw.trim();
    if !arg.is_empty() {
        out.push((arg, start + lead));
    }
}

fn feign(ctx: &ExtractorContext<'_>) -> Result<Delta, ExtractError> {
    let mut delta = Delta::default();
    for hit in java_hits(ctx, Keyword::Literal("@FeignClient"))? {
        let Some(owner) = ctx.project.owner_of(&hit.file) else {
            delta.unresolved("feign client outside any service", Some(hit.trace()));
            continue;
        };
        let Some(file) = ctx.index.file(&hit.file) else { continue };
        let lines = statement_lines(file, hit.line, STATEMENT_LINES);
        let args = annotation_args(&lines, "@FeignClient");
        let mut name = None;
        let mut url = None;
        let mut fallback = false;
        for (attr, arg, m, start) in &args {
            match attr.as_str() {
                "name" | "value" if name.is_none() => name = resolve_arg(ctx, m, arg, *start, &owner.name),
                "url" if url.is_none() => {
                    url = resolve_arg(ctx, m, arg, *start, &owner.name)
                        .and_then(|u| parse_url(&u))
                        .map(|u| u.host)
                }
                "fallback" | "fallbackFactory" => fallback = true,
                _ => {}
            }
        }
        // an explicit url bypasses discovery, so it names the real peer
        let by_url = url.as_deref().and_then(|host| match target_of(ctx, host) {
            Some(t) => Some(Ok(t)),
            None if !is_local_host(host) && (is_ip_literal(host) || host.contains('.')) => Some(Err(host.to_string())),
            None => None,
        });
        let receiver = match (by_url, name) {
            (Some(Ok(t)), _) => t,
            (Some(Err(host)), _) => {
                let node = Node::external(&host)?.with_stereotype(Stereotype::ExternalWebsite);
                let n = node.canonical_name.clone();
                delta.node(node, hit.trace());
                n
            }
            (None, Some(name)) => match target_of(ctx, &name) {
                Some(t) => t,
                None => {
                    let Some(c) = canonical(&name) else { continue };
                    delta.unresolved(format!("feign target `{name}` is not deployed"), Some(hit.trace()));
                    c
                }
            },
            (None, None) => {
                delta.unresolved("feign client without a resolvable target", Some(hit.trace()));
                continue;
            }
        };
        let mut flow = Flow::new(&owner.name, &receiver)?
            .with_stereotype(Stereotype::RestfulHttp)
            .with_stereotype(Stereotype::FeignConnection);
        if fallback {
            flow = flow.with_stereotype(Stereotype::CircuitBreakerLink);
        }
        delta.flow(flow, hit.trace());
    }
    Ok(delta)
}

static MAPPING: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"@(Request|Get|Post|Put|Delete|Patch)Mapping\b").unwrap());
static REQUEST_METHOD: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"RequestMethod\.([A-Z]+)").unwrap());

/// Whether the annotation at `line` (1-based) sits on a type declaration.
fn on_type(file: &IndexedFile, line: usize) -> bool {
    for text in file.lines.iter().skip(line) {
        let t = text.trim();
        if t.is_empty() || t.starts_with('@') || t.starts_with("//") || t.starts_with('*') || t.starts_with("/*") {
            continue;
        }
        return t.contains("class ") || t.contains("interface ");
    }
    false
}

fn join_path(prefix: &str, path: &str) -> String {
    let p = format!("/{}/{}", prefix.trim_matches('/'), path.trim_matches('/'));
    let mut out = String::new();
    for seg in p.split('/').filter(|s| !s.is_empty()) {
        out.push('/');
        out.push_str(seg);
    }
    if out.is_empty() {
        "/".to_string()
    } else {
        out
    }
}

fn endpoints(ctx: &ExtractorContext<'_>) -> Result<Delta, ExtractError> {
    let mut delta = Delta::default();
    let hits = java_hits(ctx, Keyword::Compiled(&MAPPING))?;
    let mut prefix: Option<(String, String)> = None;
    for hit in hits {
        let Some(owner) = ctx.project.owner_of(&hit.file) else { continue };
        let Some(file) = ctx.index.file(&hit.file) else { continue };
        let lines = statement_lines(file, hit.line, STATEMENT_LINES);
        let text: String = lines.iter().map(|l| l.line_text.as_str()).collect::<Vec<_>>().join(" ");
        let kind = MAPPING
            .captures(&hit.line_text[hit.span.start..])
            .map(|c| c[1].to_string())
            .unwrap_or_default();
        let path = text[text.find('@').unwrap_or(0)..]
            .find('(')
            .and_then(|_| string_literals(&text).into_iter().next().map(|(s, _)| s.to_string()))
            .unwrap_or_default();
        if on_type(file, hit.line) {
            prefix = Some((hit.file.clone(), path));
            continue;
        }
        let base = match &prefix {
            Some((f, p)) if *f == hit.file => p.as_str(),
            _ => "",
        };
        let method = match kind.as_str() {
            "Request" => REQUEST_METHOD
                .captures(&text)
                .map(|c| c[1].to_string())
                .unwrap_or_else(|| "ANY".to_string()),
            k => k.to_ascii_uppercase(),
        };
        delta.feature(
            Feature::new(FeatureKind::EndpointDeclared, &owner.name, hit.trace())
                .with("path", &join_path(base, &path))
                .with("method", &method),
        );
    }
    Ok(delta)
}

static REST_CALL: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"\.(getForObject|getForEntity|postForObject|postForEntity|postForLocation|put|patchForObject|delete|exchange|uri)\s*\(").unwrap()
});

fn rest_calls(ctx: &ExtractorContext<'_>) -> Result<Delta, ExtractError> {
    let mut delta = Delta::default();
    let mut declared: Vec<(&str, &str)> = ctx
        .features
        .of_kind(FeatureKind::EndpointDeclared)
        .filter_map(|f| Some((f.owner.as_str(), f.get("path")?)))
        .collect();
    declared.sort();
    declared.dedup();
    for hit in java_hits(ctx, Keyword::Compiled(&REST_CALL))? {
        let Some(file) = ctx.index.file(&hit.file) else { continue };
        if !file.lines.iter().any(|l| l.contains("RestTemplate") || l.contains("WebClient")) {
            continue;
        }
        let Some(owner) = ctx.project.owner_of(&hit.file) else { continue };
        let open = hit.span.end - 1;
        let Some((arg, start)) = call_args(&hit.line_text, open).into_iter().next() else { continue };
        let Some(url) = resolve_arg(ctx, &hit, arg, start, &owner.name) else { continue };
        let Some(u) = parse_url(&url).filter(|u| !u.scheme.is_empty()) else { continue };
        let trace = hit.trace();
        if let Some(t) = target_of(ctx, &u.host) {
            delta.flow(Flow::new(&owner.name, &t)?.with_stereotype(Stereotype::RestfulHttp), trace.clone());
            let path = u.path.split('?').next().unwrap_or_default();
            let matched = declared
                .iter()
                .filter(|(o, p)| *o == t && *p != "/" && path.starts_with(*p))
                .max_by_key(|(_, p)| p.len());
            if let Some((_, p)) = matched {
                delta.tag(Target::Node(t.clone()), "Endpoints", p, trace);
            }
        } else if is_local_host(&u.host) {
            delta.unresolved(format!("REST call from {} to `{}`", owner.name, u.host), Some(trace));
        } else if is_ip_literal(&u.host) || u.host.contains('.') {
            let node = Node::external(&u.host)?.with_stereotype(Stereotype::ExternalWebsite);
            let name = node.canonical_name.clone();
            delta.node(node, trace.clone());
            delta.flow(Flow::new(&owner.name, &name)?.with_stereotype(Stereotype::RestfulHttp), trace);
        } else {
            delta.unresolved(format!("REST target `{}` of {} is not deployed", u.host, owner.name), Some(trace));
        }
    }
    Ok(delta)
}

static DECLARATION: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"new\s+(Queue|TopicExchange|DirectExchange|FanoutExchange|HeadersExchange)\s*\(").unwrap());

fn broker_bindings(ctx: &ExtractorContext<'_>) -> Result<Delta, ExtractError> {
    let mut delta = Delta::default();
    for hit in java_hits(ctx, Keyword::Compiled(&DECLARATION))? {
        let Some(owner) = ctx.project.owner_of(&hit.file) else { continue };
        let open = hit.span.end - 1;
        let Some((arg, start)) = call_args(&hit.line_text, open).into_iter().next() else { continue };
        let Some(name) = resolve_arg(ctx, &hit, arg, start, &owner.name) else { continue };
        let f = if hit.text().contains("Queue") {
            Feature::new(FeatureKind::MessageQueue, &owner.name, hit.trace()).with("queue", &name)
        } else {
            Feature::new(FeatureKind::MessageExchange, &owner.name, hit.trace()).with("exchange", &name)
        };
        delta.feature(f);
    }
    Ok(delta)
}

static PRODUCER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\.(convertAndSend|send)\s*\(").unwrap());
static LISTENER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"@(RabbitListener|KafkaListener)\b").unwrap());
static LISTENER_ATTR: LazyLock<Regex> = LazyLock::new(|| Regex::new(r#"\b(queues|topics)\s*=\s*\{?\s*([^,})]+)"#).unwrap());

fn message_broker(ctx: &ExtractorContext<'_>) -> Result<Delta, ExtractError> {
    let mut delta = Delta::default();
    let brokers: Vec<String> = ctx
        .dfd
        .nodes()
        .filter(|n| n.has(Stereotype::MessageBroker))
        .map(|n| n.canonical_name.clone())
        .collect();
    let mut missing_reported = false;
    let mut broker_for = |delta: &mut Delta, m: &Match| -> Result<String, ExtractError> {
        if let [b] = brokers.as_slice() {
            return Ok(b.clone());
        }
        let node = Node::service("message_broker")?
            .with_stereotype(Stereotype::MessageBroker)
            .with_stereotype(Stereotype::Infrastructural);
        let name = node.canonical_name.clone();
        delta.node(node, m.trace());
        if !missing_reported {
            let why = if brokers.is_empty() { "no deployed message broker" } else { "several message brokers" };
            delta.unresolved(format!("{why}; messaging attached to `{name}`"), Some(m.trace()));
            missing_reported = true;
        }
        Ok(name)
    };

    for hit in java_hits(ctx, Keyword::Compiled(&PRODUCER))? {
        let Some(file) = ctx.index.file(&hit.file) else { continue };
        let rabbit = file.lines.iter().any(|l| l.contains("RabbitTemplate") || l.contains("AmqpTemplate"));
        let kafka = file.lines.iter().any(|l| l.contains("KafkaTemplate"));
        let is_convert = hit.text().starts_with(".convertAndSend");
        let (stereotype, tag) = match (rabbit, kafka) {
            (true, _) if is_convert || !kafka => (Stereotype::MessageProducerRabbitmq, "Exchange"),
            (_, true) if !is_convert => (Stereotype::MessageProducerKafka, "Topic"),
            _ => continue,
        };
        let Some(owner) = ctx.project.owner_of(&hit.file) else { continue };
        let broker = broker_for(&mut delta, &hit)?;
        let flow = Flow::new(&owner.name, &broker)?.with_stereotype(stereotype);
        let args = call_args(&hit.line_text, hit.span.end - 1);
        let mut flow = flow;
        if let Some((arg, start)) = args.first() {
            if args.len() > 1 {
                if let Some(v) = resolve_arg(ctx, &hit, arg, *start, &owner.name) {
                    flow = flow.with_tag(tag, &v);
                }
            }
        }
        if stereotype == Stereotype::MessageProducerRabbitmq && args.len() > 2 {
            if let Some(v) = resolve_arg(ctx, &hit, args[1].0, args[1].1, &owner.name) {
                flow = flow.with_tag("Routing Key", &v);
            }
        }
        delta.flow(flow, hit.trace());
    }

    for hit in java_hits(ctx, Keyword::Compiled(&LISTENER))? {
        let Some(owner) = ctx.project.owner_of(&hit.file) else { continue };
        let Some(file) = ctx.index.file(&hit.file) else { continue };
        let (stereotype, tag) = if hit.text().contains("Rabbit") {
            (Stereotype::MessageConsumerRabbitmq, "Queue")
        } else {
            (Stereotype::MessageConsumerKafka, "Topic")
        };
        let broker = broker_for(&mut delta, &hit)?;
        let mut flow = Flow::new(&broker, &owner.name)?.with_stereotype(stereotype);
        let mut names = BTreeSet::new();
        for m in statement_lines(file, hit.line, STATEMENT_LINES) {
            for c in LISTENER_ATTR.captures_iter(&m.line_text) {
                let g = c.get(2).expect("group 2");
                for (lit, off) in string_literals(g.as_str()) {
                    let quoted = format!("\"{lit}\"");
                    if let Some(v) = resolve_arg(ctx, &m, &quoted, g.start() + off - 1, &owner.name) {
                        names.insert(v);
                    }
                }
                if !g.as_str().trim_start().starts_with('"') {
                    let arg = g.as_str().trim();
                    if let Some(v) = resolve_arg(ctx, &m, arg, g.start(), &owner.name) {
                        names.insert(v);
                    }
                }
            }
        }
        for n in names {
            flow = flow.with_tag(tag, &n);
        }
        delta.flow(flow, hit.trace());
    }
    Ok(delta)
}

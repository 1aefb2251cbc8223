//! Extractors driven by Spring configuration properties and deployment files.

use std::collections::BTreeSet;
use std::sync::LazyLock;

use regex::Regex;

use super::util::{canonical, is_local_host, is_truthy, parse_url, resolve_text, UrlParts};
use super::{Delta, Extractor, ExtractorContext, Feature, FeatureKind, FnExtractor, Phase, RunFn, ServiceInfo};
use crate::error::ExtractError;
use crate::model::{Flow, Node, NodeType, Stereotype, Target, TraceEntry};
use crate::parsers::PropertyValue;
use crate::search::{Keyword, LangClass};

pub(crate) fn extractors() -> Vec<Box<dyn Extractor>> {
    use Stereotype as S;
    let table: [(&'static str, Phase, &'static [Stereotype], RunFn); 13] = [
        ("config_features", Phase::Node, &[], config_features),
        ("config_server", Phase::Flow, &[S::GithubRepository], config_server),
        ("discovery", Phase::Flow, &[], discovery),
        ("gateway_routes", Phase::Flow, &[S::RestfulHttp], gateway_routes),
        ("databases", Phase::Flow, &[S::Database, S::ExternalDatabase, S::Jdbc], databases),
        ("mail", Phase::Flow, &[S::MailServer], mail),
        ("tracing_admin", Phase::Flow, &[], tracing_admin),
        ("monitoring", Phase::Flow, &[], monitoring),
        ("logging", Phase::Flow, &[S::LoggingServer], logging),
        ("auth_provider", Phase::Flow, &[S::AuthProvider], auth_provider),
        ("ssl", Phase::Annotation, &[S::SslEnabled], ssl),
        (
            "credentials",
            Phase::Annotation,
            &[S::PlaintextCredentials, S::PlaintextCredentialsLink, S::PlaintextAuthentication],
            credentials,
        ),
        ("jdbc_literals", Phase::Flow, &[S::ExternalDatabase, S::Jdbc], jdbc_literals),
    ];
    table
        .into_iter()
        .map(|(name, phase, emits, run)| Box::new(FnExtractor { name, phase, emits, run }) as Box<dyn Extractor>)
        .collect()
}

/// Keys compared the way Spring's relaxed binding does: lowercase, no dashes.
fn relaxed(key: &str) -> String {
    key.to_ascii_lowercase().replace(['-', '_'], "")
}

/// Values of `s` whose relaxed key equals one of `keys`, unprofiled first.
fn props<'a>(s: &'a ServiceInfo, keys: &[&str]) -> Vec<(&'a str, &'a PropertyValue)> {
    let want: Vec<String> = keys.iter().map(|k| relaxed(k)).collect();
    let mut out: Vec<(&str, &PropertyValue)> = s
        .properties
        .iter()
        .filter(|(k, _)| {
            let plain = k.rsplit(':').next().unwrap_or(k);
            want.contains(&relaxed(plain))
        })
        .collect();
    out.sort_by_key(|(k, _)| k.contains(':'));
    out
}

/// Resolved URL of a property value; comma lists yield their first entry.
fn url_of(ctx: &ExtractorContext<'_>, owner: &str, v: &PropertyValue) -> Option<UrlParts> {
    let text = resolve_text(ctx, &v.value, &v.trace.file, Some(owner))?;
    let first = text.split(',').next()?.trim();
    parse_url(first)
}

/// Canonical node name a host refers to: a deployed service, or an existing
/// node of that name.
fn target_of(ctx: &ExtractorContext<'_>, host: &str) -> Option<String> {
    if let Some(s) = ctx.project.resolve_host(host) {
        return Some(s.name.clone());
    }
    let c = canonical(host)?;
    ctx.dfd.node(&c).map(|n| n.canonical_name.clone())
}

/// The only node carrying `s`, if there is exactly one.
fn unique_with(ctx: &ExtractorContext<'_>, s: Stereotype) -> Option<String> {
    let mut it = ctx.dfd.nodes().filter(|n| n.has(s));
    let first = it.next()?;
    it.next().is_none().then(|| first.canonical_name.clone())
}

/// Host resolution that falls back to the unique node with stereotype `role`
/// when the configuration points at localhost.
fn role_target(ctx: &ExtractorContext<'_>, host: &str, role: Stereotype) -> Option<String> {
    target_of(ctx, host).or_else(|| is_local_host(host).then(|| unique_with(ctx, role)).flatten())
}

fn config_features(ctx: &ExtractorContext<'_>) -> Result<Delta, ExtractError> {
    let mut delta = Delta::default();
    let rules = &ctx.options.rules;
    for s in ctx.project.services() {
        if let Some((_, v)) = props(s, &["server.ssl.enabled"]).first() {
            if is_truthy(&v.value) {
                delta.feature(Feature::new(FeatureKind::SslEnabled, &s.name, v.trace.clone()).with("value", &v.value));
            }
        }
        if let Some((_, v)) = props(s, &["spring.cloud.config.uri"]).first() {
            if let Some(u) = url_of(ctx, &s.name, v) {
                delta.feature(
                    Feature::new(FeatureKind::ConfigClient, &s.name, v.trace.clone())
                        .with("uri", &v.value)
                        .with("host", &u.host),
                );
            }
        }
        if let Some((_, v)) = props(s, &["eureka.client.serviceUrl.defaultZone", "eureka.client.service-url.defaultZone"]).first() {
            if let Some(u) = url_of(ctx, &s.name, v) {
                delta.feature(
                    Feature::new(FeatureKind::DiscoveryRegistration, &s.name, v.trace.clone())
                        .with("url", &v.value)
                        .with("host", &u.host),
                );
            }
        }
        let mut seen: BTreeSet<&TraceEntry> = BTreeSet::new();
        let mut entries: Vec<(&str, &PropertyValue)> = s.properties.iter().collect();
        entries.sort_by_key(|(k, _)| k.contains(':'));
        for (key, v) in entries {
            let Some(rule) = rules.credential_rule(key) else { continue };
            if rules.is_placeholder(&v.value) || !seen.insert(&v.trace) {
                continue;
            }
            delta.feature(
                Feature::new(FeatureKind::CredentialsFound, &s.name, v.trace.clone())
                    .with("key", key)
                    .with("kind", &rule.kind)
                    .with("value", v.value.trim()),
            );
        }
    }
    Ok(delta)
}

fn config_server(ctx: &ExtractorContext<'_>) -> Result<Delta, ExtractError> {
    let mut delta = Delta::default();
    for f in ctx.features.of_kind(FeatureKind::ConfigClient) {
        let host = f.get("host").unwrap_or_default();
        match role_target(ctx, host, Stereotype::ConfigurationServer) {
            Some(server) => delta.flow(Flow::new(&server, &f.owner)?, f.trace.clone()),
            None => delta.unresolved(format!("config server `{host}` of {} is not deployed", f.owner), Some(f.trace.clone())),
        }
    }
    for s in ctx.project.services() {
        let is_server = ctx.dfd.node(&s.name).is_some_and(|n| n.has(Stereotype::ConfigurationServer));
        if !is_server {
            continue;
        }
        for (_, v) in props(s, &["spring.cloud.config.server.git.uri"]) {
            let Some(u) = url_of(ctx, &s.name, v) else { continue };
            if !u.host.to_ascii_lowercase().contains("github") {
                continue;
            }
            let node = Node::external("github_repository")?.with_stereotype(Stereotype::GithubRepository);
            let repo = node.canonical_name.clone();
            delta.node(node, v.trace.clone());
            delta.flow(Flow::new(&repo, &s.name)?, v.trace.clone());
            break;
        }
    }
    Ok(delta)
}

fn discovery(ctx: &ExtractorContext<'_>) -> Result<Delta, ExtractError> {
    let mut delta = Delta::default();
    let mut registered: BTreeSet<String> = BTreeSet::new();
    for f in ctx.features.of_kind(FeatureKind::DiscoveryRegistration) {
        let host = f.get("host").unwrap_or_default();
        match role_target(ctx, host, Stereotype::ServiceDiscovery) {
            Some(registry) => {
                delta.flow(Flow::new(&registry, &f.owner)?, f.trace.clone());
                delta.flow(Flow::new(&f.owner, &registry)?, f.trace.clone());
                registered.insert(f.owner.clone());
            }
            None => delta.unresolved(format!("registry `{host}` of {} is not deployed", f.owner), Some(f.trace.clone())),
        }
    }
    // clients that only carry the annotation register with the one registry
    let Some(registry) = unique_with(ctx, Stereotype::ServiceDiscovery) else {
        return Ok(delta);
    };
    let mut hits = Vec::new();
    for k in ["@EnableDiscoveryClient", "@EnableEurekaClient"] {
        hits.extend(ctx.index.find_keyword(Keyword::Literal(k), Some(&[LangClass::Java]))?);
    }
    hits.sort();
    for m in hits {
        let Some(owner) = ctx.project.owner_of(&m.file) else { continue };
        if owner.name == registry || !registered.insert(owner.name.clone()) {
            continue;
        }
        delta.flow(Flow::new(&registry, &owner.name)?, m.trace());
        delta.flow(Flow::new(&owner.name, &registry)?, m.trace());
    }
    Ok(delta)
}

fn gateway_routes(ctx: &ExtractorContext<'_>) -> Result<Delta, ExtractError> {
    let mut delta = Delta::default();
    for s in ctx.project.services() {
        for (key, v) in s.properties.iter() {
            let plain = key.rsplit(':').next().unwrap_or(key);
            let host = if plain.starts_with("zuul.routes.") && relaxed(plain).ends_with(".serviceid") {
                resolve_text(ctx, &v.value, &v.trace.file, Some(&s.name))
            } else if (plain.starts_with("zuul.routes.") && plain.ends_with(".url"))
                || (plain.starts_with("spring.cloud.gateway.routes[") && plain.ends_with("].uri"))
            {
                url_of(ctx, &s.name, v).map(|u| u.host)
            } else {
                continue;
            };
            let Some(host) = host else { continue };
            match target_of(ctx, &host) {
                Some(t) => delta.flow(Flow::new(&s.name, &t)?.with_stereotype(Stereotype::RestfulHttp), v.trace.clone()),
                None => delta.unresolved(format!("route target `{host}` of {} is not deployed", s.name), Some(v.trace.clone())),
            }
        }
    }
    Ok(delta)
}

/// A database connection from `owner` to `host`. Deployed databases become
/// database nodes; hosts that are not deployed become external databases.
fn database_link(
    ctx: &ExtractorContext<'_>,
    delta: &mut Delta,
    owner: &str,
    host: &str,
    jdbc: bool,
    trace: &TraceEntry,
) -> Result<(), ExtractError> {
    let flow_of = |db: &str| -> Result<Flow, ExtractError> {
        let f = Flow::new(db, owner)?;
        Ok(if jdbc { f.with_stereotype(Stereotype::Jdbc) } else { f })
    };
    if let Some(svc) = ctx.project.resolve_host(host) {
        if svc.name == owner {
            return Ok(());
        }
        if svc.has_code {
            delta.unresolved(format!("database host `{host}` of {owner} is an application service"), Some(trace.clone()));
            return Ok(());
        }
        if jdbc {
            delta.node(Node::new(&svc.display, NodeType::Database)?, trace.clone());
        }
        delta.flow(flow_of(&svc.name)?, trace.clone());
        return Ok(());
    }
    if is_local_host(host) {
        delta.unresolved(format!("database of {owner} runs on `{host}`"), Some(trace.clone()));
        return Ok(());
    }
    let node = Node::external(host)?.with_stereotype(Stereotype::ExternalDatabase);
    let name = node.canonical_name.clone();
    delta.node(node, trace.clone());
    delta.flow(flow_of(&name)?, trace.clone());
    Ok(())
}

fn databases(ctx: &ExtractorContext<'_>) -> Result<Delta, ExtractError> {
    let mut delta = Delta::default();
    // (keys, value is a URL, connection is a database driver)
    let families: [(&[&str], bool, bool); 4] = [
        (&["spring.data.mongodb.uri"], true, true),
        (&["spring.data.mongodb.host"], false, true),
        (&["spring.datasource.url", "spring.r2dbc.url"], true, true),
        (&["spring.redis.host", "spring.data.redis.host"], false, false),
    ];
    for s in ctx.project.services() {
        let mut done: BTreeSet<String> = BTreeSet::new();
        for (keys, is_url, jdbc) in families {
            let Some((_, v)) = props(s, keys).into_iter().next() else { continue };
            let host = if is_url {
                url_of(ctx, &s.name, v).map(|u| u.host)
            } else {
                resolve_text(ctx, &v.value, &v.trace.file, Some(&s.name))
                    .and_then(|h| parse_url(&h).map(|u| u.host))
            };
            let Some(host) = host else {
                delta.unresolved(format!("database address `{}` of {} is unresolved", v.value, s.name), Some(v.trace.clone()));
                continue;
            };
            if done.insert(host.clone()) {
                database_link(ctx, &mut delta, &s.name, &host, jdbc, &v.trace)?;
            }
        }
    }
    Ok(delta)
}

static JDBC_LITERAL: LazyLock<Regex> = LazyLock::new(|| Regex::new(r#""(jdbc:[^"]+)""#).unwrap());

fn jdbc_literals(ctx: &ExtractorContext<'_>) -> Result<Delta, ExtractError> {
    let mut delta = Delta::default();
    for m in ctx.index.find_keyword(Keyword::Literal("\"jdbc:"), Some(&[LangClass::Java]))? {
        let Some(owner) = ctx.project.owner_of(&m.file) else { continue };
        for c in JDBC_LITERAL.captures_iter(&m.line_text) {
            let lit = c.get(1).expect("group 1");
            let Some(u) = parse_url(lit.as_str()) else { continue };
            let trace = m.trace_at(lit.start(), lit.as_str()).unwrap_or_else(|| m.trace());
            database_link(ctx, &mut delta, &owner.name, &u.host, true, &trace)?;
        }
    }
    Ok(delta)
}

fn mail(ctx: &ExtractorContext<'_>) -> Result<Delta, ExtractError> {
    let mut delta = Delta::default();
    for s in ctx.project.services() {
        let Some((_, v)) = props(s, &["spring.mail.host"]).into_iter().next() else { continue };
        if resolve_text(ctx, &v.value, &v.trace.file, Some(&s.name)).is_none() {
            continue;
        }
        let node = Node::external("mail_server")?.with_stereotype(Stereotype::MailServer);
        let name = node.canonical_name.clone();
        delta.node(node, v.trace.clone());
        delta.flow(Flow::new(&s.name, &name)?, v.trace.clone());
    }
    Ok(delta)
}

/// Services reporting to a zipkin or boot-admin server.
fn tracing_admin(ctx: &ExtractorContext<'_>) -> Result<Delta, ExtractError> {
    let mut delta = Delta::default();
    let families: [(&[&str], Stereotype); 2] = [
        (&["spring.zipkin.base-url", "spring.zipkin.baseUrl"], Stereotype::TracingServer),
        (&["spring.boot.admin.client.url", "spring.boot.admin.url"], Stereotype::AdministrationServer),
    ];
    for s in ctx.project.services() {
        for (keys, role) in families {
            let Some((_, v)) = props(s, keys).into_iter().next() else { continue };
            let Some(u) = url_of(ctx, &s.name, v) else { continue };
            match role_target(ctx, &u.host, role) {
                Some(t) => delta.flow(Flow::new(&s.name, &t)?, v.trace.clone()),
                None => delta.unresolved(format!("`{}` of {} is not deployed", u.host, s.name), Some(v.trace.clone())),
            }
        }
    }
    Ok(delta)
}

static SCRAPE_TARGET: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r#"['"]?([A-Za-z][A-Za-z0-9_.\-]*):(\d{1,5})['"]?"#).unwrap());

/// Turbine aggregation and prometheus scrape targets.
fn monitoring(ctx: &ExtractorContext<'_>) -> Result<Delta, ExtractError> {
    let mut delta = Delta::default();
    for s in ctx.project.services() {
        for (_, v) in props(s, &["turbine.appConfig"]).into_iter().take(1) {
            let Some(text) = resolve_text(ctx, &v.value, &v.trace.file, Some(&s.name)) else { continue };
            for app in text.split(',').map(str::trim).filter(|a| !a.is_empty()) {
                match target_of(ctx, app) {
                    Some(t) => delta.flow(Flow::new(&t, &s.name)?, v.trace.clone()),
                    None => delta.unresolved(format!("turbine app `{app}` is not deployed"), Some(v.trace.clone())),
                }
            }
        }
    }
    let metrics = unique_with(ctx, Stereotype::MetricsServer);
    for f in ctx.index.files() {
        let name = f.file_name();
        if !(name.starts_with("prometheus") && (name.ends_with(".yml") || name.ends_with(".yaml"))) {
            continue;
        }
        let server = ctx
            .project
            .owner_of(&f.path)
            .map(|o| o.name.clone())
            .or_else(|| metrics.clone());
        let Some(server) = server else {
            delta.unresolved(format!("{}: no metrics server to attach scrape targets to", f.path), None);
            continue;
        };
        let mut in_targets = false;
        for (i, line) in f.lines.iter().enumerate() {
            let t = line.trim_start();
            if t.starts_with('#') {
                continue;
            }
            if t.contains("targets:") {
                in_targets = true;
            } else if !t.starts_with('-') {
                in_targets = false;
            }
            if !in_targets {
                continue;
            }
            for c in SCRAPE_TARGET.captures_iter(line) {
                let host = c.get(1).expect("group 1");
                let Some(trace) = TraceEntry::at(&f.path, i + 1, line, host.start(), host.as_str()) else { continue };
                match target_of(ctx, host.as_str()) {
                    Some(t) => delta.flow(Flow::new(&t, &server)?, trace),
                    None if !is_local_host(host.as_str()) => {
                        delta.unresolved(format!("scrape target `{}` is not deployed", host.as_str()), Some(trace))
                    }
                    None => {}
                }
            }
        }
    }
    Ok(delta)
}

static DESTINATION: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"<destination>\s*([^<\s]+)\s*</destination>").unwrap());

/// Log shipping configured in logback files.
fn logging(ctx: &ExtractorContext<'_>) -> Result<Delta, ExtractError> {
    let mut delta = Delta::default();
    for f in ctx.index.files() {
        let name = f.file_name();
        if !(name.starts_with("logback") && name.ends_with(".xml")) {
            continue;
        }
        let Some(owner) = ctx.project.owner_of(&f.path) else { continue };
        for (i, line) in f.lines.iter().enumerate() {
            let Some(c) = DESTINATION.captures(line) else { continue };
            let dest = c.get(1).expect("group 1");
            let Some(trace) = TraceEntry::at(&f.path, i + 1, line, dest.start(), dest.as_str()) else { continue };
            let Some(text) = resolve_text(ctx, dest.as_str(), &f.path, Some(&owner.name)) else { continue };
            let Some(u) = parse_url(&text) else { continue };
            match role_target(ctx, &u.host, Stereotype::LoggingServer) {
                Some(t) => delta.flow(Flow::new(&owner.name, &t)?, trace),
                None => {
                    let node = Node::external("logging_server")?.with_stereotype(Stereotype::LoggingServer);
                    let n = node.canonical_name.clone();
                    delta.node(node, trace.clone());
                    delta.flow(Flow::new(&owner.name, &n)?, trace);
                }
            }
        }
    }
    Ok(delta)
}

/// OAuth clients and resource servers validating tokens with an
/// authorization server.
fn auth_provider(ctx: &ExtractorContext<'_>) -> Result<Delta, ExtractError> {
    let mut delta = Delta::default();
    const KEYS: &[&str] = &[
        "security.oauth2.client.accessTokenUri",
        "security.oauth2.resource.userInfoUri",
        "security.oauth2.resource.tokenInfoUri",
        "security.oauth2.resource.jwt.keyUri",
        "spring.security.oauth2.resourceserver.jwt.issuer-uri",
        "spring.security.oauth2.resourceserver.jwt.jwk-set-uri",
    ];
    for s in ctx.project.services() {
        let mut done = BTreeSet::new();
        for (_, v) in props(s, KEYS) {
            let Some(u) = url_of(ctx, &s.name, v) else { continue };
            let target = role_target(ctx, &u.host, Stereotype::AuthorizationServer);
            match target {
                Some(t) if t != s.name => {
                    if done.insert(t.clone()) {
                        delta.flow(Flow::new(&t, &s.name)?.with_stereotype(Stereotype::AuthProvider), v.trace.clone());
                    }
                }
                Some(_) => {}
                None => delta.unresolved(format!("authorization server `{}` of {} is not deployed", u.host, s.name), Some(v.trace.clone())),
            }
        }
    }
    Ok(delta)
}

fn ssl(ctx: &ExtractorContext<'_>) -> Result<Delta, ExtractError> {
    let mut delta = Delta::default();
    for f in ctx.features.of_kind(FeatureKind::SslEnabled) {
        if ctx.dfd.node(&f.owner).is_none() {
            continue;
        }
        delta.stereotype(Target::Node(f.owner.clone()), Stereotype::SslEnabled, f.trace.clone());
        for flow in ctx.dfd.outgoing(&f.owner).chain(ctx.dfd.incoming(&f.owner)) {
            delta.tag(Target::Flow(flow.sender.clone(), flow.receiver.clone()), "Protocol", "HTTPS", f.trace.clone());
        }
    }
    Ok(delta)
}

/// Flows between `a` and `b` in either direction.
fn flows_between(ctx: &ExtractorContext<'_>, a: &str, b: &str) -> Vec<Target> {
    [(a, b), (b, a)]
        .into_iter()
        .filter(|(s, r)| ctx.dfd.flow(s, r).is_some())
        .map(|(s, r)| Target::Flow(s.to_string(), r.to_string()))
        .collect()
}

fn credentials(ctx: &ExtractorContext<'_>) -> Result<Delta, ExtractError> {
    let mut delta = Delta::default();
    let rules = &ctx.options.rules;
    for f in ctx.features.of_kind(FeatureKind::CredentialsFound) {
        let (Some(key), Some(kind), Some(value)) = (f.get("key"), f.get("kind"), f.get("value")) else { continue };
        let Some(rule) = rules.credential_rule(key) else { continue };
        let node_target = rule
            .node
            .as_deref()
            .and_then(canonical)
            .filter(|n| ctx.dfd.node(n).is_some());
        let holder = node_target.clone().unwrap_or_else(|| f.owner.clone());
        if ctx.dfd.node(&holder).is_none() {
            continue;
        }
        let target = Target::Node(holder.clone());
        delta.stereotype(target.clone(), Stereotype::PlaintextCredentials, f.trace.clone());
        delta.tag(target, kind, value, f.trace.clone());
        if rule.link_stereotypes.is_empty() {
            continue;
        }
        let peer = match (&node_target, &rule.link_property) {
            (Some(n), _) => Some(n.clone()),
            (None, Some(prop)) => ctx.project.service(&f.owner).and_then(|s| {
                let (_, v) = props(s, &[prop.as_str()]).into_iter().next()?;
                let text = resolve_text(ctx, &v.value, &v.trace.file, Some(&s.name))?;
                let host = parse_url(text.split(',').next()?)?.host;
                target_of(ctx, &host)
            }),
            (None, None) => None,
        };
        let Some(peer) = peer else { continue };
        for flow in flows_between(ctx, &f.owner, &peer) {
            for st in &rule.link_stereotypes {
                delta.stereotype(flow.clone(), *st, f.trace.clone());
            }
        }
    }
    // user:password@host in connection URLs
    for s in ctx.project.services() {
        if ctx.dfd.node(&s.name).is_none() {
            continue;
        }
        for (_, v) in s.properties.iter() {
            if !v.value.contains('@') || !v.value.contains("://") {
                continue;
            }
            let Some(u) = url_of(ctx, &s.name, v) else { continue };
            let Some(pw) = u.password.as_deref().filter(|p| !rules.is_placeholder(p)) else { continue };
            let target = Target::Node(s.name.clone());
            delta.stereotype(target.clone(), Stereotype::PlaintextCredentials, v.trace.clone());
            if let Some(user) = u.user.as_deref() {
                delta.tag(target.clone(), "username", user, v.trace.clone());
            }
            delta.tag(target, "password", pw, v.trace.clone());
            if let Some(peer) = target_of(ctx, &u.host) {
                for flow in flows_between(ctx, &s.name, &peer) {
                    delta.stereotype(flow, Stereotype::PlaintextAuthentication, v.trace.clone());
                }
            }
        }
    }
    Ok(delta)
}

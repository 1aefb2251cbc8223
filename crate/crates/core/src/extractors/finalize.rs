//! Whole-diagram passes that run once the other evidence is in.

use super::{Delta, Extractor, ExtractorContext, FnExtractor, Phase, RunFn};
use crate::error::ExtractError;
use crate::model::{Flow, Node, NodeType, Stereotype, Target, TraceEntry};

pub(crate) fn extractors() -> Vec<Box<dyn Extractor>> {
    use Stereotype as S;
    let table: [(&'static str, Phase, &'static [Stereotype], RunFn); 3] = [
        ("implicit_user", Phase::Flow, &[S::User, S::Entrypoint, S::Exitpoint], implicit_user),
        ("entry_exit", Phase::Finalize, &[S::Entrypoint, S::Exitpoint], entry_exit),
        ("classify_services", Phase::Finalize, &[S::Internal, S::Infrastructural], classify_services),
    ];
    table
        .into_iter()
        .map(|(name, phase, emits, run)| Box::new(FnExtractor { name, phase, emits, run }) as Box<dyn Extractor>)
        .collect()
}

/// Primary trace of a diagram item.
fn primary(ctx: &ExtractorContext<'_>, item_id: &str) -> Option<TraceEntry> {
    ctx.dfd.trace().get(item_id).and_then(|r| r.primary()).cloned()
}

/// Gateways and web applications are reached by a user.
fn implicit_user(ctx: &ExtractorContext<'_>) -> Result<Delta, ExtractError> {
    let mut delta = Delta::default();
    let fronts = ctx
        .dfd
        .nodes()
        .filter(|n| n.node_type == NodeType::Service)
        .filter(|n| n.has(Stereotype::Gateway) || n.has(Stereotype::WebApplication));
    for n in fronts {
        let record = ctx.dfd.trace().get(&n.canonical_name);
        let trace = record
            .and_then(|r| {
                r.sub_items
                    .get(Stereotype::Gateway.as_str())
                    .or_else(|| r.sub_items.get(Stereotype::WebApplication.as_str()))
                    .and_then(|s| s.first())
            })
            .cloned()
            .or_else(|| primary(ctx, &n.canonical_name));
        let Some(trace) = trace else { continue };
        let user = Node::external("user")?.with_stereotypes([Stereotype::User, Stereotype::Entrypoint, Stereotype::Exitpoint]);
        let u = user.canonical_name.clone();
        delta.node(user, trace.clone());
        delta.flow(Flow::new(&u, &n.canonical_name)?, trace.clone());
        delta.flow(Flow::new(&n.canonical_name, &u)?, trace);
    }
    Ok(delta)
}

/// External entities sending into the system are entry points; those
/// receiving from it are exit points.
fn entry_exit(ctx: &ExtractorContext<'_>) -> Result<Delta, ExtractError> {
    let mut delta = Delta::default();
    for n in ctx.dfd.nodes().filter(|n| n.node_type == NodeType::ExternalEntity) {
        let name = &n.canonical_name;
        if let Some(f) = ctx.dfd.outgoing(name).next() {
            if let Some(t) = primary(ctx, &crate::model::flow_item_id(&f.sender, &f.receiver)) {
                delta.stereotype(Target::Node(name.clone()), Stereotype::Entrypoint, t);
            }
        }
        if let Some(f) = ctx.dfd.incoming(name).next() {
            if let Some(t) = primary(ctx, &crate::model::flow_item_id(&f.sender, &f.receiver)) {
                delta.stereotype(Target::Node(name.clone()), Stereotype::Exitpoint, t);
            }
        }
    }
    Ok(delta)
}

/// Services carrying a supporting-component stereotype are infrastructural;
/// other services with their own code are internal. The rest stay
/// unclassified and show up in the report.
fn classify_services(ctx: &ExtractorContext<'_>) -> Result<Delta, ExtractError> {
    let mut delta = Delta::default();
    for n in ctx.dfd.nodes().filter(|n| n.node_type == NodeType::Service) {
        if n.has(Stereotype::Internal) || n.has(Stereotype::Infrastructural) {
            continue;
        }
        let record = ctx.dfd.trace().get(&n.canonical_name);
        let family = n.stereotypes.iter().copied().find(|s| s.is_infrastructural_family());
        let has_code = ctx.project.service(&n.canonical_name).is_some_and(|s| s.has_code);
        let (s, trace) = match family {
            Some(f) => (
                Stereotype::Infrastructural,
                record.and_then(|r| r.sub_items.get(f.as_str())).and_then(|s| s.first()).cloned(),
            ),
            // without code of its own there is nothing to call internal
            None if has_code => (Stereotype::Internal, None),
            None => continue,
        };
        let Some(trace) = trace.or_else(|| primary(ctx, &n.canonical_name)) else { continue };
        delta.stereotype(Target::Node(n.canonical_name.clone()), s, trace);
    }
    Ok(delta)
}

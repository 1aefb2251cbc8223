use std::panic::{catch_unwind, AssertUnwindSafe};

use serde::Serialize;

use super::{Artifact, Delta, Extractor, ExtractorContext, FeatureStore, Op, Phase, PipelineOptions, Project};
use crate::error::{AnalysisError, ExtractError, ModelError};
use crate::exec;
use crate::model::{Dfd, NodeType, Stereotype};
use crate::search::FileIndex;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct UnresolvedEvidence {
    pub extractor: String,
    pub message: String,
    /// `file:line (start:end)` of the evidence, when there is one.
    pub location: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExtractorReport {
    pub name: String,
    pub phase: Phase,
    /// Operations that changed or confirmed the diagram.
    pub applied: usize,
    pub rejected: usize,
    pub features: usize,
    pub failed: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct PipelineReport {
    pub extractors: Vec<ExtractorReport>,
    pub unresolved: Vec<UnresolvedEvidence>,
    /// Operations refused by the model, other than self-flows.
    pub rejected: Vec<String>,
    pub self_flows_suppressed: usize,
    /// Nodes that exist only because a flow referenced them.
    pub auto_created: Vec<String>,
    /// Service nodes that are neither internal nor infrastructural.
    pub unclassified: Vec<String>,
    pub parse_errors: Vec<String>,
    pub warnings: Vec<String>,
}

const LAYOUT: &str = "project_layout";

fn panic_message(p: Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = p.downcast_ref::<&str>() {
        s.to_string()
    } else if let Some(s) = p.downcast_ref::<String>() {
        s.clone()
    } else {
        "panic".to_string()
    }
}

fn apply(dfd: &mut Dfd, op: &Op) -> Result<(), ModelError> {
    match op {
        Op::UpsertNode(n, t) => dfd.upsert_node(n.clone(), t.clone()),
        Op::UpsertFlow(f, t) => dfd.upsert_flow(f.clone(), t.clone()),
        Op::Annotate(target, a, t) => dfd.annotate(target, a.clone(), t.clone()),
        Op::Evidence(target, key, t) => dfd.attach_evidence(target, key, t.clone()),
    }
}

fn describe(op: &Op) -> String {
    match op {
        Op::UpsertNode(n, t) => format!("node {} at {t}", n.canonical_name),
        Op::UpsertFlow(f, t) => format!("flow {} -> {} at {t}", f.sender, f.receiver),
        Op::Annotate(target, a, t) => format!("{a:?} on {} at {t}", target.item_id()),
        Op::Evidence(target, k, t) => format!("evidence {k} on {} at {t}", target.item_id()),
    }
}

/// Runs every phase of `registry` over `index`.
///
/// Extractors of one phase run concurrently against the diagram as it stood
/// at the end of the previous phase. Their operations are then sorted and
/// applied in that canonical order, so the outcome does not depend on the
/// registry order within a phase. A failing or panicking extractor is
/// reported and skipped.
pub fn run_pipeline(
    index: &FileIndex,
    registry: &[Box<dyn Extractor>],
    options: &PipelineOptions,
) -> Result<(Dfd, PipelineReport), AnalysisError> {
    if registry.is_empty() {
        return Err(AnalysisError::EmptyRegistry);
    }
    let mut dfd = Dfd::new();
    dfd.set_allow_self_flows(options.paper_parity);
    let mut features = FeatureStore::default();
    let mut project = Project::default();
    let mut report = PipelineReport::default();

    for phase in Phase::ALL {
        let members: Vec<&dyn Extractor> = registry
            .iter()
            .filter(|e| e.phase() == phase)
            .map(|e| e.as_ref())
            .collect();
        let results: Vec<Result<Result<Delta, ExtractError>, String>> = {
            let ctx = ExtractorContext {
                index,
                dfd: &dfd,
                project: &project,
                features: &features,
                options,
            };
            exec::map(&members, options.parallelism, |e| {
                catch_unwind(AssertUnwindSafe(|| e.run(&ctx))).map_err(panic_message)
            })
        };

        let mut tagged: Vec<(Op, usize)> = Vec::new();
        let mut artifacts: Vec<Artifact> = Vec::new();
        let mut new_features = Vec::new();
        let mut reports: Vec<ExtractorReport> = Vec::new();
        let mut deltas: Vec<(String, Delta)> = Vec::new();
        for (e, res) in members.iter().zip(results) {
            let mut r = ExtractorReport {
                name: e.name().to_string(),
                phase,
                applied: 0,
                rejected: 0,
                features: 0,
                failed: None,
            };
            match res {
                Ok(Ok(delta)) => deltas.push((e.name().to_string(), delta)),
                Ok(Err(err)) => {
                    log::warn!("extractor {} failed: {err}", e.name());
                    r.failed = Some(err.to_string());
                }
                Err(msg) => {
                    log::warn!("extractor {} panicked: {msg}", e.name());
                    r.failed = Some(format!("panic: {msg}"));
                }
            }
            reports.push(r);
        }
        for (name, delta) in deltas {
            let slot = reports.iter().position(|r| r.name == name && r.failed.is_none()).unwrap_or(0);
            reports[slot].features += delta.features.len();
            tagged.extend(delta.ops.into_iter().map(|op| (op, slot)));
            artifacts.extend(delta.artifacts);
            new_features.extend(delta.features);
            report.parse_errors.extend(delta.parse_errors.iter().map(|e| e.to_string()));
            report.unresolved.extend(delta.unresolved.into_iter().map(|(message, t)| UnresolvedEvidence {
                extractor: name.clone(),
                message,
                location: t.map(|t| t.to_string()),
            }));
        }

        if phase == Phase::Parse {
            project = Project::build(index, &artifacts, &options.images, &options.rules);
            report.warnings.extend(project.warnings.iter().cloned());
            let layout = project.layout_delta();
            reports.push(ExtractorReport {
                name: LAYOUT.to_string(),
                phase,
                applied: 0,
                rejected: 0,
                features: layout.features.len(),
                failed: None,
            });
            let slot = reports.len() - 1;
            tagged.extend(layout.ops.into_iter().map(|op| (op, slot)));
            new_features.extend(layout.features);
        }

        tagged.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| reports[a.1].name.cmp(&reports[b.1].name)));
        for (op, slot) in &tagged {
            match apply(&mut dfd, op) {
                Ok(()) => reports[*slot].applied += 1,
                Err(ModelError::SelfFlow(_)) => {
                    reports[*slot].rejected += 1;
                    report.self_flows_suppressed += 1;
                }
                Err(e) => {
                    reports[*slot].rejected += 1;
                    report.rejected.push(format!("{}: {}: {e}", reports[*slot].name, describe(op)));
                }
            }
        }
        for f in new_features {
            features.insert(f);
        }
        report.extractors.extend(reports);
    }

    report.auto_created = dfd
        .nodes()
        .filter(|n| n.is_auto_created())
        .map(|n| n.canonical_name.clone())
        .collect();
    report.unclassified = dfd
        .nodes()
        .filter(|n| n.node_type == NodeType::Service)
        .filter(|n| !n.has(Stereotype::Internal) && !n.has(Stereotype::Infrastructural))
        .map(|n| n.canonical_name.clone())
        .collect();
    report.warnings.extend(dfd.check_invariants());
    report.extractors.sort_by(|a, b| (a.phase, &a.name).cmp(&(b.phase, &b.name)));
    report.unresolved.sort();
    report.unresolved.dedup();
    report.rejected.sort();
    report.rejected.dedup();
    report.parse_errors.sort();
    report.warnings.sort();
    report.warnings.dedup();
    Ok((dfd, report))
}

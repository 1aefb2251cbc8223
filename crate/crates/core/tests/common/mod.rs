//! Shared by the golden test and the acceptance gate.
#![allow(dead_code)]

pub mod tables;

use std::path::PathBuf;

use dfdtrace_core::analysis::{analyze_directory, Analysis, AnalysisOptions};
use dfdtrace_core::output::{document_from_json, DfdDocument};
use serde_json::{json, Value};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn analyze(name: &str) -> Analysis {
    analyze_directory(&fixture(name), &AnalysisOptions::default()).expect("fixture analyzes")
}

/// Everything about the golden fixture that differs from the expected
/// diagram, the node record, the traceability excerpt and the DOT edge.
pub fn golden_mismatches(a: &Analysis) -> Vec<String> {
    let mut out = Vec::new();
    let expected = document_from_json(&std::fs::read(fixture("golden.expected.json")).unwrap()).unwrap();
    let actual = DfdDocument::from_dfd(&a.dfd);
    for n in &expected.nodes {
        match actual.nodes.iter().find(|m| m.name == n.name) {
            Some(m) if m == n => {}
            Some(m) => out.push(format!("node {} differs: {m:?}", n.name)),
            None => out.push(format!("node {} missing", n.name)),
        }
    }
    for m in actual.nodes.iter().filter(|m| !expected.nodes.iter().any(|n| n.name == m.name)) {
        out.push(format!("unexpected node {}", m.name));
    }
    for f in &expected.flows {
        match actual.flows.iter().find(|g| g.sender == f.sender && g.receiver == f.receiver) {
            Some(g) if g == f => {}
            Some(g) => out.push(format!("flow {} -> {} differs: {g:?}", f.sender, f.receiver)),
            None => out.push(format!("flow {} -> {} missing", f.sender, f.receiver)),
        }
    }
    for g in actual.flows.iter().filter(|g| !expected.flows.iter().any(|f| f.sender == g.sender && f.receiver == g.receiver)) {
        out.push(format!("unexpected flow {} -> {}", g.sender, g.receiver));
    }

    let doc: Value = serde_json::from_slice(&a.json()).unwrap();
    let record = doc["nodes"].as_array().unwrap().iter().find(|n| n["name"] == "notification_service").cloned();
    let listing = json!({
        "name": "notification_service",
        "stereotypes": ["internal", "local_logging", "resource_server"],
        "tagged_values": {"Port": 8000}
    });
    match record {
        Some(mut r) => {
            r.as_object_mut().unwrap().remove("type");
            if r != listing {
                out.push(format!("node record differs: {r}"));
            }
        }
        None => out.push("node record missing".into()),
    }

    let trace: Value = serde_json::from_slice(&a.trace_json()).unwrap();
    let item = &trace["notification_service"];
    let port = &item["sub_items"]["Port"];
    let excerpt = (&item["line"], &item["span"], &port["line"], &port["span"]);
    if excerpt != (&json!(3), &json!("(10:30)"), &json!(13), &json!("(8:12)")) {
        out.push(format!("trace excerpt differs: {excerpt:?}"));
    }
    if !a.dot().contains("\"config\" -> \"notification_service\"") {
        out.push("DOT lacks config -> notification_service".into());
    }
    let r = &a.report;
    if !(r.unresolved.is_empty() && r.rejected.is_empty() && r.parse_errors.is_empty() && r.unclassified.is_empty()) {
        out.push(format!("report not clean: {r:?}"));
    }
    out
}

mod common;

use common::tables::{members, raw_counts, table_mismatches};
use common::{analyze, fixture};
use dfdtrace_core::eval::{compare, compute_metrics, match_items, Counts, EvalCounts};
use dfdtrace_core::output::{document_from_json, DfdDocument, FlowRecord, NodeRecord};
use dfdtrace_core::model::NodeType;
use proptest::prelude::*;

#[test]
fn every_table_cell_is_reproduced() {
    let (checked, bad) = table_mismatches();
    assert_eq!(bad, Vec::<String>::new());
    // 20 rows of 12 computable cells, less app 12's two blank cells
    assert_eq!(checked, 238);
}

#[test]
fn sum_rows_add_up() {
    let rows = raw_counts();
    for r in &rows {
        assert_eq!(r.counts.overall(), r.overall, "{}", r.app);
        let Some(range) = members(&r.app) else { continue };
        let sum = rows
            .iter()
            .filter(|a| a.app.parse::<u32>().is_ok_and(|n| range.contains(&n)))
            .fold(EvalCounts::default(), |acc, a| acc + a.counts);
        assert_eq!(sum, r.counts, "{}", r.app);
    }
}

#[test]
fn pooled_dataset_figures() {
    let apps: Vec<EvalCounts> = raw_counts()
        .into_iter()
        .filter(|r| r.app.parse::<u32>().is_ok())
        .map(|r| r.counts)
        .collect();
    assert_eq!(apps.len(), 17);
    let m = compute_metrics(&apps).unwrap();
    assert_eq!(m.pooled_counts.overall(), Counts::new(1686, 127, 303));
    assert!((m.pooled.overall.precision.unwrap() - 0.930).abs() < 5e-4);
    assert!((m.pooled.overall.recall.unwrap() - 0.848).abs() < 5e-4);
    assert_eq!(m.pooled_counts.services, Counts::new(149, 2, 0));
    assert!((m.pooled.services.precision.unwrap() - 0.987).abs() < 5e-4);
    // app 12 has no external entities to find, so its precision stays undefined
    assert_eq!(m.per_app[11].external_entities.precision, None);
    assert_eq!(m.per_app[11].external_entities.recall, Some(0.0));
}

#[test]
fn app_seven_row() {
    let c = Counts::new(224, 0, 22);
    assert_eq!(c.precision(), Some(1.0));
    assert!((c.recall().unwrap() - 0.91).abs() <= 0.005);
}

#[test]
fn piggymetrics_fixture_against_its_truth() {
    let a = analyze("piggymetrics");
    let truth = document_from_json(&std::fs::read(fixture("piggymetrics.truth.json")).unwrap()).unwrap();
    let c = compare(&DfdDocument::from_dfd(&a.dfd), &truth).unwrap();
    assert_eq!(c.counts.services, Counts::new(14, 0, 0), "{:#?}", c);
    let overall = c.counts.overall();
    assert!(overall.precision().unwrap() >= 0.90, "{c:#?}");
    assert!(overall.recall().unwrap() >= 0.80, "{c:#?}");
}

fn name() -> impl Strategy<Value = String> {
    "[a-z]{1,3}(_[a-z]{1,2})?"
}

fn document() -> impl Strategy<Value = DfdDocument> {
    let node = (name(), 0..3usize, prop::collection::vec("[a-z_]{1,8}", 0..3), prop::collection::btree_map("[A-Za-z]{1,5}", "[a-z0-9]{0,4}", 0..2));
    prop::collection::vec(node, 1..8).prop_flat_map(|nodes| {
        let mut seen = std::collections::BTreeSet::new();
        let nodes: Vec<NodeRecord> = nodes
            .into_iter()
            .filter(|n| seen.insert(n.0.clone()))
            .map(|(name, t, stereotypes, tags)| NodeRecord {
                name,
                node_type: [NodeType::Service, NodeType::Database, NodeType::ExternalEntity][t],
                stereotypes,
                tagged_values: tags.into_iter().map(|(k, v)| (k, serde_json::Value::from(v))).collect(),
            })
            .collect();
        let n = nodes.len();
        prop::collection::btree_set((0..n, 0..n), 0..10).prop_map(move |pairs| DfdDocument {
            nodes: nodes.clone(),
            flows: pairs
                .into_iter()
                .map(|(a, b)| FlowRecord {
                    sender: nodes[a].name.clone(),
                    receiver: nodes[b].name.clone(),
                    stereotypes: vec!["restful_http".into()],
                    tagged_values: Default::default(),
                })
                .collect(),
        })
    })
}

fn truth_sizes(d: &DfdDocument) -> (u64, u64, u64) {
    let services = d.nodes.iter().filter(|n| n.node_type != NodeType::ExternalEntity).count() as u64;
    (services, d.nodes.len() as u64 - services, d.flows.len() as u64)
}

proptest! {
    #[test]
    fn self_comparison_is_perfect(d in document()) {
        let c = match_items(&d, &d).unwrap();
        for g in [c.services, c.external_entities, c.information_flows, c.annotations, c.security_annotations] {
            prop_assert_eq!(g.fp, 0);
            prop_assert_eq!(g.fn_, 0);
        }
    }

    #[test]
    fn counts_are_conserved(x in document(), t in document()) {
        let c = match_items(&x, &t).unwrap();
        let (ts, te, tf) = truth_sizes(&t);
        let (xs, xe, xf) = truth_sizes(&x);
        prop_assert_eq!(c.services.tp + c.services.fn_, ts);
        prop_assert_eq!(c.external_entities.tp + c.external_entities.fn_, te);
        prop_assert_eq!(c.information_flows.tp + c.information_flows.fn_, tf);
        prop_assert_eq!(c.services.tp + c.services.fp, xs);
        prop_assert_eq!(c.external_entities.tp + c.external_entities.fp, xe);
        prop_assert_eq!(c.information_flows.tp + c.information_flows.fp, xf);
    }

    #[test]
    fn swapping_sides_swaps_errors(x in document(), t in document()) {
        let a = match_items(&x, &t).unwrap().overall();
        let b = match_items(&t, &x).unwrap().overall();
        prop_assert_eq!((a.tp, a.fp, a.fn_), (b.tp, b.fn_, b.fp));
    }

    #[test]
    fn metrics_stay_in_range(x in document(), t in document()) {
        let m = compute_metrics(&[match_items(&x, &t).unwrap()]).unwrap();
        for s in [m.pooled.overall, m.pooled.core, m.pooled.annotations] {
            for v in [s.precision, s.recall].into_iter().flatten() {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
    }
}

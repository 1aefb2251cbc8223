mod common;

use std::collections::BTreeSet;

use common::fixture;
use dfdtrace_core::analysis::{analyze_directory, AnalysisOptions};
use dfdtrace_core::exec::Parallelism;
use dfdtrace_core::extractors::{default_registry, layout_emits, run_pipeline, PipelineOptions};
use dfdtrace_core::model::{Annotation, Dfd, Flow, Node, NodeType, Span, Stereotype, Target, TraceEntry};
use dfdtrace_core::search::{FileIndex, IndexOptions};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;

const FIXTURES: [&str; 2] = ["golden", "piggymetrics"];

fn run_shuffled(name: &str, seed: u64) -> (Vec<u8>, Vec<u8>) {
    let index = FileIndex::build(fixture(name), IndexOptions::default()).unwrap();
    let options = PipelineOptions::default();
    let mut registry = default_registry(&options);
    registry.shuffle(&mut rand::rngs::StdRng::seed_from_u64(seed));
    let (dfd, _) = run_pipeline(&index, &registry, &options).unwrap();
    (dfdtrace_core::output::dfd_to_json(&dfd), dfdtrace_core::output::trace_to_json(dfd.trace()))
}

#[test]
fn registry_order_does_not_matter() {
    for name in FIXTURES {
        let reference = run_shuffled(name, 0);
        for seed in 1..=24 {
            assert!(run_shuffled(name, seed) == reference, "{name} differs with seed {seed}");
        }
    }
}

#[test]
fn sequential_and_parallel_agree() {
    for name in FIXTURES {
        let run = |p| analyze_directory(&fixture(name), &AnalysisOptions::default().with_parallelism(p)).unwrap();
        let (s, p) = (run(Parallelism::Sequential), run(Parallelism::Parallel));
        assert_eq!(s.json(), p.json(), "{name}");
        assert_eq!(s.trace_json(), p.trace_json(), "{name}");
        assert_eq!(s.report, p.report, "{name}");
    }
}

#[test]
fn every_trace_entry_points_at_its_evidence() {
    for name in FIXTURES {
        let root = fixture(name);
        let a = common::analyze(name);
        let mut checked = 0;
        for (item, record) in a.dfd.trace().iter() {
            assert!(record.primary().is_some(), "{name}: {item} has no primary entry");
            for e in record.all_entries() {
                let text = std::fs::read_to_string(root.join(&e.file)).unwrap_or_else(|err| panic!("{}: {err}", e.file));
                let line = text.lines().nth(e.line - 1).unwrap_or_else(|| panic!("{e} past end of file"));
                assert_eq!(line.get(e.span.start..e.span.end), Some(e.evidence.as_str()), "{name}: {item} at {e}");
                checked += 1;
            }
        }
        // every node and flow is traced
        assert_eq!(
            a.dfd.nodes().count() + a.dfd.flows().count(),
            a.dfd.trace().len(),
            "{name}"
        );
        assert!(checked > 0);
    }
}

#[test]
fn every_stereotype_has_a_producer() {
    let options = PipelineOptions::default();
    let mut emitted: BTreeSet<Stereotype> = layout_emits(&options.images);
    for e in default_registry(&options) {
        emitted.extend(e.emits());
    }
    let missing: Vec<_> = Stereotype::ALL.iter().filter(|s| !emitted.contains(s)).collect();
    assert!(missing.is_empty(), "no extractor emits {missing:?}");
}

#[test]
fn emitted_stereotypes_are_declared() {
    let options = PipelineOptions::default();
    let mut declared: BTreeSet<Stereotype> = layout_emits(&options.images);
    for e in default_registry(&options) {
        declared.extend(e.emits());
    }
    for name in FIXTURES {
        let a = common::analyze(name);
        let used = a.dfd.nodes().flat_map(|n| n.stereotypes.iter()).chain(a.dfd.flows().flat_map(|f| f.stereotypes.iter()));
        for s in used {
            assert!(declared.contains(s), "{name}: {s:?} is produced but not declared");
        }
    }
}

#[derive(Debug, Clone)]
enum Step {
    Node(usize, usize, Option<usize>),
    Flow(usize, usize, Option<usize>),
    Tag(usize, usize, usize),
}

const NAMES: [&str; 4] = ["api", "store", "mail", "web"];
const NODE_STEREOTYPES: [Stereotype; 3] = [Stereotype::Internal, Stereotype::Gateway, Stereotype::LocalLogging];
const FLOW_STEREOTYPES: [Stereotype; 3] = [Stereotype::RestfulHttp, Stereotype::FeignConnection, Stereotype::Jdbc];

fn step() -> impl Strategy<Value = Step> {
    prop_oneof![
        (0..4usize, 0..3usize, prop::option::of(0..3usize)).prop_map(|(a, b, c)| Step::Node(a, b, c)),
        (0..4usize, 0..4usize, prop::option::of(0..3usize)).prop_map(|(a, b, c)| Step::Flow(a, b, c)),
        (0..4usize, 0..2usize, 0..3usize).prop_map(|(a, b, c)| Step::Tag(a, b, c)),
    ]
}

fn rank(s: &Step) -> u8 {
    match s {
        Step::Node(..) => 0,
        Step::Flow(..) => 1,
        Step::Tag(..) => 2,
    }
}

/// Applies `steps` in merge order: nodes, then flows, then annotations.
fn apply(dfd: &mut Dfd, steps: &[Step]) {
    let mut ordered: Vec<(usize, &Step)> = steps.iter().enumerate().collect();
    ordered.sort_by_key(|(i, s)| (rank(s), *i));
    for (i, s) in ordered {
        let t = TraceEntry::new(format!("f{}", i % 3), i % 5 + 1, Span::new(0, 1), "x").unwrap();
        let _ = match *s {
            Step::Node(n, ty, st) => {
                let ty = [NodeType::Service, NodeType::Database, NodeType::ExternalEntity][ty];
                let mut node = Node::new(NAMES[n], ty).unwrap();
                if let Some(st) = st {
                    node = node.with_stereotype(NODE_STEREOTYPES[st]);
                }
                dfd.upsert_node(node, t)
            }
            Step::Flow(a, b, st) => {
                let mut flow = Flow::new(NAMES[a], NAMES[b]).unwrap();
                if let Some(st) = st {
                    flow = flow.with_stereotype(FLOW_STEREOTYPES[st]);
                }
                dfd.upsert_flow(flow, t)
            }
            Step::Tag(n, k, v) => {
                dfd.annotate(&Target::node(NAMES[n]).unwrap(), Annotation::tag(["Port", "Endpoint"][k], ["80", "90", "/x"][v]), t)
            }
        };
    }
}

proptest! {
    #[test]
    fn replaying_operations_changes_nothing(steps in prop::collection::vec(step(), 0..30)) {
        let mut once = Dfd::new();
        apply(&mut once, &steps);
        let mut twice = once.clone();
        apply(&mut twice, &steps);
        prop_assert_eq!(&once, &twice);
        prop_assert!(once.check_invariants().is_empty());
    }

    #[test]
    fn json_round_trip_is_a_fixed_point(steps in prop::collection::vec(step(), 0..30)) {
        let mut d = Dfd::new();
        apply(&mut d, &steps);
        let bytes = dfdtrace_core::output::dfd_to_json(&d);
        let back = dfdtrace_core::output::dfd_from_json(&bytes).unwrap();
        prop_assert!(back.same_items(&d));
        prop_assert_eq!(dfdtrace_core::output::dfd_to_json(&back), bytes);
    }
}

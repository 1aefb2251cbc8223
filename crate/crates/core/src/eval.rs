//! Precision and recall of an extracted diagram against a ground truth.
//!
//! Items are identified by canonical name: nodes by name, flows by the
//! ordered (sender, receiver) pair, stereotypes by (owner, name) and tagged
//! values by (owner, key, trimmed value). Annotations are only compared on
//! owners present in both documents, so a missed flow is not punished a
//! second time for its stereotypes.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

use crate::error::EvalError;
use crate::model::{normalize_name, NodeType, Stereotype};
use crate::output::{tag_texts, DfdDocument};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl Counts {
    pub fn new(tp: u64, fp: u64, fn_: u64) -> Self {
        Self { tp, fp, fn_ }
    }

    /// `None` when nothing was extracted.
    pub fn precision(&self) -> Option<f64> {
        let d = self.tp + self.fp;
        (d > 0).then(|| self.tp as f64 / d as f64)
    }

    /// `None` when the truth is empty.
    pub fn recall(&self) -> Option<f64> {
        let d = self.tp + self.fn_;
        (d > 0).then(|| self.tp as f64 / d as f64)
    }

    fn of<T: Ord>(extracted: &BTreeSet<T>, truth: &BTreeSet<T>) -> Self {
        let tp = extracted.intersection(truth).count() as u64;
        Self {
            tp,
            fp: extracted.len() as u64 - tp,
            fn_: truth.len() as u64 - tp,
        }
    }
}

impl Add for Counts {
    type Output = Counts;

    fn add(self, o: Counts) -> Counts {
        Counts::new(self.tp + o.tp, self.fp + o.fp, self.fn_ + o.fn_)
    }
}

impl AddAssign for Counts {
    fn add_assign(&mut self, o: Counts) {
        *self = *self + o;
    }
}

/// Counts per item group for one application.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalCounts {
    pub services: Counts,
    pub external_entities: Counts,
    pub information_flows: Counts,
    pub annotations: Counts,
    /// The security stereotypes among the annotations.
    pub security_annotations: Counts,
}

impl EvalCounts {
    /// Services, external entities and flows.
    pub fn core(&self) -> Counts {
        self.services + self.external_entities + self.information_flows
    }

    pub fn overall(&self) -> Counts {
        self.core() + self.annotations
    }
}

impl Add for EvalCounts {
    type Output = EvalCounts;

    fn add(self, o: EvalCounts) -> EvalCounts {
        EvalCounts {
            services: self.services + o.services,
            external_entities: self.external_entities + o.external_entities,
            information_flows: self.information_flows + o.information_flows,
            annotations: self.annotations + o.annotations,
            security_annotations: self.security_annotations + o.security_annotations,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub counts: EvalCounts,
    pub false_positives: Vec<String>,
    pub false_negatives: Vec<String>,
}

#[derive(Default)]
struct Items {
    services: BTreeSet<String>,
    externals: BTreeSet<String>,
    flows: BTreeSet<String>,
    /// owner → annotation ids
    annotations: BTreeMap<String, BTreeSet<String>>,
    security: BTreeMap<String, BTreeSet<String>>,
}

fn canon(raw: &str) -> Result<String, EvalError> {
    Ok(normalize_name(raw)?)
}

fn items(doc: &DfdDocument, which: &'static str) -> Result<Items, EvalError> {
    let mut out = Items::default();
    let mut names = BTreeSet::new();
    let duplicate = |kind, id: &str| EvalError::Duplicate {
        kind,
        id: id.to_string(),
        document: which,
    };
    let annotate = |out: &mut Items, owner: &str, stereotypes: &[String], tags: &BTreeMap<String, serde_json::Value>| {
        let set = out.annotations.entry(owner.to_string()).or_default();
        let sec = out.security.entry(owner.to_string()).or_default();
        for s in stereotypes.iter().map(|s| s.trim()).filter(|s| !s.is_empty()) {
            set.insert(format!("{owner} «{s}»"));
            if s.parse::<Stereotype>().is_ok_and(|s| s.is_security()) {
                sec.insert(format!("{owner} «{s}»"));
            }
        }
        for (k, v) in tags {
            for t in tag_texts(v) {
                set.insert(format!("{owner} {} = {}", k.trim(), t.trim()));
            }
        }
    };
    for n in &doc.nodes {
        let name = canon(&n.name)?;
        if !names.insert(name.clone()) {
            return Err(duplicate("node", &name));
        }
        match n.node_type {
            NodeType::Service | NodeType::Database => out.services.insert(name.clone()),
            NodeType::ExternalEntity => out.externals.insert(name.clone()),
        };
        annotate(&mut out, &name, &n.stereotypes, &n.tagged_values);
    }
    for f in &doc.flows {
        let id = format!("{} -> {}", canon(&f.sender)?, canon(&f.receiver)?);
        if !out.flows.insert(id.clone()) {
            return Err(duplicate("flow", &id));
        }
        annotate(&mut out, &id, &f.stereotypes, &f.tagged_values);
    }
    Ok(out)
}

fn misses<T: Ord + Clone>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> impl Iterator<Item = T> {
    a.difference(b).cloned().collect::<Vec<_>>().into_iter()
}

/// Compares `extracted` with `truth`, listing every mismatch.
pub fn compare(extracted: &DfdDocument, truth: &DfdDocument) -> Result<Comparison, EvalError> {
    let x = items(extracted, "extracted")?;
    let t = items(truth, "truth")?;
    let mut counts = EvalCounts {
        services: Counts::of(&x.services, &t.services),
        external_entities: Counts::of(&x.externals, &t.externals),
        information_flows: Counts::of(&x.flows, &t.flows),
        ..EvalCounts::default()
    };
    let mut fps: Vec<String> = Vec::new();
    let mut fns: Vec<String> = Vec::new();
    for (a, b, label) in [
        (&x.services, &t.services, "service"),
        (&x.externals, &t.externals, "external entity"),
        (&x.flows, &t.flows, "flow"),
    ] {
        fps.extend(misses(a, b).map(|i| format!("{label} {i}")));
        fns.extend(misses(b, a).map(|i| format!("{label} {i}")));
    }
    let empty = BTreeSet::new();
    for (owner, xa) in &x.annotations {
        let Some(ta) = t.annotations.get(owner) else { continue };
        counts.annotations += Counts::of(xa, ta);
        counts.security_annotations += Counts::of(x.security.get(owner).unwrap_or(&empty), t.security.get(owner).unwrap_or(&empty));
        fps.extend(misses(xa, ta).map(|i| format!("annotation {i}")));
        fns.extend(misses(ta, xa).map(|i| format!("annotation {i}")));
    }
    fps.sort();
    fns.sort();
    Ok(Comparison {
        counts,
        false_positives: fps,
        false_negatives: fns,
    })
}

pub fn match_items(extracted: &DfdDocument, truth: &DfdDocument) -> Result<EvalCounts, EvalError> {
    Ok(compare(extracted, truth)?.counts)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Score {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
}

impl Score {
    fn of(c: Counts) -> Self {
        Self {
            precision: c.precision(),
            recall: c.recall(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Scores {
    pub services: Score,
    pub external_entities: Score,
    pub information_flows: Score,
    pub annotations: Score,
    pub overall: Score,
    pub core: Score,
    pub security_annotations: Score,
}

impl Scores {
    pub fn of(c: &EvalCounts) -> Self {
        Self {
            services: Score::of(c.services),
            external_entities: Score::of(c.external_entities),
            information_flows: Score::of(c.information_flows),
            annotations: Score::of(c.annotations),
            overall: Score::of(c.overall()),
            core: Score::of(c.core()),
            security_annotations: Score::of(c.security_annotations),
        }
    }

    fn cells(&self) -> [Score; 7] {
        [
            self.services,
            self.external_entities,
            self.information_flows,
            self.annotations,
            self.overall,
            self.core,
            self.security_annotations,
        ]
    }

    fn from_cells(c: [Score; 7]) -> Self {
        let [services, external_entities, information_flows, annotations, overall, core, security_annotations] = c;
        Self {
            services,
            external_entities,
            information_flows,
            annotations,
            overall,
            core,
            security_annotations,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    pub per_app: Vec<Scores>,
    /// Micro-average: scores of the summed counts.
    pub pooled: Scores,
    pub pooled_counts: EvalCounts,
    /// Unweighted mean of the defined per-application values.
    pub per_app_mean: Scores,
}

fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let defined: Vec<f64> = values.flatten().collect();
    (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64)
}

pub fn compute_metrics(counts: &[EvalCounts]) -> Result<Metrics, EvalError> {
    if counts.is_empty() {
        return Err(EvalError::Empty);
    }
    let per_app: Vec<Scores> = counts.iter().map(Scores::of).collect();
    let pooled_counts = counts.iter().copied().fold(EvalCounts::default(), |a, b| a + b);
    let per_app_mean = Scores::from_cells(std::array::from_fn(|i| Score {
        precision: mean(per_app.iter().map(|s| s.cells()[i].precision)),
        recall: mean(per_app.iter().map(|s| s.cells()[i].recall)),
    }));
    Ok(Metrics {
        pooled: Scores::of(&pooled_counts),
        per_app,
        pooled_counts,
        per_app_mean,
    })
}

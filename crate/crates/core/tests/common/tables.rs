//! The published raw counts and precision/recall tables.

use dfdtrace_core::eval::{Counts, EvalCounts};

use super::fixture;

pub struct CountRow {
    pub app: String,
    pub counts: EvalCounts,
    pub overall: Counts,
}

/// Expected cells in column order; `None` where the table is blank.
pub struct ScoreRow {
    pub app: String,
    pub cells: Vec<(String, Option<f64>)>,
}

pub fn raw_counts() -> Vec<CountRow> {
    let mut r = csv::Reader::from_path(fixture("tables/raw_counts.csv")).unwrap();
    r.records()
        .map(|rec| {
            let rec = rec.unwrap();
            let n: Vec<u64> = rec.iter().skip(1).map(|c| c.parse().unwrap()).collect();
            let c = |i: usize| Counts::new(n[i], n[i + 1], n[i + 2]);
            CountRow {
                app: rec[0].to_string(),
                counts: EvalCounts {
                    services: c(0),
                    external_entities: c(3),
                    information_flows: c(6),
                    annotations: c(9),
                    security_annotations: Counts::default(),
                },
                overall: c(12),
            }
        })
        .collect()
}

pub fn precision_recall() -> Vec<ScoreRow> {
    let mut r = csv::Reader::from_path(fixture("tables/precision_recall.csv")).unwrap();
    let headers: Vec<String> = r.headers().unwrap().iter().map(String::from).collect();
    r.records()
        .map(|rec| {
            let rec = rec.unwrap();
            ScoreRow {
                app: rec[0].to_string(),
                cells: headers
                    .iter()
                    .zip(rec.iter())
                    .skip(1)
                    .map(|(h, c)| (h.clone(), (!c.is_empty()).then(|| c.parse().unwrap())))
                    .collect(),
            }
        })
        .collect()
}

/// Aggregate rows name the applications they pool.
pub fn members(label: &str) -> Option<std::ops::RangeInclusive<u32>> {
    let span = label.strip_prefix("sum_").or_else(|| label.strip_prefix("avg_"))?;
    if span == "all" {
        return Some(1..=17);
    }
    let (a, b) = span.split_once('-')?;
    Some(a.parse().ok()?..=b.parse().ok()?)
}

/// Allowed distance from a two-decimal cell, inclusive.
pub const TOLERANCE: f64 = 0.005;

/// Recomputes every precision/recall cell from the raw counts. Returns the
/// number of cells checked and a line per cell off by more than the
/// tolerance. The security columns have no raw counts and are skipped.
pub fn table_mismatches() -> (usize, Vec<String>) {
    use dfdtrace_core::eval::{compute_metrics, Score, Scores};
    let counts = raw_counts();
    let app_counts = |range: std::ops::RangeInclusive<u32>| -> Vec<EvalCounts> {
        counts
            .iter()
            .filter(|r| r.app.parse::<u32>().is_ok_and(|a| range.contains(&a)))
            .map(|r| r.counts)
            .collect()
    };
    let mut checked = 0;
    let mut bad = Vec::new();
    for row in precision_recall() {
        let scores: Scores = match members(&row.app) {
            Some(range) => compute_metrics(&app_counts(range)).unwrap().pooled,
            None => {
                let a: u32 = row.app.parse().unwrap();
                compute_metrics(&app_counts(a..=a)).unwrap().pooled
            }
        };
        for (column, expected) in &row.cells {
            let (group, which) = column.rsplit_once('_').unwrap();
            let score: Score = match group {
                "s" => scores.services,
                "e" => scores.external_entities,
                "i" => scores.information_flows,
                "a" => scores.annotations,
                "overall" => scores.overall,
                "core" => scores.core,
                "security" => continue,
                other => panic!("unknown column {other}"),
            };
            let got = if which == "p" { score.precision } else { score.recall };
            let Some(expected) = expected else { continue };
            checked += 1;
            match got {
                Some(v) if (v - expected).abs() <= TOLERANCE + 1e-9 => {}
                _ => bad.push(format!("{} {column}: expected {expected}, computed {got:?}", row.app)),
            }
        }
    }
    (checked, bad)
}

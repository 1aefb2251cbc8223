//! One analysis: ingest, extract, optionally evaluate, then write.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{Context, Result};
use dfdtrace_core::analysis::{analyze_directory, Analysis, AnalysisOptions};
use dfdtrace_core::eval::{compare, Comparison, Scores};
use dfdtrace_core::extractors::RuleSet;
use dfdtrace_core::output::{document_from_json, render_png, DfdDocument, RenderOutcome};
use dfdtrace_core::parsers::ImageCatalog;
use serde::Serialize;

use crate::ingest::{self, app_name};
use crate::request::{AnalysisRequest, Format};

pub struct Outcome {
    pub app: String,
    pub commit: Option<String>,
    pub analysis: Analysis,
    pub comparison: Option<Comparison>,
}

#[derive(Debug, Serialize)]
pub struct MetricsReport<'a> {
    pub app: &'a str,
    #[serde(flatten)]
    pub comparison: &'a Comparison,
    pub scores: Scores,
}

impl Outcome {
    pub fn metrics(&self) -> Option<MetricsReport<'_>> {
        self.comparison.as_ref().map(|c| MetricsReport {
            app: &self.app,
            comparison: c,
            scores: Scores::of(&c.counts),
        })
    }
}

#[derive(Debug, Serialize)]
pub struct Summary {
    pub app: String,
    pub commit: Option<String>,
    pub nodes: usize,
    pub flows: usize,
    pub files_indexed: usize,
    pub extraction_seconds: f64,
    pub unresolved: usize,
    pub written: Vec<PathBuf>,
    pub notes: Vec<String>,
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

/// Shipped catalogs with any override files layered on top.
pub fn options(request: &AnalysisRequest) -> Result<AnalysisOptions> {
    let mut rules = RuleSet::default();
    for p in &request.rules {
        rules = rules.with_overrides(RuleSet::from_toml(&read(p)?).with_context(|| p.display().to_string())?);
    }
    let mut images = ImageCatalog::default();
    for p in &request.images {
        images = images.with_overrides(ImageCatalog::from_toml(&read(p)?).with_context(|| p.display().to_string())?);
    }
    let mut options = AnalysisOptions::default().with_paper_parity(request.paper_parity);
    options.pipeline.rules = Arc::new(rules);
    options.pipeline.images = images;
    Ok(options)
}

pub fn load_truth(path: &Path) -> Result<DfdDocument> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    document_from_json(&bytes).with_context(|| format!("parsing {}", path.display()))
}

/// Runs the analysis without writing anything.
pub fn execute(request: &AnalysisRequest) -> Result<Outcome> {
    request.validate()?;
    let options = options(request)?;
    let truth = request.eval_truth.as_deref().map(load_truth).transpose()?;
    let checkout = ingest::open(&request.source, request.git_ref.as_deref())?;
    let analysis = analyze_directory(&checkout.root, &options)?;
    let comparison = truth
        .map(|t| compare(&DfdDocument::from_dfd(&analysis.dfd), &t))
        .transpose()?;
    Ok(Outcome {
        app: app_name(&request.source),
        commit: checkout.commit.clone(),
        analysis,
        comparison,
    })
}

/// Writes the requested documents to `out` and summarizes the run.
pub fn write(outcome: &Outcome, out: &Path, formats: &[Format]) -> Result<Summary> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let a = &outcome.analysis;
    let app = &outcome.app;
    let mut written = Vec::new();
    let mut notes = Vec::new();
    let mut put = |name: String, bytes: &[u8]| -> Result<()> {
        let path = out.join(name);
        std::fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        written.push(path);
        Ok(())
    };
    let mut formats = formats.to_vec();
    formats.sort();
    formats.dedup();
    for f in &formats {
        match f {
            Format::Json => put(format!("{app}.json"), &a.json())?,
            Format::Trace => put(format!("{app}_traceability.json"), &a.trace_json())?,
            Format::Dot => put(format!("{app}.dot"), a.dot().as_bytes())?,
            Format::Png => {}
        }
    }
    if let Some(m) = outcome.metrics() {
        let mut bytes = serde_json::to_vec_pretty(&m)?;
        bytes.push(b'\n');
        put(format!("{app}_metrics.json"), &bytes)?;
    }
    if formats.contains(&Format::Png) {
        let path = out.join(format!("{app}.png"));
        match render_png(&a.dot(), &path)? {
            RenderOutcome::Rendered => written.push(path),
            RenderOutcome::BinaryMissing => notes.push("graphviz `dot` not found; no PNG written".to_string()),
        }
    }
    Ok(Summary {
        app: app.clone(),
        commit: outcome.commit.clone(),
        nodes: a.dfd.node_count(),
        flows: a.dfd.flow_count(),
        files_indexed: a.files_indexed,
        extraction_seconds: a.elapsed.as_secs_f64(),
        unresolved: a.report.unresolved.len(),
        written,
        notes,
    })
}

pub fn analyze(request: &AnalysisRequest) -> Result<Summary> {
    let outcome = execute(request)?;
    write(&outcome, &request.output_dir, &request.formats)
}

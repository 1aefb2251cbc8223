use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dfdtrace::request::{AnalysisRequest, Format, Source};
use dfdtrace::{run, serve};

#[derive(Parser)]
#[command(name = "dfdtrace", version, about = "Security-annotated dataflow diagrams from Spring microservice code")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze one application and write its documents.
    Analyze(AnalyzeArgs),
    /// Serve analyses over HTTP.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: String,
        #[arg(short, long)]
        verbose: bool,
    },
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Local directory to analyze.
    #[arg(long, conflicts_with = "repo_url", required_unless_present = "repo_url")]
    path: Option<PathBuf>,
    /// Git repository to clone shallowly.
    #[arg(long)]
    repo_url: Option<String>,
    /// Branch, tag or commit of --repo-url.
    #[arg(long = "ref", requires = "repo_url")]
    git_ref: Option<String>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [Format::Json, Format::Trace, Format::Dot])]
    format: Vec<Format>,
    /// Extra rule catalog (TOML), layered over the shipped one.
    #[arg(long)]
    rules: Vec<PathBuf>,
    /// Extra image catalog (TOML), layered over the shipped one.
    #[arg(long)]
    images: Vec<PathBuf>,
    /// Ground-truth diagram to score the result against.
    #[arg(long)]
    eval_truth: Option<PathBuf>,
    /// Search comments too and use the reference prototype's broader heuristics.
    #[arg(long)]
    paper_parity: bool,
    #[arg(short, long)]
    verbose: bool,
}

fn init_logging(verbose: bool) {
    let level = if verbose { "debug" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
}

fn analyze(args: AnalyzeArgs) -> anyhow::Result<()> {
    let source = match (args.path, args.repo_url) {
        (Some(p), _) => Source::Path(p),
        (None, Some(u)) => Source::RepoUrl(u),
        (None, None) => unreachable!("clap requires one source"),
    };
    let mut request = AnalysisRequest::new(source);
    request.git_ref = args.git_ref;
    request.output_dir = args.out;
    request.formats = args.format;
    request.rules = args.rules;
    request.images = args.images;
    request.eval_truth = args.eval_truth;
    request.paper_parity = args.paper_parity;

    let outcome = run::execute(&request)?;
    let summary = run::write(&outcome, &request.output_dir, &request.formats)?;
    let report = &outcome.analysis.report;
    if args.verbose {
        for u in &report.unresolved {
            eprintln!("unresolved [{}] {} {}", u.extractor, u.message, u.location.as_deref().unwrap_or(""));
        }
        for w in &report.warnings {
            eprintln!("warning: {w}");
        }
        for e in report.extractors.iter().filter(|e| e.failed.is_some()) {
            eprintln!("extractor {} failed: {}", e.name, e.failed.as_deref().unwrap_or_default());
        }
    }
    println!(
        "{}: {} nodes, {} flows from {} files in {:.2} s",
        summary.app, summary.nodes, summary.flows, summary.files_indexed, summary.extraction_seconds
    );
    if let Some(c) = &summary.commit {
        println!("commit {c}");
    }
    if let Some(m) = outcome.metrics() {
        let o = m.scores.overall;
        let show = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.3}"));
        println!("overall precision {} recall {}", show(o.precision), show(o.recall));
    }
    for p in &summary.written {
        println!("wrote {}", p.display());
    }
    for n in &summary.notes {
        println!("note: {n}");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Analyze(args) => {
            init_logging(args.verbose);
            analyze(args)
        }
        Command::Serve { bind, verbose } => {
            init_logging(verbose);
            tokio::runtime::Runtime::new()
                .map_err(anyhow::Error::from)
                .and_then(|rt| rt.block_on(serve::serve(&bind)))
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

//! `a2rag` command-line front end.
//!
//! Exit codes: 0 answered / success, 1 configuration or load error,
//! 3 abstained, 4 failed after the retry budget.

mod review;

use std::fs;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use a2rag_core::bench::{
    format_stress, format_summary, load_dataset, run_benchmark, stress_sweep, BenchOptions, RunReport, StressSpec,
    StressTable,
};
use a2rag_core::controller::{propose_kb_updates, Status};
use a2rag_core::cost::CostCounters;
use a2rag_core::kg::{read_jsonl, write_jsonl};
use a2rag_core::{Engine, EngineConfig, Outcome};
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use review::{apply_approved, review_items, write_version, Decision, Mode, ReviewItem};

const EXIT_ERROR: u8 = 1;
const EXIT_ABSTAIN: u8 = 3;
const EXIT_FAIL: u8 = 4;

#[derive(Parser)]
#[command(name = "a2rag", version, about = "Adaptive graph retrieval with verified answers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Answer one question.
    Query(QueryArgs),
    /// Run a QA dataset and report metrics.
    Bench(BenchArgs),
    /// Same as `bench` with a default deletion sweep.
    Stress(BenchArgs),
    /// Approve or reject proposed triples and write a new graph version.
    Review(ReviewArgs),
    /// Check a config file and the files it references.
    ValidateConfig(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    #[arg(long, short)]
    config: PathBuf,
    /// Print a single JSON document on stdout.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct QueryArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Write proposed triples from the verified evidence to this file.
    #[arg(long, value_name = "PATH")]
    propose: Option<PathBuf>,
    question: String,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Dataset file; defaults to `paths.dataset` from the config.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Disable relation seeds.
    #[arg(long)]
    ablate_relations: bool,
    /// Comma-separated node-deletion fractions, e.g. "0,0.1,0.2,0.4".
    #[arg(long, value_name = "FRACTIONS")]
    stress: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the report JSON here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReviewArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Proposals file written by `query --propose`.
    proposals: PathBuf,
    #[arg(long, conflicts_with = "reject_all")]
    approve_all: bool,
    #[arg(long)]
    reject_all: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Query(a) => cmd_query(a),
        Command::Bench(a) => cmd_bench(a, None),
        Command::Stress(a) => cmd_bench(a, Some("0,0.1,0.2,0.4")),
        Command::Review(a) => cmd_review(a),
        Command::ValidateConfig(a) => cmd_validate(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}

fn engine(config: &Path) -> Result<(EngineConfig, Engine)> {
    let cfg = EngineConfig::load(config)?;
    let engine = cfg.build_engine().with_context(|| format!("loading {}", config.display()))?;
    Ok((cfg, engine))
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

#[derive(Serialize)]
struct QueryOutput<'a> {
    #[serde(flatten)]
    outcome: &'a Outcome,
    proposals: Option<usize>,
}

fn cmd_query(args: QueryArgs) -> Result<u8> {
    let (_, engine) = engine(&args.common.config)?;
    let mut outcome = engine.run(&args.question);
    let mut proposals = None;
    if let Some(path) = &args.propose {
        let items: Vec<ReviewItem> = match (&outcome.status, &outcome.evidence) {
            (Status::Answered, Some(ev)) => {
                let mut cost = CostCounters::default();
                let c = propose_kb_updates(ev, &engine.corpus, engine.oracles.proposer.as_ref(), &mut cost);
                outcome.cost.merge(&cost);
                c.into_iter().map(|c| ReviewItem::pending(c, &args.question)).collect()
            }
            _ => Vec::new(),
        };
        write_jsonl(path, &items)?;
        proposals = Some(items.len());
    }
    if args.common.json {
        print_json(&QueryOutput { outcome: &outcome, proposals })?;
    } else {
        print_outcome(&outcome, proposals, args.propose.as_deref());
    }
    Ok(match outcome.status {
        Status::Answered => 0,
        Status::Abstain => EXIT_ABSTAIN,
        Status::Fail => EXIT_FAIL,
    })
}

fn print_outcome(o: &Outcome, proposals: Option<usize>, path: Option<&Path>) {
    println!("status: {}", o.status.as_str());
    if let Some(a) = &o.answer {
        println!("answer: {a}{}", if o.unverified { " (unverified)" } else { "" });
    }
    if let Some(ev) = &o.evidence {
        println!("evidence: {}", ev.join(", "));
    }
    if let Some(s) = o.terminated_at {
        println!("terminated_at: {s}");
    }
    println!("gate_score: {:.4}", o.gate_score);
    for it in &o.trace {
        let bit = |b: Option<bool>| b.map_or("-", |b| if b { "1" } else { "0" });
        println!(
            "iteration {}: rel={} grd={} ans={} failure={} stage={} chunks={} query={:?}",
            it.iteration,
            bit(it.bits.rel),
            bit(it.bits.grd),
            bit(it.bits.ans),
            it.failure.map_or("-", |f| f.as_str()),
            it.terminated_at.map_or("-", |s| s.as_str()),
            it.evidence_chunks,
            it.query
        );
    }
    let c = &o.cost;
    println!(
        "cost: oracle_calls={} prompt_tokens={} completion_tokens={} wall_ms={:.3}",
        c.total_calls(),
        c.prompt_tokens,
        c.completion_tokens,
        c.wall_time.as_secs_f64() * 1e3
    );
    if let Some(e) = &o.error {
        println!("error: {e}");
    }
    if let (Some(n), Some(p)) = (proposals, path) {
        println!("proposals: {n} written to {}", p.display());
    }
}

#[derive(Serialize)]
struct BenchOutput {
    report: RunReport,
    stress: Option<StressTable>,
}

fn parse_fractions(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|p| p.trim().parse::<f64>().with_context(|| format!("bad deletion fraction {p:?}")))
        .collect()
}

fn cmd_bench(args: BenchArgs, default_stress: Option<&str>) -> Result<u8> {
    let (cfg, engine) = engine(&args.common.config)?;
    let path = match args.dataset.clone().or(cfg.paths.dataset.clone()) {
        Some(p) => p,
        None => bail!("no dataset: pass --dataset or set paths.dataset"),
    };
    let dataset = load_dataset(&path, &engine.corpus)?;
    let options = BenchOptions { ablate_relation_seeds: args.ablate_relations, ..Default::default() };
    let report = run_benchmark(&dataset, &engine, options);
    let stress = match args.stress.as_deref().or(default_stress) {
        Some(s) => {
            let spec = StressSpec { deletion_fractions: parse_fractions(s)?, rng_seed: args.seed };
            let base = engine.clone();
            Some(stress_sweep(&dataset, &engine, |g| base.with_graph(g), &spec)?)
        }
        None => None,
    };
    let out = BenchOutput { report, stress };
    if let Some(p) = &args.out {
        write_json(p, &out)?;
    }
    if args.common.json {
        print_json(&out)?;
    } else {
        print!("{}", format_summary(&out.report));
        if let Some(t) = &out.stress {
            println!();
            print!("{}", format_stress(t));
        }
        if let Some(p) = &args.out {
            println!("report written to {}", p.display());
        }
    }
    Ok(0)
}

#[derive(Serialize)]
struct ReviewOutput {
    approved: usize,
    rejected: usize,
    decisions_file: PathBuf,
    new_graph: Option<PathBuf>,
    items: Vec<ReviewItem>,
}

fn reviewed_path(p: &Path) -> PathBuf {
    let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or("proposals");
    p.with_file_name(format!("{stem}.reviewed.jsonl"))
}

fn cmd_review(args: ReviewArgs) -> Result<u8> {
    let (cfg, engine) = engine(&args.common.config)?;
    let mut items: Vec<ReviewItem> = read_jsonl(&args.proposals)?;
    let mode = match (args.approve_all, args.reject_all) {
        (true, _) => Mode::ApproveAll,
        (_, true) => Mode::RejectAll,
        _ => Mode::Interactive,
    };
    let stdin = io::stdin();
    let mut input = BufReader::new(stdin.lock());
    // Prompts go to stderr so stdout stays a single document under --json.
    review_items(&mut items, &engine.corpus, mode, &mut input, &mut io::stderr())?;

    let decisions_file = reviewed_path(&args.proposals);
    write_jsonl(&decisions_file, &items)?;
    let approved = items.iter().filter(|i| i.decision == Decision::Approved).count();
    let rejected = items.iter().filter(|i| i.decision == Decision::Rejected).count();
    let new_graph = if approved > 0 {
        let g = apply_approved(&engine.graph, &engine.corpus, &items)?;
        Some(write_version(&cfg.paths.graph, &g)?)
    } else {
        None
    };
    let out = ReviewOutput { approved, rejected, decisions_file, new_graph, items };
    if args.common.json {
        print_json(&out)?;
    } else {
        println!("approved: {}  rejected: {}", out.approved, out.rejected);
        println!("decisions: {}", out.decisions_file.display());
        match &out.new_graph {
            Some(p) => println!("new graph version: {}", p.display()),
            None => println!("graph unchanged"),
        }
    }
    Ok(0)
}

#[derive(Serialize)]
struct ValidateOutput {
    valid: bool,
    chunks: usize,
    summaries: usize,
    nodes: usize,
    edges: usize,
    oracles: std::collections::BTreeMap<String, String>,
}

fn cmd_validate(args: CommonArgs) -> Result<u8> {
    let (_, engine) = engine(&args.config)?;
    let out = ValidateOutput {
        valid: true,
        chunks: engine.corpus.len(),
        summaries: engine.corpus.summaries().len(),
        nodes: engine.graph.node_count(),
        edges: engine.graph.edge_count(),
        oracles: engine.oracles.names().into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
    };
    if args.json {
        print_json(&out)?;
    } else {
        println!(
            "config ok: {} chunks, {} summaries, {} nodes, {} edges",
            out.chunks, out.summaries, out.nodes, out.edges
        );
        for (slot, name) in &out.oracles {
            println!("  {slot}: {name}");
        }
    }
    Ok(0)
}

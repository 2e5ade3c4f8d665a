use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::{Arc, Mutex};

use clap::{Args, Parser, Subcommand, ValueEnum};
use onset_core::eval::{
    self, f1_node, f1_rel, ged_score, report, run_benchmark, sample_graph, stream_rng, template_query, BenchBackend,
    BenchmarkConfig, QueryItem, QueryOrigin, QueryOutcome, SamplerConfig, ScoreReport,
};
use onset_core::graph::{graph_from_json, to_sparql, Stage};
use onset_core::lm::{generate_query_text, LmBackend, MockOracle};
use onset_core::ontology::SamplingMode;
use onset_core::pipeline::run_pipeline;
use onset_core::service::{self, AppState, LoadedOntology, ServiceConfig};

/// Ontology-constrained natural-language query engine.
#[derive(Parser)]
#[command(name = "onset", version)]
struct Cli {
    /// Service configuration file; defaults to the bundled fixture ontology.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP API.
    Serve,
    /// Run the pipeline once and print the trace and SPARQL.
    Extract {
        /// Natural-language question
        query: String,
        /// Ontology id from the configuration; defaults to the first
        #[arg(long)]
        ontology: Option<String>,
        /// Retrieval width per node and edge; defaults to the configured value
        #[arg(long)]
        k: Option<usize>,
        /// Answer with this graph instead of calling an LM.
        #[arg(long)]
        oracle_graph: Option<PathBuf>,
    },
    /// Build or refresh the embedding cache of every configured ontology.
    Index,
    /// Synthetic evaluation.
    #[command(subcommand)]
    Eval(EvalCommand),
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Probabilistic,
    Uniform,
}

impl From<Mode> for SamplingMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Probabilistic => SamplingMode::Probabilistic,
            Mode::Uniform => SamplingMode::Uniform,
        }
    }
}

#[derive(Args)]
struct SamplerArgs {
    #[arg(long, default_value_t = 10)]
    top_k_links: usize,
    #[arg(long, default_value_t = 2)]
    depth: usize,
    #[arg(long, value_enum, default_value_t = Mode::Probabilistic)]
    mode: Mode,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

impl SamplerArgs {
    fn config(&self, max_nodes: usize) -> SamplerConfig {
        SamplerConfig {
            top_k_links: self.top_k_links,
            depth: self.depth,
            max_nodes,
            mode: self.mode.into(),
            rng_seed: self.seed,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Origin {
    Templated,
    Lm,
    File,
}

#[derive(Clone, Copy, ValueEnum)]
enum Backend {
    /// Answer every query with its own sampled graph.
    Oracle,
    /// The LM endpoint from the configuration.
    Lm,
}

#[derive(Subcommand)]
enum EvalCommand {
    /// Print sampled graphs as JSON lines.
    Sample {
        /// Ontology id from the configuration; defaults to the first
        #[arg(long)]
        ontology: Option<String>,
        #[arg(long, default_value_t = 3)]
        max_nodes: usize,
        #[arg(long, default_value_t = 128)]
        n: usize,
        #[command(flatten)]
        sampler: SamplerArgs,
    },
    /// Turn graphs (JSON lines) into query items.
    Genq {
        graphs: PathBuf,
        /// Ontology id from the configuration; defaults to the first
        #[arg(long)]
        ontology: Option<String>,
        #[arg(long, value_enum, default_value_t = Origin::Templated)]
        origin: Origin,
    },
    /// Score predicted graphs against truth graphs, pairwise by line.
    Score { predicted: PathBuf, truth: PathBuf },
    /// Full benchmark run.
    Run {
        /// Ontology id from the configuration; defaults to the first
        #[arg(long)]
        ontology: Option<String>,
        /// Node counts of the sampled graphs
        #[arg(long, value_delimiter = ',', default_value = "2,3,5,7")]
        k: Vec<usize>,
        /// Queries per node count
        #[arg(long, default_value_t = 128)]
        queries: usize,
        #[arg(long, value_enum, default_value_t = Origin::Templated)]
        origin: Origin,
        /// Query items for `--origin file`.
        #[arg(long)]
        queries_file: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Backend::Oracle)]
        backend: Backend,
        /// Retrieval width for the pipeline; defaults to the configured value
        #[arg(long)]
        retrieval_k: Option<usize>,
        /// Worker threads; defaults to one per CPU
        #[arg(long)]
        threads: Option<usize>,
        /// Per-query outcomes, appended as JSON lines; existing lines are
        /// reused so an interrupted run can resume.
        #[arg(long)]
        outcomes: Option<PathBuf>,
        /// Where to write the report JSON.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        sampler: SamplerArgs,
    },
    /// Render a report JSON as a table or CSV.
    Report {
        report: PathBuf,
        #[arg(long)]
        csv: bool,
    },
}

enum Failure {
    Usage(String),
    Backend(String),
}

type Result<T> = std::result::Result<T, Failure>;

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

fn backend(e: impl std::fmt::Display) -> Failure {
    Failure::Backend(e.to_string())
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn load_config(path: Option<&Path>) -> Result<ServiceConfig> {
    let mut cfg = match path {
        Some(p) => ServiceConfig::from_file(p).map_err(usage)?,
        None => ServiceConfig::builtin_fixture(),
    };
    cfg.apply_env(&std::env::vars().collect::<HashMap<_, _>>());
    Ok(cfg)
}

fn load_ontology(cfg: &ServiceConfig, id: Option<&str>) -> Result<LoadedOntology> {
    let entry = match id {
        Some(id) => {
            cfg.ontologies.iter().find(|o| o.id == id).ok_or_else(|| usage(format!("unknown ontology `{id}`")))?
        }
        None => &cfg.ontologies[0],
    };
    entry.load(cfg.embedder().map_err(usage)?, cfg.embedding.cache_dir.as_deref()).map_err(backend)
}

fn lm_backend(cfg: &ServiceConfig) -> Result<Arc<dyn LmBackend>> {
    cfg.lm_backend().map_err(usage)?.ok_or_else(|| usage("no LM endpoint configured (set [lm] url or ONSET_LM_URL)"))
}

fn json_line<T: serde::Serialize>(out: &mut impl Write, v: &T) -> Result<()> {
    let line = serde_json::to_string(v).map_err(usage)?;
    writeln!(out, "{line}").map_err(usage)
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(cli.config.as_deref())?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Serve => {
            let rt = tokio::runtime::Runtime::new().map_err(usage)?;
            rt.block_on(service::serve(cfg)).map_err(backend)?;
        }
        Command::Extract { query, ontology, k, oracle_graph } => {
            let onto = load_ontology(&cfg, ontology.as_deref())?;
            let lm: Arc<dyn LmBackend> = match oracle_graph {
                Some(p) => {
                    let (g, _) = graph_from_json(&read(&p)?, Stage::Sampled).map_err(usage)?;
                    Arc::new(MockOracle::new(g, &onto.index))
                }
                None => lm_backend(&cfg)?,
            };
            let k = k.unwrap_or(cfg.retrieval_k);
            let trace =
                run_pipeline(&query, &onto.index, &onto.sidx, lm.as_ref(), k, &cfg.lm_settings()).map_err(backend)?;
            let text = serde_json::to_string_pretty(&trace).map_err(usage)?;
            writeln!(out, "{text}").map_err(usage)?;
            if let Some(g) = &trace.corrected_graph {
                writeln!(out, "\n{}", to_sparql(g).map_err(usage)?).map_err(usage)?;
            }
        }
        Command::Index => {
            let state = AppState::from_config(&cfg).map_err(backend)?;
            for (id, o) in &state.ontologies {
                writeln!(
                    out,
                    "{id}: {} classes, {} links, model {} (dim {})",
                    o.index.class_count(),
                    o.index.link_count(),
                    o.sidx.model_id(),
                    o.sidx.dim()
                )
                .map_err(usage)?;
            }
            if cfg.embedding.cache_dir.is_none() {
                eprintln!("note: no embedding.cache_dir configured, nothing was persisted");
            }
        }
        Command::Eval(cmd) => eval_command(cmd, &cfg, &mut out)?,
    }
    Ok(())
}

fn eval_command(cmd: EvalCommand, cfg: &ServiceConfig, out: &mut impl Write) -> Result<()> {
    match cmd {
        EvalCommand::Sample { ontology, max_nodes, n, sampler } => {
            if max_nodes < 2 {
                return Err(usage("--max-nodes must be at least 2"));
            }
            let onto = load_ontology(cfg, ontology.as_deref())?;
            let scfg = sampler.config(max_nodes);
            for i in 0..n {
                let s = sample_graph(&onto.index, &scfg, &mut stream_rng(scfg.rng_seed, i as u64)).map_err(usage)?;
                json_line(out, &s.graph)?;
            }
        }
        EvalCommand::Genq { graphs, ontology, origin } => {
            let onto = load_ontology(cfg, ontology.as_deref())?;
            let graphs = eval::benchmark::read_graphs(&read(&graphs)?, Stage::Sampled).map_err(usage)?;
            let lm = match origin {
                Origin::Lm => Some(lm_backend(cfg)?),
                Origin::Templated => None,
                Origin::File => return Err(usage("genq produces query files; use --origin templated or lm")),
            };
            for g in graphs {
                let (query_text, tag) = match &lm {
                    Some(lm) => (generate_query_text(&g, lm.as_ref(), &cfg.lm_settings()).map_err(backend)?, "lm"),
                    None => (template_query(&g, &onto.index), "templated"),
                };
                json_line(out, &QueryItem { graph: g, query_text, origin: tag.into() })?;
            }
        }
        EvalCommand::Score { predicted, truth } => {
            let pred = eval::benchmark::read_graphs(&read(&predicted)?, Stage::Corrected).map_err(usage)?;
            let truth = eval::benchmark::read_graphs(&read(&truth)?, Stage::Sampled).map_err(usage)?;
            if pred.len() != truth.len() {
                return Err(usage(format!("{} predicted graphs but {} truth graphs", pred.len(), truth.len())));
            }
            let mut sums = [0.0; 3];
            for (p, t) in pred.iter().zip(&truth) {
                let row = [f1_node(p, t), f1_rel(p, t), ged_score(p, t).map_err(usage)?];
                for (s, v) in sums.iter_mut().zip(row) {
                    *s += v;
                }
                json_line(out, &serde_json::json!({"f1_node": row[0], "f1_rel": row[1], "ged_s": row[2]}))?;
            }
            let n = pred.len().max(1) as f64;
            eprintln!("mean f1_node {:.4}  f1_rel {:.4}  ged_s {:.4}", sums[0] / n, sums[1] / n, sums[2] / n);
        }
        EvalCommand::Run {
            ontology,
            k,
            queries,
            origin,
            queries_file,
            backend: which,
            retrieval_k,
            threads,
            outcomes,
            out: report_path,
            sampler,
        } => {
            let onto = load_ontology(cfg, ontology.as_deref())?;
            let file_items = match (origin, &queries_file) {
                (Origin::File, Some(p)) => Some(eval::benchmark::parse_query_file(&read(p)?).map_err(usage)?),
                (Origin::File, None) => return Err(usage("--origin file needs --queries-file")),
                _ => None,
            };
            let lm = match which {
                Backend::Lm => Some(lm_backend(cfg)?),
                Backend::Oracle => None,
            };
            let bcfg = BenchmarkConfig {
                k_values: k,
                queries_per_k: queries,
                origin: match origin {
                    Origin::Templated => QueryOrigin::Templated,
                    Origin::Lm => QueryOrigin::Lm,
                    Origin::File => QueryOrigin::File,
                },
                seed: sampler.seed,
                sampler: sampler.config(2),
                retrieval_k: retrieval_k.unwrap_or(cfg.retrieval_k),
                model: match which {
                    Backend::Oracle => "mock_oracle".into(),
                    Backend::Lm => cfg.lm_settings().model,
                },
                ontology: ontology.unwrap_or_else(|| cfg.ontologies[0].id.clone()),
                lm: cfg.lm_settings(),
                threads,
            };
            let done: Vec<QueryOutcome> = match &outcomes {
                Some(p) if p.exists() => read(p)?
                    .lines()
                    .filter(|l| !l.trim().is_empty())
                    .map(serde_json::from_str)
                    .collect::<std::result::Result<_, _>>()
                    .map_err(usage)?,
                _ => Vec::new(),
            };
            let sink = match &outcomes {
                Some(p) => Some(Mutex::new(fs::OpenOptions::new().create(true).append(true).open(p).map_err(usage)?)),
                None => None,
            };
            let on_outcome = |o: &QueryOutcome| {
                if let Some(f) = &sink {
                    if let Ok(line) = serde_json::to_string(o) {
                        let _ = writeln!(f.lock().unwrap_or_else(|e| e.into_inner()), "{line}");
                    }
                }
            };
            let backend_choice = match &lm {
                Some(b) => BenchBackend::Shared(b.as_ref()),
                None => BenchBackend::Oracle,
            };
            let report =
                run_benchmark(&onto.index, &onto.sidx, backend_choice, &bcfg, file_items.as_deref(), done, &on_outcome)
                    .map_err(usage)?;
            if let Some(p) = report_path {
                fs::write(&p, serde_json::to_string_pretty(&report).map_err(usage)?).map_err(usage)?;
            }
            write!(out, "{}", report::render_table(&report)).map_err(usage)?;
        }
        EvalCommand::Report { report: path, csv } => {
            let r: ScoreReport = serde_json::from_str(&read(&path)?).map_err(usage)?;
            let text = if csv { report::to_csv(&r).map_err(usage)? } else { report::render_table(&r) };
            write!(out, "{text}").map_err(usage)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Backend(msg)) => {
            eprintln!("backend failure: {msg}");
            ExitCode::from(2)
        }
    }
}

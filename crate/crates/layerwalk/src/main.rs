use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use layerwalk::error::{Error, Result};
use layerwalk::formats::{artifacts, attributes, corpus, edgelist, embedding, tasks};
use layerwalk::io::{atomic_write, read_json, write_json};
use layerwalk::pipeline::{self, Pipeline, PipelineConfig, RunOptions};
use layerwalk::report;
use layerwalk_core::align::{self, AlignMethod};
use layerwalk_core::audit::{self, AuditInput, WiggleConfig};
use layerwalk_core::eval::{self, ProbeConfig, TaskConfig};
use layerwalk_core::graph::NodeId;
use layerwalk_core::partition;
use layerwalk_core::rng::{self, domain};
use layerwalk_core::sgns::{self, TrainConfig};
use layerwalk_core::synth::{self, SyntheticPopulationConfig};
use layerwalk_core::walker::{self, WalkConfig, WalkMode};
use rand::seq::index;

#[derive(Parser)]
#[command(name = "layerwalk", version, about = "Layer-aware random-walk embeddings of multiplex population graphs")]
struct Cli {
    /// Thread cap for parallel work; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Aware,
    Blind,
    Flatten,
}

impl From<Mode> for WalkMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Aware => WalkMode::Aware,
            Mode::Blind => WalkMode::Blind,
            Mode::Flatten => WalkMode::Flatten,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Ols,
    Procrustes,
}

impl From<Method> for AlignMethod {
    fn from(m: Method) -> Self {
        match m {
            Method::Ols => AlignMethod::Ols,
            Method::Procrustes => AlignMethod::Procrustes,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic population: yearly graphs, attributes and tasks.
    Synth(SynthArgs),
    /// Sample random walks over one graph.
    Walk(WalkArgs),
    /// Train skip-gram embeddings on a walk corpus.
    Train(TrainArgs),
    /// Fit a linear map from one embedding onto another and apply it.
    Align(AlignArgs),
    /// Correlate pairwise cosine similarities of two embeddings.
    AlignEval(AlignEvalArgs),
    /// Fit a PCA whitening transform on an embedding.
    WhitenFit(WhitenArgs),
    /// Build a Fibonacci direction grid.
    Grid(GridArgs),
    /// Assign embeddings to their nearest grid direction.
    Partition(PartitionArgs),
    /// Share of nodes that keep their cluster between two partitions.
    Retention(RetentionArgs),
    /// Test a sample's cluster composition against its population.
    Audit(AuditArgs),
    /// Train probes for every task on one embedding.
    Eval(EvalArgs),
    /// Run every stage from one configuration file.
    Pipeline(PipelineArgs),
    /// Rebuild and print the report of a pipeline run directory.
    Report(ReportArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Population config JSON; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    nodes: Option<u32>,
    #[arg(long)]
    years: Option<u32>,
    #[arg(long)]
    start_year: Option<i32>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct WalkArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long, value_enum, default_value = "aware")]
    mode: Mode,
    #[arg(long, default_value_t = 0.8)]
    persistence: f64,
    #[arg(long, default_value_t = 40)]
    walk_length: usize,
    #[arg(long, default_value_t = 4)]
    walks_per_node: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Training config JSON; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    negatives: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Lock-free multi-threaded updates; output is then not bit-reproducible.
    #[arg(long)]
    hogwild: bool,
    #[arg(long)]
    out: PathBuf,
    /// Also write a word2vec-style text export.
    #[arg(long)]
    text: Option<PathBuf>,
}

#[derive(Args)]
struct AlignArgs {
    #[arg(long)]
    source: PathBuf,
    #[arg(long)]
    target: PathBuf,
    #[arg(long, value_enum, default_value = "ols")]
    method: Method,
    /// Aligned embedding output.
    #[arg(long)]
    out: PathBuf,
    /// Fitted map output.
    #[arg(long)]
    map: Option<PathBuf>,
}

#[derive(Args)]
struct AlignEvalArgs {
    #[arg(long)]
    first: PathBuf,
    #[arg(long)]
    second: PathBuf,
    #[arg(long, default_value_t = 20_000)]
    pairs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct WhitenArgs {
    #[arg(long)]
    embedding: PathBuf,
    #[arg(long, default_value_t = 1e-8)]
    floor: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GridArgs {
    #[arg(long)]
    k: usize,
    #[arg(long)]
    dim: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PartitionArgs {
    #[arg(long)]
    embedding: PathBuf,
    #[arg(long)]
    grid: PathBuf,
    /// Whitening transform JSON applied before assignment.
    #[arg(long)]
    whiten: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RetentionArgs {
    #[arg(long)]
    base: PathBuf,
    #[arg(long)]
    later: PathBuf,
}

#[derive(Args)]
struct AuditArgs {
    /// Audit input JSON with population and sample counts.
    #[arg(long, conflicts_with = "partition")]
    input: Option<PathBuf>,
    /// Build the input from a partition and a simple random sample of it.
    #[arg(long)]
    partition: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    sample_size: u64,
    #[arg(long, default_value_t = 1000)]
    permutations: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    funnel: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    tasks: PathBuf,
    #[arg(long)]
    embedding: PathBuf,
    /// Probe config JSON.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PipelineArgs {
    /// Pipeline config JSON; the bundled demo config when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Rerun stages even when their manifests match.
    #[arg(long)]
    force: bool,
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct ReportArgs {
    /// Pipeline run directory.
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    csv: bool,
}

fn print_json<T: serde::Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable"));
}

fn synth_cmd(a: SynthArgs) -> Result<()> {
    let mut cfg: SyntheticPopulationConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => SyntheticPopulationConfig::default(),
    };
    if let Some(n) = a.nodes {
        cfg.num_nodes = n;
    }
    if let Some(y) = a.years {
        cfg.num_years = y;
    }
    if let Some(y) = a.start_year {
        cfg.start_year = y;
    }
    cfg.validate()?;
    let (graphs, attrs) = synth::generate_synthetic(&cfg, a.seed)?;
    for g in &graphs {
        edgelist::write(&edgelist::year_path(&a.out.join("graphs"), g.year()), g)?;
    }
    attributes::write(&a.out.join("attributes.jsonl"), &attrs)?;
    let suite = eval::build_tasks(&attrs, &graphs, &TaskConfig { seed: a.seed, ..TaskConfig::default() })?;
    tasks::write(&a.out.join("tasks.jsonl"), &suite.tasks)?;
    for w in &suite.warnings {
        eprintln!("warning: {w}");
    }
    println!("{}", synth::describe(&attrs));
    Ok(())
}

fn walk_cmd(a: WalkArgs, workers: usize) -> Result<()> {
    let graph = edgelist::read(&a.graph)?;
    let cfg = WalkConfig {
        mode: a.mode.into(),
        persistence: a.persistence,
        walk_length: a.walk_length,
        walks_per_node: a.walks_per_node,
        seed: a.seed,
    };
    let c = walker::generate_walks_parallel(&graph, &cfg, workers)?;
    corpus::write(&a.out, &c)?;
    println!("{} walks, {} tokens", c.num_walks(), c.num_tokens());
    if cfg.mode == WalkMode::Aware {
        print_json(&walker::persistence_stats(&c, &graph)?);
    }
    Ok(())
}

fn train_cmd(a: TrainArgs, workers: usize) -> Result<()> {
    let mut cfg: TrainConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => TrainConfig::default(),
    };
    cfg.dim = a.dim.unwrap_or(cfg.dim);
    cfg.window = a.window.unwrap_or(cfg.window);
    cfg.negatives = a.negatives.unwrap_or(cfg.negatives);
    cfg.epochs = a.epochs.unwrap_or(cfg.epochs);
    cfg.seed = a.seed;
    cfg.workers = if a.hogwild { workers.max(1) } else { 1 };
    let c = corpus::read(&a.corpus)?;
    let (emb, rep) = sgns::train_with_report(&c, &cfg)?;
    embedding::write(&a.out, &emb)?;
    if let Some(t) = &a.text {
        embedding::write_text(t, &emb)?;
    }
    for (i, l) in rep.epoch_losses.iter().enumerate() {
        println!("epoch {} loss {l:.5}", i + 1);
    }
    Ok(())
}

fn align_cmd(a: AlignArgs) -> Result<()> {
    let source = embedding::read(&a.source)?;
    let target = embedding::read(&a.target)?;
    let map = align::fit_embeddings(&source, &target, a.method.into())?;
    let aligned = align::apply(&map, &source)?;
    embedding::write(&a.out, &aligned)?;
    if let Some(m) = &a.map {
        artifacts::write_alignment(m, &map)?;
    }
    println!("orthogonality deviation {:.3e}", map.orthogonality_deviation());
    Ok(())
}

fn align_eval_cmd(a: AlignEvalArgs) -> Result<()> {
    let first = embedding::read(&a.first)?;
    let second = embedding::read(&a.second)?;
    let nodes = align::common_nodes(&first, &second);
    let available = nodes.len() * nodes.len().saturating_sub(1) / 2;
    print_json(&align::evaluate_pairs(&first, &second, &nodes, a.pairs.min(available), a.seed)?);
    Ok(())
}

fn whiten_cmd(a: WhitenArgs) -> Result<()> {
    let emb = embedding::read(&a.embedding)?;
    let w = partition::fit_whitening(&emb, &emb.present_nodes(), a.floor)?;
    write_json(&a.out, &w)
}

fn partition_cmd(a: PartitionArgs) -> Result<()> {
    let emb = embedding::read(&a.embedding)?;
    let grid = artifacts::read_grid(&a.grid)?;
    let w: Option<partition::WhiteningTransform> = a.whiten.as_deref().map(read_json).transpose()?;
    let p = partition::assign(&emb, &grid, w.as_ref(), &emb.present_nodes())?;
    artifacts::write_partition(&a.out, &p)?;
    if !p.unassignable.is_empty() {
        eprintln!("warning: {} nodes could not be assigned", p.unassignable.len());
    }
    print_json(&partition::balance_metrics(&p.counts)?);
    Ok(())
}

fn retention_cmd(a: RetentionArgs) -> Result<()> {
    let base = artifacts::read_partition(&a.base)?;
    let later = artifacts::read_partition(&a.later)?;
    let common: Vec<NodeId> = (0..base.assignment.len().min(later.assignment.len()) as NodeId)
        .filter(|&v| base.assignment[v as usize] != partition::UNASSIGNED || later.assignment[v as usize] != partition::UNASSIGNED)
        .collect();
    println!("{:.6}", partition::retention(&base, &later, &common)?);
    Ok(())
}

fn audit_cmd(a: AuditArgs) -> Result<()> {
    let input: AuditInput = match (&a.input, &a.partition) {
        (Some(p), _) => read_json(p)?,
        (None, Some(p)) => {
            let part = artifacts::read_partition(p)?;
            let assigned: Vec<NodeId> = (0..part.assignment.len() as NodeId).filter(|&v| part.cluster(v).is_some()).collect();
            if a.sample_size as usize > assigned.len() {
                return Err(Error::Config(format!("sample size {} exceeds {} assigned nodes", a.sample_size, assigned.len())));
            }
            let mut r = rng::keyed(a.seed, domain::AUDIT, u64::MAX);
            let mut sample = vec![0u64; part.k];
            for i in index::sample(&mut r, assigned.len(), a.sample_size as usize) {
                sample[part.cluster(assigned[i]).expect("assigned") as usize] += 1;
            }
            AuditInput::new(part.counts.clone(), sample, a.permutations, a.seed)
        }
        (None, None) => return Err(Error::Config("audit needs --input or --partition".into())),
    };
    let result = audit::audit(&input, a.alpha, &WiggleConfig::default())?;
    write_json(&a.out, &result)?;
    if let Some(f) = &a.funnel {
        atomic_write(f, artifacts::funnel_csv(&audit::funnel(&input, &result)).as_bytes())?;
    }
    println!(
        "S = {:.4}, p = {:.4}; c_T* = {:.4}, flagged clusters {:?}",
        result.s_obs, result.p_global, result.clusters.threshold, result.clusters.flags
    );
    Ok(())
}

fn eval_cmd(a: EvalArgs) -> Result<()> {
    let suite = tasks::read(&a.tasks)?;
    let emb = embedding::read(&a.embedding)?;
    let cfg: ProbeConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => ProbeConfig::default(),
    };
    let cfg = ProbeConfig { seed: a.seed, ..cfg };
    cfg.validate()?;
    let rep = pipeline::evaluate_tasks(&suite, &emb, &cfg);
    for r in &rep.results {
        println!("{:<10} {} {:.4}", r.task, r.metric, r.test_metric);
    }
    for w in &rep.warnings {
        eprintln!("warning: {w}");
    }
    write_json(&a.out, &rep)
}

fn pipeline_cmd(a: PipelineArgs, workers: usize) -> Result<()> {
    let cfg = match &a.config {
        Some(p) => PipelineConfig::from_path(p)?,
        None => pipeline::demo_config(),
    };
    let mut p = Pipeline::new(cfg, &a.out, RunOptions { force: a.force, workers, quiet: a.quiet })?;
    let rep = p.run()?;
    let (json, csv) = p.report_paths();
    println!("report written to {} and {}", json.display(), csv.display());
    for w in &rep.warnings {
        eprintln!("warning: {w}");
    }
    Ok(())
}

fn report_cmd(a: ReportArgs) -> Result<()> {
    let cfg = PipelineConfig::from_path(&a.run.join("config.json"))?;
    let rep = pipeline::collect_report(&a.run, &cfg)?;
    if a.csv {
        print!("{}", report::to_csv(&rep));
    } else {
        print_json(&rep);
    }
    Ok(())
}

fn grid_cmd(a: GridArgs) -> Result<()> {
    let g = partition::fibonacci_grid(a.k, a.dim)?;
    artifacts::write_grid(&a.out, &g)
}

fn run(cli: Cli) -> Result<()> {
    if cli.workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.workers)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    let workers = if cli.workers == 0 { rayon::current_num_threads() } else { cli.workers };
    match cli.command {
        Command::Synth(a) => synth_cmd(a),
        Command::Walk(a) => walk_cmd(a, workers),
        Command::Train(a) => train_cmd(a, workers),
        Command::Align(a) => align_cmd(a),
        Command::AlignEval(a) => align_eval_cmd(a),
        Command::WhitenFit(a) => whiten_cmd(a),
        Command::Grid(a) => grid_cmd(a),
        Command::Partition(a) => partition_cmd(a),
        Command::Retention(a) => retention_cmd(a),
        Command::Audit(a) => audit_cmd(a),
        Command::Eval(a) => eval_cmd(a),
        Command::Pipeline(a) => pipeline_cmd(a, workers),
        Command::Report(a) => report_cmd(a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

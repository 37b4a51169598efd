//! Staged end-to-end runs driven by one configuration file.
//!
//! Every stage reads its inputs from the run directory and writes its
//! outputs atomically, followed by a manifest under `manifests/`. A stage
//! whose parameters and input fingerprints match its manifest, and whose
//! outputs are intact, is skipped unless forced.

use std::path::{Path, PathBuf};
use std::time::Instant;

use layerwalk_core::align::{self, AlignMethod};
use layerwalk_core::audit::{self, AuditInput, WiggleConfig};
use layerwalk_core::eval::{self, ProbeConfig, TaskConfig};
use layerwalk_core::graph::{LayerId, MultiplexGraph, NodeId};
use layerwalk_core::partition::{self, Partition};
use layerwalk_core::rng::{self, domain, Fingerprint};
use layerwalk_core::sgns::{self, TrainConfig};
use layerwalk_core::synth::{self, SyntheticPopulationConfig};
use layerwalk_core::walker::{self, WalkConfig, WalkMode};
use rand::seq::index;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::formats::{artifacts, attributes, corpus, edgelist, embedding, tasks};
use crate::io::{file_fingerprint, hex, read_json, write_json};
use crate::report::{
    AlignRow, AuditSummary, ClusterRow, GraphSummary, PartitionMetrics, PersistenceRow, ProbeRow, Report, RetentionRow,
    SynthMetrics, TrainRow,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WalkSettings {
    pub persistence: f64,
    pub walk_length: usize,
    pub walks_per_node: usize,
}

impl Default for WalkSettings {
    fn default() -> Self {
        let w = WalkConfig::default();
        WalkSettings { persistence: w.persistence, walk_length: w.walk_length, walks_per_node: w.walks_per_node }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlignSettings {
    /// Map used for the aligned embeddings that later stages consume.
    pub method: AlignMethod,
    /// Random node pairs for the pairwise-cosine evaluation.
    pub eval_pairs: usize,
}

impl Default for AlignSettings {
    fn default() -> Self {
        AlignSettings { method: AlignMethod::Ols, eval_pairs: 20_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PartitionSettings {
    pub k: usize,
    pub whiten: bool,
    pub floor: f64,
}

impl Default for PartitionSettings {
    fn default() -> Self {
        PartitionSettings { k: 100, whiten: true, floor: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuditSettings {
    /// Size of the simple random sample audited against the base-year partition.
    pub sample_size: u64,
    pub permutations: usize,
    pub alpha: f64,
    pub wiggle: WiggleConfig,
}

impl Default for AuditSettings {
    fn default() -> Self {
        AuditSettings { sample_size: 1000, permutations: 1000, alpha: 0.05, wiggle: WiggleConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    /// Train embeddings single-threaded so reruns are bit-identical.
    pub deterministic: bool,
    pub synth: SyntheticPopulationConfig,
    /// Walk modes to embed; the first one feeds the audit.
    pub modes: Vec<WalkMode>,
    pub walk: WalkSettings,
    pub train: TrainConfig,
    pub align: AlignSettings,
    pub partition: PartitionSettings,
    pub audit: AuditSettings,
    pub tasks: TaskConfig,
    pub probe: ProbeConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            deterministic: true,
            synth: SyntheticPopulationConfig::default(),
            modes: vec![WalkMode::Aware, WalkMode::Blind],
            walk: WalkSettings::default(),
            train: TrainConfig::default(),
            align: AlignSettings::default(),
            partition: PartitionSettings::default(),
            audit: AuditSettings::default(),
            tasks: TaskConfig::default(),
            probe: ProbeConfig::default(),
        }
    }
}

/// The bundled desk-scale configuration.
pub const DEMO_CONFIG: &str = include_str!("../configs/demo.json");

pub fn demo_config() -> PipelineConfig {
    serde_json::from_str(DEMO_CONFIG).expect("bundled demo config parses")
}

impl PipelineConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        read_json(path)
    }

    pub fn walk_config(&self, mode: WalkMode) -> WalkConfig {
        WalkConfig {
            mode,
            persistence: self.walk.persistence,
            walk_length: self.walk.walk_length,
            walks_per_node: self.walk.walks_per_node,
            seed: self.seed,
        }
    }

    pub fn train_config(&self, workers: usize) -> TrainConfig {
        let workers = if self.deterministic { 1 } else { workers.max(1) };
        TrainConfig { seed: self.seed, workers, ..self.train.clone() }
    }

    pub fn task_config(&self) -> TaskConfig {
        TaskConfig { seed: self.seed, ..self.tasks.clone() }
    }

    pub fn probe_config(&self) -> ProbeConfig {
        ProbeConfig { seed: self.seed, ..self.probe.clone() }
    }

    pub fn years(&self) -> Vec<i32> {
        (0..self.synth.num_years as i32).map(|t| self.synth.start_year + t).collect()
    }

    /// Checks every stage's parameters before anything runs.
    pub fn validate(&self) -> Result<()> {
        self.synth.validate()?;
        if self.modes.is_empty() {
            return Err(Error::Config("at least one walk mode is required".into()));
        }
        for (i, m) in self.modes.iter().enumerate() {
            if self.modes[..i].contains(m) {
                return Err(Error::Config(format!("walk mode {} listed twice", m.name())));
            }
            self.walk_config(*m).validate()?;
        }
        self.train_config(1).validate()?;
        self.probe.validate()?;
        if self.align.eval_pairs < 2 {
            return Err(Error::Config("align.eval_pairs must be at least 2".into()));
        }
        if self.partition.k == 0 || !(self.partition.floor > 0.0) {
            return Err(Error::Config("partition.k and partition.floor must be positive".into()));
        }
        if self.train.dim < 2 {
            return Err(Error::Config("grids need embedding dimension >= 2".into()));
        }
        let a = &self.audit;
        if a.sample_size == 0 || a.sample_size > u64::from(self.synth.num_nodes) {
            return Err(Error::Config("audit.sample_size must lie in [1, num_nodes]".into()));
        }
        if a.permutations == 0 || !(a.alpha > 0.0 && a.alpha <= 1.0) || a.wiggle.sims < 100 || a.wiggle.grid_points == 0 {
            return Err(Error::Config(
                "audit needs permutations >= 1, alpha in (0, 1], wiggle.sims >= 100 and wiggle.grid_points >= 1".into(),
            ));
        }
        if let Some(y) = self.tasks.label_year {
            if !self.years().contains(&y) {
                return Err(Error::Config(format!("tasks.label_year {y} is not a synthetic year")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub force: bool,
    /// Thread cap for parallel stages; 0 keeps rayon's default.
    pub workers: usize,
    pub quiet: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileRecord {
    pub path: String,
    pub fingerprint: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub stage: String,
    pub version: String,
    pub params_fingerprint: String,
    pub params: serde_json::Value,
    pub inputs: Vec<FileRecord>,
    pub outputs: Vec<FileRecord>,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageOutcome {
    pub stage: String,
    pub skipped: bool,
    pub seconds: f64,
}

pub struct Pipeline {
    pub config: PipelineConfig,
    pub dir: PathBuf,
    pub options: RunOptions,
    pub outcomes: Vec<StageOutcome>,
}

fn mode_tag(mode: WalkMode) -> &'static str {
    mode.name()
}

impl Pipeline {
    pub fn new(config: PipelineConfig, dir: impl Into<PathBuf>, options: RunOptions) -> Result<Self> {
        config.validate()?;
        Ok(Pipeline { config, dir: dir.into(), options, outcomes: Vec::new() })
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.dir.join(rel)
    }

    pub fn graph_path(&self, year: i32) -> PathBuf {
        edgelist::year_path(&self.path("graphs"), year)
    }

    pub fn corpus_path(&self, mode: WalkMode, year: i32) -> PathBuf {
        self.path(&format!("corpus/{}_{year}.bin", mode_tag(mode)))
    }

    pub fn embedding_path(&self, mode: WalkMode, year: i32) -> PathBuf {
        self.path(&format!("emb/{}_{year}.emb", mode_tag(mode)))
    }

    /// Base-year frame embedding; the base year itself is already in frame.
    pub fn aligned_path(&self, mode: WalkMode, year: i32) -> PathBuf {
        if year == self.base_year() {
            return self.embedding_path(mode, year);
        }
        self.path(&format!("emb/{}_{year}_aligned.emb", mode_tag(mode)))
    }

    pub fn partition_path(&self, mode: WalkMode, year: i32) -> PathBuf {
        self.path(&format!("partition/{}_{year}.part", mode_tag(mode)))
    }

    pub fn report_paths(&self) -> (PathBuf, PathBuf) {
        (self.path("report.json"), self.path("report.csv"))
    }

    fn base_year(&self) -> i32 {
        self.config.synth.start_year
    }

    fn manifest_path(&self, stage: &str) -> PathBuf {
        self.path(&format!("manifests/{stage}.json"))
    }

    fn relative(&self, p: &Path) -> String {
        p.strip_prefix(&self.dir).unwrap_or(p).to_string_lossy().into_owned()
    }

    fn records(&self, paths: &[PathBuf]) -> Result<Vec<FileRecord>> {
        paths
            .iter()
            .map(|p| Ok(FileRecord { path: self.relative(p), fingerprint: hex(file_fingerprint(p)?) }))
            .collect()
    }

    fn is_current(&self, stage: &str, params_fp: &str, inputs: &[FileRecord], outputs: &[PathBuf]) -> bool {
        let Ok(m) = read_json::<Manifest>(&self.manifest_path(stage)) else {
            return false;
        };
        if m.version != env!("CARGO_PKG_VERSION") || m.params_fingerprint != params_fp || m.inputs != inputs {
            return false;
        }
        match self.records(outputs) {
            Ok(current) => current == m.outputs,
            Err(_) => false,
        }
    }

    fn stage(
        &mut self,
        name: &str,
        params: serde_json::Value,
        inputs: Vec<PathBuf>,
        outputs: Vec<PathBuf>,
        body: impl FnOnce(&Pipeline) -> Result<()>,
    ) -> Result<()> {
        for p in &inputs {
            if !p.is_file() {
                return Err(Error::MissingInput(p.clone()));
            }
        }
        let params_fp = hex(rng::fnv1a(&serde_json::to_vec(&params).expect("serializable params")));
        let input_records = self.records(&inputs)?;
        if !self.options.force && self.is_current(name, &params_fp, &input_records, &outputs) {
            self.note(&format!("{name}: up to date, skipped"));
            self.outcomes.push(StageOutcome { stage: name.to_string(), skipped: true, seconds: 0.0 });
            return Ok(());
        }
        self.note(&format!("{name}: running"));
        let start = Instant::now();
        body(self)?;
        let seconds = start.elapsed().as_secs_f64();
        for p in &outputs {
            if !p.is_file() {
                return Err(Error::format(p, format!("stage {name} did not produce this output")));
            }
        }
        let manifest = Manifest {
            stage: name.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            params_fingerprint: params_fp,
            params,
            inputs: input_records,
            outputs: self.records(&outputs)?,
            wall_seconds: seconds,
        };
        write_json(&self.manifest_path(name), &manifest)?;
        self.note(&format!("{name}: done in {seconds:.1}s"));
        self.outcomes.push(StageOutcome { stage: name.to_string(), skipped: false, seconds });
        Ok(())
    }

    fn note(&self, msg: &str) {
        if !self.options.quiet {
            eprintln!("[pipeline] {msg}");
        }
    }

    /// Runs every stage in order and returns the merged report.
    pub fn run(&mut self) -> Result<Report> {
        let cfg = self.config.clone();
        let years = cfg.years();
        let seed = cfg.seed;
        write_json(&self.path("config.json"), &cfg)?;

        let graph_paths: Vec<PathBuf> = years.iter().map(|&y| self.graph_path(y)).collect();
        let mut outs = graph_paths.clone();
        outs.extend([self.path("attributes.jsonl"), self.path("tasks.jsonl"), self.path("metrics/synth.json")]);
        self.stage("synth", json!({"seed": seed, "synth": cfg.synth, "tasks": cfg.task_config()}), vec![], outs, |p| {
            p.run_synth()
        })?;

        for &mode in &cfg.modes {
            let tag = mode_tag(mode);
            let mut outs: Vec<PathBuf> = years.iter().map(|&y| self.corpus_path(mode, y)).collect();
            outs.push(self.path(&format!("metrics/walk_{tag}.json")));
            self.stage(&format!("walk-{tag}"), json!({"walk": cfg.walk_config(mode)}), graph_paths.clone(), outs, |p| {
                p.run_walk(mode)
            })?;

            let corpora: Vec<PathBuf> = years.iter().map(|&y| self.corpus_path(mode, y)).collect();
            let mut outs: Vec<PathBuf> = years.iter().map(|&y| self.embedding_path(mode, y)).collect();
            outs.push(self.path(&format!("metrics/train_{tag}.json")));
            let train = cfg.train_config(self.options.workers);
            self.stage(&format!("train-{tag}"), json!({"train": train}), corpora, outs, |p| p.run_train(mode))?;

            let embs: Vec<PathBuf> = years.iter().map(|&y| self.embedding_path(mode, y)).collect();
            let mut outs: Vec<PathBuf> = years[1..]
                .iter()
                .flat_map(|&y| [self.path(&format!("align/{tag}_{y}.aln")), self.aligned_path(mode, y)])
                .collect();
            outs.push(self.path(&format!("metrics/align_{tag}.json")));
            self.stage(&format!("align-{tag}"), json!({"seed": seed, "align": cfg.align}), embs, outs, |p| {
                p.run_align(mode)
            })?;
        }

        let grid_path = self.path("grid/grid.grid");
        self.stage("grid", json!({"k": cfg.partition.k, "dim": cfg.train.dim}), vec![], vec![grid_path.clone()], |p| {
            let grid = partition::fibonacci_grid(p.config.partition.k, p.config.train.dim)?;
            artifacts::write_grid(&p.path("grid/grid.grid"), &grid)
        })?;

        for &mode in &cfg.modes {
            let tag = mode_tag(mode);
            let mut inputs: Vec<PathBuf> = years.iter().map(|&y| self.aligned_path(mode, y)).collect();
            inputs.push(grid_path.clone());
            let mut outs: Vec<PathBuf> = years.iter().map(|&y| self.partition_path(mode, y)).collect();
            if cfg.partition.whiten {
                outs.push(self.path(&format!("whiten/{tag}.json")));
            }
            outs.push(self.path(&format!("metrics/partition_{tag}.json")));
            self.stage(&format!("partition-{tag}"), json!({"partition": cfg.partition}), inputs, outs, |p| {
                p.run_partition(mode)
            })?;
        }

        let audit_mode = cfg.modes[0];
        let outs = vec![self.path("audit/input.json"), self.path("audit/result.json"), self.path("audit/funnel.csv")];
        self.stage(
            "audit",
            json!({"seed": seed, "audit": cfg.audit, "mode": audit_mode}),
            vec![self.partition_path(audit_mode, self.base_year())],
            outs,
            |p| p.run_audit(audit_mode),
        )?;

        for &mode in &cfg.modes {
            let tag = mode_tag(mode);
            let inputs = vec![self.path("tasks.jsonl"), self.embedding_path(mode, self.base_year())];
            self.stage(&format!("eval-{tag}"), json!({"probe": cfg.probe_config()}), inputs, vec![self.path(&format!("eval/{tag}.json"))], |p| {
                p.run_eval(mode)
            })?;
        }

        let report = collect_report(&self.dir, &cfg)?;
        let (json_path, csv_path) = self.report_paths();
        crate::report::write_bundle(&json_path, &csv_path, &report)?;
        Ok(report)
    }

    fn run_synth(&self) -> Result<()> {
        let cfg = &self.config;
        let (graphs, attrs) = synth::generate_synthetic(&cfg.synth, cfg.seed)?;
        for g in &graphs {
            edgelist::write(&self.graph_path(g.year()), g)?;
        }
        attributes::write(&self.path("attributes.jsonl"), &attrs)?;
        let suite = eval::build_tasks(&attrs, &graphs, &cfg.task_config())?;
        tasks::write(&self.path("tasks.jsonl"), &suite.tasks)?;
        let metrics = SynthMetrics {
            nodes: attrs.num_nodes(),
            twin_pairs: attrs.twins.len(),
            couples: attrs.couples.len(),
            graphs: graphs.iter().map(graph_summary).collect(),
            tasks: suite.tasks.iter().map(|t| (t.name.clone(), t.examples.len(), t.positive_share())).collect(),
            warnings: suite.warnings,
        };
        write_json(&self.path("metrics/synth.json"), &metrics)
    }

    fn run_walk(&self, mode: WalkMode) -> Result<()> {
        let mut rows = Vec::new();
        for year in self.config.years() {
            let graph = edgelist::read(&self.graph_path(year))?;
            let corpus = walker::generate_walks_parallel(&graph, &self.config.walk_config(mode), self.options.workers)?;
            let (measured, theoretical, run4) = if mode == WalkMode::Aware {
                let stats = walker::persistence_stats(&corpus, &graph)?;
                let run4 = walker::same_layer_run_frequency(&corpus, 4)?;
                (Some(stats.overall_measured), Some(stats.overall_theoretical), Some(run4))
            } else {
                (None, None, None)
            };
            rows.push(PersistenceRow {
                mode: mode.name().to_string(),
                year,
                walks: corpus.num_walks(),
                tokens: corpus.num_tokens(),
                stay_measured: measured,
                stay_theoretical: theoretical,
                same_layer_run_4: run4,
            });
            corpus::write(&self.corpus_path(mode, year), &corpus)?;
        }
        write_json(&self.path(&format!("metrics/walk_{}.json", mode.name())), &rows)
    }

    fn run_train(&self, mode: WalkMode) -> Result<()> {
        let train = self.config.train_config(self.options.workers);
        let mut rows = Vec::new();
        for year in self.config.years() {
            let corpus = corpus::read(&self.corpus_path(mode, year))?;
            let (emb, report) = sgns::train_with_report(&corpus, &train)?;
            embedding::write(&self.embedding_path(mode, year), &emb)?;
            rows.push(TrainRow { mode: mode.name().to_string(), year, epoch_losses: report.epoch_losses });
        }
        write_json(&self.path(&format!("metrics/train_{}.json", mode.name())), &rows)
    }

    fn run_align(&self, mode: WalkMode) -> Result<()> {
        let cfg = &self.config;
        let base = self.base_year();
        let target = embedding::read(&self.embedding_path(mode, base))?;
        let mut rows = Vec::new();
        for year in cfg.years().into_iter().skip(1) {
            let source = embedding::read(&self.embedding_path(mode, year))?;
            let nodes = align::common_nodes(&source, &target);
            let available = nodes.len() * nodes.len().saturating_sub(1) / 2;
            let pairs = cfg.align.eval_pairs.min(available);
            for method in [AlignMethod::Ols, AlignMethod::Procrustes] {
                let map = align::fit_embeddings(&source, &target, method)?;
                let aligned = align::apply(&map, &source)?;
                let vs_target = align::evaluate_pairs(&aligned, &target, &nodes, pairs, cfg.seed)?;
                let before_after = align::evaluate_pairs(&source, &aligned, &nodes, pairs, cfg.seed)?;
                rows.push(AlignRow {
                    mode: mode.name().to_string(),
                    year,
                    distance: year - base,
                    method: method.name().to_string(),
                    aligned_vs_target_pearson: vs_target.pearson,
                    aligned_vs_target_spearman: vs_target.spearman,
                    before_after_pearson: before_after.pearson,
                    before_after_spearman: before_after.spearman,
                    pairs: vs_target.n_pairs,
                });
                if method == cfg.align.method {
                    artifacts::write_alignment(&self.path(&format!("align/{}_{year}.aln", mode.name())), &map)?;
                    embedding::write(&self.aligned_path(mode, year), &aligned)?;
                }
            }
        }
        write_json(&self.path(&format!("metrics/align_{}.json", mode.name())), &rows)
    }

    fn run_partition(&self, mode: WalkMode) -> Result<()> {
        let cfg = &self.config;
        let grid = artifacts::read_grid(&self.path("grid/grid.grid"))?;
        let base = self.base_year();
        let base_emb = embedding::read(&self.aligned_path(mode, base))?;
        let base_nodes = base_emb.present_nodes();
        let whitening = if cfg.partition.whiten {
            let w = partition::fit_whitening(&base_emb, &base_nodes, cfg.partition.floor)?;
            write_json(&self.path(&format!("whiten/{}.json", mode.name())), &w)?;
            Some(w)
        } else {
            None
        };
        let mut clusters = Vec::new();
        let mut retention = Vec::new();
        let raw = partition::assign(&base_emb, &grid, None, &base_nodes)?;
        clusters.push(ClusterRow {
            mode: mode.name().to_string(),
            year: base,
            whitened: false,
            balance: partition::balance_metrics(&raw.counts)?,
        });
        let mut base_partition: Option<Partition> = None;
        for year in cfg.years() {
            let emb = if year == base { base_emb.clone() } else { embedding::read(&self.aligned_path(mode, year))? };
            let nodes = emb.present_nodes();
            let part = partition::assign(&emb, &grid, whitening.as_ref(), &nodes)?;
            clusters.push(ClusterRow {
                mode: mode.name().to_string(),
                year,
                whitened: whitening.is_some(),
                balance: partition::balance_metrics(&part.counts)?,
            });
            match &base_partition {
                None => base_partition = Some(part.clone()),
                Some(bp) => {
                    let common: Vec<NodeId> =
                        nodes.iter().copied().filter(|v| bp.cluster(*v).is_some() || base_nodes.binary_search(v).is_ok()).collect();
                    retention.push(RetentionRow {
                        mode: mode.name().to_string(),
                        year,
                        retention: partition::retention(bp, &part, &common)?,
                        common_nodes: common.len(),
                    });
                }
            }
            artifacts::write_partition(&self.partition_path(mode, year), &part)?;
        }
        write_json(&self.path(&format!("metrics/partition_{}.json", mode.name())), &PartitionMetrics { clusters, retention })
    }

    fn run_audit(&self, mode: WalkMode) -> Result<()> {
        let cfg = &self.config;
        let part = artifacts::read_partition(&self.partition_path(mode, self.base_year()))?;
        let assigned: Vec<NodeId> =
            (0..part.assignment.len() as NodeId).filter(|&v| part.cluster(v).is_some()).collect();
        let size = (cfg.audit.sample_size as usize).min(assigned.len());
        let mut rng = rng::keyed(cfg.seed, domain::AUDIT, u64::MAX);
        let mut sample = vec![0u64; part.k];
        for i in index::sample(&mut rng, assigned.len(), size) {
            sample[part.cluster(assigned[i]).expect("assigned node") as usize] += 1;
        }
        let input = AuditInput::new(part.counts.clone(), sample, cfg.audit.permutations, cfg.seed);
        let result = audit::audit(&input, cfg.audit.alpha, &cfg.audit.wiggle)?;
        write_json(&self.path("audit/input.json"), &input)?;
        write_json(&self.path("audit/result.json"), &result)?;
        let points = audit::funnel(&input, &result);
        crate::io::atomic_write(&self.path("audit/funnel.csv"), artifacts::funnel_csv(&points).as_bytes())
    }

    fn run_eval(&self, mode: WalkMode) -> Result<()> {
        let suite = tasks::read(&self.path("tasks.jsonl"))?;
        let emb = embedding::read(&self.embedding_path(mode, self.base_year()))?;
        let report = evaluate_tasks(&suite, &emb, &self.config.probe_config());
        write_json(&self.path(&format!("eval/{}.json", mode.name())), &report)
    }
}

/// Probe results for every task plus the reasons tasks were skipped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub results: Vec<eval::ProbeResult>,
    pub warnings: Vec<String>,
}

pub fn evaluate_tasks(suite: &[eval::TaskDataset], emb: &sgns::EmbeddingMatrix, cfg: &ProbeConfig) -> EvalReport {
    let mut report = EvalReport { results: Vec::new(), warnings: Vec::new() };
    for task in suite {
        match eval::train_probe(task, emb, cfg) {
            Ok((_, r)) => report.results.push(r),
            Err(e) => report.warnings.push(format!("{}: skipped ({e})", task.name)),
        }
    }
    report
}

fn graph_summary(g: &MultiplexGraph) -> GraphSummary {
    let edges = g
        .layer_names()
        .iter()
        .enumerate()
        .map(|(i, name)| (name.clone(), g.layer(LayerId(i as u16)).num_entries() / 2))
        .collect();
    let n = g.num_nodes() as usize;
    let total = g.flattened().num_entries();
    GraphSummary {
        year: g.year(),
        edges,
        mean_degree: total as f64 / n.max(1) as f64,
        isolated: (0..g.num_nodes()).filter(|&v| g.is_isolated(v)).count(),
    }
}

/// Merges the per-stage metric files of a run directory into one report.
pub fn collect_report(dir: &Path, cfg: &PipelineConfig) -> Result<Report> {
    let synth: SynthMetrics = read_json(&dir.join("metrics/synth.json"))?;
    let mut report = Report {
        seed: cfg.seed,
        warnings: synth.warnings.clone(),
        synth,
        persistence: Vec::new(),
        training: Vec::new(),
        alignment: Vec::new(),
        clusters: Vec::new(),
        retention: Vec::new(),
        audit: None,
        probes: Vec::new(),
    };
    for &mode in &cfg.modes {
        let tag = mode.name();
        report.persistence.extend(read_json::<Vec<PersistenceRow>>(&dir.join(format!("metrics/walk_{tag}.json")))?);
        report.training.extend(read_json::<Vec<TrainRow>>(&dir.join(format!("metrics/train_{tag}.json")))?);
        report.alignment.extend(read_json::<Vec<AlignRow>>(&dir.join(format!("metrics/align_{tag}.json")))?);
        let p: PartitionMetrics = read_json(&dir.join(format!("metrics/partition_{tag}.json")))?;
        report.clusters.extend(p.clusters);
        report.retention.extend(p.retention);
        let ev: EvalReport = read_json(&dir.join(format!("eval/{tag}.json")))?;
        report.probes.extend(ev.results.iter().map(|r| ProbeRow {
            mode: tag.to_string(),
            task: r.task.clone(),
            metric: r.metric.clone(),
            value: r.test_metric,
            batch_size: r.batch_size,
            learning_rate: r.learning_rate,
            epochs_run: r.epochs_run,
        }));
        report.warnings.extend(ev.warnings.iter().map(|w| format!("{tag}: {w}")));
    }
    let result: audit::AuditResult = read_json(&dir.join("audit/result.json"))?;
    report.audit = Some(AuditSummary {
        mode: cfg.modes[0].name().to_string(),
        population_size: result.population_size,
        sample_size: result.sample_size,
        s_obs: result.s_obs,
        p_global: result.p_global,
        threshold: result.clusters.threshold,
        p_tmax: result.clusters.p_tmax,
        flagged: result.clusters.flags.clone(),
    });
    Ok(report)
}

/// Fingerprint of a config, used to label runs.
pub fn config_fingerprint(cfg: &PipelineConfig) -> u64 {
    Fingerprint::default().u64(rng::fnv1a(&serde_json::to_vec(cfg).expect("serializable config"))).finish()
}

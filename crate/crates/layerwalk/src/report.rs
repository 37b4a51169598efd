//! Metric rows written by pipeline stages and the merged report bundle.

use std::fmt::Write as _;
use std::path::Path;

use layerwalk_core::partition::BalanceMetrics;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::io::{atomic_write, read_json, write_json};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSummary {
    pub year: i32,
    pub edges: Vec<(String, usize)>,
    pub mean_degree: f64,
    pub isolated: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthMetrics {
    pub nodes: usize,
    pub twin_pairs: usize,
    pub couples: usize,
    pub graphs: Vec<GraphSummary>,
    pub tasks: Vec<(String, usize, Option<f64>)>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersistenceRow {
    pub mode: String,
    pub year: i32,
    pub walks: usize,
    pub tokens: usize,
    /// Only aware corpora expose the layer of each step.
    pub stay_measured: Option<f64>,
    pub stay_theoretical: Option<f64>,
    pub same_layer_run_4: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRow {
    pub mode: String,
    pub year: i32,
    pub epoch_losses: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignRow {
    pub mode: String,
    pub year: i32,
    pub distance: i32,
    pub method: String,
    /// Pairwise-cosine correlation between the aligned space and the base year.
    pub aligned_vs_target_pearson: f64,
    pub aligned_vs_target_spearman: f64,
    /// Pairwise-cosine correlation between the source space and its aligned image.
    pub before_after_pearson: f64,
    pub before_after_spearman: f64,
    pub pairs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterRow {
    pub mode: String,
    pub year: i32,
    pub whitened: bool,
    pub balance: BalanceMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetentionRow {
    pub mode: String,
    pub year: i32,
    pub retention: f64,
    pub common_nodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionMetrics {
    pub clusters: Vec<ClusterRow>,
    pub retention: Vec<RetentionRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditSummary {
    pub mode: String,
    pub population_size: u64,
    pub sample_size: u64,
    pub s_obs: f64,
    pub p_global: f64,
    pub threshold: f64,
    pub p_tmax: f64,
    pub flagged: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub mode: String,
    pub task: String,
    pub metric: String,
    pub value: f64,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs_run: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub seed: u64,
    pub synth: SynthMetrics,
    pub persistence: Vec<PersistenceRow>,
    pub training: Vec<TrainRow>,
    pub alignment: Vec<AlignRow>,
    pub clusters: Vec<ClusterRow>,
    pub retention: Vec<RetentionRow>,
    pub audit: Option<AuditSummary>,
    pub probes: Vec<ProbeRow>,
    pub warnings: Vec<String>,
}

/// Long-format CSV: `section,mode,year,key,value`.
pub fn to_csv(report: &Report) -> String {
    let mut out = String::from("section,mode,year,key,value\n");
    let mut row = |section: &str, mode: &str, year: Option<i32>, key: &str, value: f64| {
        let year = year.map(|y| y.to_string()).unwrap_or_default();
        let _ = writeln!(out, "{section},{mode},{year},{key},{value}");
    };
    for g in &report.synth.graphs {
        for (layer, count) in &g.edges {
            row("graph", "", Some(g.year), &format!("edges_{layer}"), *count as f64);
        }
        row("graph", "", Some(g.year), "mean_degree", g.mean_degree);
    }
    for p in &report.persistence {
        if let Some(v) = p.stay_measured {
            row("persistence", &p.mode, Some(p.year), "stay_measured", v);
        }
        if let Some(v) = p.stay_theoretical {
            row("persistence", &p.mode, Some(p.year), "stay_theoretical", v);
        }
        if let Some(v) = p.same_layer_run_4 {
            row("persistence", &p.mode, Some(p.year), "same_layer_run_4", v);
        }
    }
    for t in &report.training {
        if let Some(&last) = t.epoch_losses.last() {
            row("training", &t.mode, Some(t.year), "final_loss", last);
        }
    }
    for a in &report.alignment {
        let m = &a.method;
        row("alignment", &a.mode, Some(a.year), &format!("{m}_aligned_vs_target_pearson"), a.aligned_vs_target_pearson);
        row("alignment", &a.mode, Some(a.year), &format!("{m}_aligned_vs_target_spearman"), a.aligned_vs_target_spearman);
        row("alignment", &a.mode, Some(a.year), &format!("{m}_before_after_pearson"), a.before_after_pearson);
        row("alignment", &a.mode, Some(a.year), &format!("{m}_before_after_spearman"), a.before_after_spearman);
    }
    for c in &report.clusters {
        let tag = if c.whitened { "whitened" } else { "raw" };
        row("clusters", &c.mode, Some(c.year), &format!("{tag}_gini"), c.balance.gini);
        row("clusters", &c.mode, Some(c.year), &format!("{tag}_fraction_for_half"), c.balance.fraction_for_half);
        for (i, v) in c.balance.curve.iter().enumerate() {
            row("cluster_cdf", &c.mode, Some(c.year), &format!("{tag}_{}", i + 1), *v);
        }
    }
    for r in &report.retention {
        row("retention", &r.mode, Some(r.year), "retention", r.retention);
    }
    if let Some(a) = &report.audit {
        row("audit", &a.mode, None, "s_obs", a.s_obs);
        row("audit", &a.mode, None, "p_global", a.p_global);
        row("audit", &a.mode, None, "threshold", a.threshold);
        row("audit", &a.mode, None, "flagged", a.flagged.len() as f64);
    }
    for p in &report.probes {
        row("probe", &p.mode, None, &format!("{}_{}", p.task, p.metric), p.value);
    }
    out
}

pub fn write_bundle(json_path: &Path, csv_path: &Path, report: &Report) -> Result<()> {
    write_json(json_path, report)?;
    atomic_write(csv_path, to_csv(report).as_bytes())
}

pub fn read(path: &Path) -> Result<Report> {
    read_json(path)
}

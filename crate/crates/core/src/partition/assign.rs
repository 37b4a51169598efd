use alloc::vec::Vec;

use nalgebra::DMatrix;

use super::grid::FibonacciGrid;
use super::whiten::WhiteningTransform;
use crate::error::{Error, Result};
use crate::graph::NodeId;
use crate::linalg::gather_rows;

/// Cluster id of nodes that were not assigned (zero-norm or not requested).
pub const UNASSIGNED: u32 = u32::MAX;

/// A later direction only wins if it beats the incumbent by more than this
/// cosine margin, so exact and rounding-level ties go to the lowest index.
const TIE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Partition {
    pub k: usize,
    /// Cluster per node id, `UNASSIGNED` where absent.
    pub assignment: Vec<u32>,
    pub counts: Vec<u64>,
    /// Zero-norm rows that could not be placed in any cell.
    pub unassignable: Vec<NodeId>,
    pub grid_fingerprint: u64,
    pub embedding_fingerprint: u64,
}

impl Partition {
    pub fn cluster(&self, v: NodeId) -> Option<u32> {
        self.assignment.get(v as usize).copied().filter(|&c| c != UNASSIGNED)
    }

    pub fn num_assigned(&self) -> u64 {
        self.counts.iter().sum()
    }
}

fn nearest(grid: &FibonacciGrid, x: &[f64]) -> u32 {
    let norm = libm::sqrt(x.iter().map(|v| v * v).sum::<f64>());
    if !(norm > 0.0) || !norm.is_finite() {
        return UNASSIGNED;
    }
    let mut best = 0u32;
    let mut best_cos = f64::NEG_INFINITY;
    for j in 0..grid.k {
        let dot: f64 = grid.direction(j).iter().zip(x).map(|(g, v)| g * v).sum();
        let cos = dot / norm;
        if cos > best_cos + TIE_EPS {
            best = j as u32;
            best_cos = cos;
        }
    }
    best
}

/// Nearest grid direction by cosine for every row of `rows`.
pub fn assign_rows(rows: &DMatrix<f64>, grid: &FibonacciGrid) -> Result<Vec<u32>> {
    if rows.ncols() != grid.dim {
        return Err(Error::DimensionMismatch { expected: grid.dim, actual: rows.ncols() });
    }
    // row-major copy keeps the inner loop contiguous
    let d = grid.dim;
    let flat: Vec<f64> = rows.transpose().as_slice().to_vec();
    #[cfg(feature = "std")]
    {
        use rayon::prelude::*;
        Ok(flat.par_chunks(d.max(1)).map(|x| nearest(grid, x)).collect())
    }
    #[cfg(not(feature = "std"))]
    {
        Ok(flat.chunks(d.max(1)).map(|x| nearest(grid, x)).collect())
    }
}

/// Partitions the embeddings of `nodes`, optionally whitening them first.
pub fn assign(
    emb: &crate::sgns::EmbeddingMatrix,
    grid: &FibonacciGrid,
    whitening: Option<&WhiteningTransform>,
    nodes: &[NodeId],
) -> Result<Partition> {
    if emb.dim() != grid.dim {
        return Err(Error::DimensionMismatch { expected: grid.dim, actual: emb.dim() });
    }
    let mut rows = gather_rows(emb, nodes)?;
    if let Some(w) = whitening {
        rows = w.apply_rows(&rows)?;
    }
    let clusters = assign_rows(&rows, grid)?;
    let len = nodes.iter().map(|&v| v as usize + 1).max().unwrap_or(0).max(emb.meta.num_nodes as usize);
    let mut assignment = alloc::vec![UNASSIGNED; len];
    let mut counts = alloc::vec![0u64; grid.k];
    let mut unassignable = Vec::new();
    for (&v, &c) in nodes.iter().zip(&clusters) {
        assignment[v as usize] = c;
        if c == UNASSIGNED {
            unassignable.push(v);
        } else {
            counts[c as usize] += 1;
        }
    }
    Ok(Partition {
        k: grid.k,
        assignment,
        counts,
        unassignable,
        grid_fingerprint: grid.fingerprint(),
        embedding_fingerprint: emb.fingerprint(),
    })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BalanceMetrics {
    /// Cumulative share of points held by the largest `i + 1` clusters.
    pub curve: Vec<f64>,
    pub gini: f64,
    /// Smallest fraction of clusters that together hold at least half the points.
    pub fraction_for_half: f64,
    pub max_share: f64,
    /// Largest cluster share over the mean share `1 / k`.
    pub max_over_mean: f64,
    pub empty_clusters: usize,
}

/// Size-distribution summary of a partition's cluster counts.
pub fn balance_metrics(counts: &[u64]) -> Result<BalanceMetrics> {
    let k = counts.len();
    let total: u64 = counts.iter().sum();
    if k == 0 || total == 0 {
        return Err(Error::Empty("partition"));
    }
    let mut sorted = counts.to_vec();
    sorted.sort_unstable_by(|a, b| b.cmp(a));
    let n = total as f64;
    let mut curve = Vec::with_capacity(k);
    let mut acc = 0u64;
    let mut fraction_for_half = 1.0;
    let mut found = false;
    for (i, &c) in sorted.iter().enumerate() {
        acc += c;
        curve.push(acc as f64 / n);
        if !found && 2 * acc >= total {
            fraction_for_half = (i + 1) as f64 / k as f64;
            found = true;
        }
    }
    // sum_{i<j} |x_i - x_j| over descending order equals sum_i x_i (k - 1 - 2i)
    let pair_sum: f64 = sorted.iter().enumerate().map(|(i, &c)| c as f64 * (k as f64 - 1.0 - 2.0 * i as f64)).sum();
    let gini = 2.0 * pair_sum / (2.0 * k as f64 * n);
    let max_share = sorted[0] as f64 / n;
    Ok(BalanceMetrics {
        curve,
        gini,
        fraction_for_half,
        max_share,
        max_over_mean: max_share * k as f64,
        empty_clusters: counts.iter().filter(|&&c| c == 0).count(),
    })
}

/// Fraction of `common` nodes assigned to the same cluster in both partitions.
pub fn retention(base: &Partition, later: &Partition, common: &[NodeId]) -> Result<f64> {
    if base.grid_fingerprint != later.grid_fingerprint || base.k != later.k {
        return Err(Error::Config("partitions were built on different grids".into()));
    }
    if common.is_empty() {
        return Err(Error::Empty("common node set"));
    }
    let kept = common.iter().filter(|&&v| matches!((base.cluster(v), later.cluster(v)), (Some(a), Some(b)) if a == b)).count();
    Ok(kept as f64 / common.len() as f64)
}

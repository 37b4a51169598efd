//! Alignment maps, grids, partitions, whitening transforms and audit outputs.

use std::fmt::Write as _;
use std::path::Path;

use layerwalk_core::align::{AlignMethod, LinearAlignment};
use layerwalk_core::audit::FunnelPoint;
use layerwalk_core::partition::{FibonacciGrid, GridConstruction, Partition};
use serde::{Deserialize, Serialize};

use super::{encode, f64_bytes, u32_bytes, Magic, Reader};
use crate::error::Result;
use crate::io::{atomic_write, read_bytes};

pub const ALIGNMENT_MAGIC: Magic = *b"LWALN001";
pub const GRID_MAGIC: Magic = *b"LWGRID01";
pub const PARTITION_MAGIC: Magic = *b"LWPART01";

#[derive(Debug, Serialize, Deserialize)]
struct AlignmentHeader {
    method: AlignMethod,
    source_year: i32,
    target_year: i32,
    d_source: usize,
    d_target: usize,
    regularized: bool,
}

pub fn write_alignment(path: &Path, al: &LinearAlignment) -> Result<()> {
    let header = AlignmentHeader {
        method: al.method,
        source_year: al.source_year,
        target_year: al.target_year,
        d_source: al.d_source,
        d_target: al.d_target,
        regularized: al.regularized,
    };
    let mut payload = f64_bytes(&al.matrix);
    payload.extend(f64_bytes(&al.intercept));
    atomic_write(path, &encode(&ALIGNMENT_MAGIC, &header, &payload))
}

pub fn read_alignment(path: &Path) -> Result<LinearAlignment> {
    let bytes = read_bytes(path)?;
    let mut r = Reader::new(path, &bytes, &ALIGNMENT_MAGIC)?;
    let h: AlignmentHeader = r.json()?;
    let matrix = r.f64s(h.d_source.checked_mul(h.d_target).ok_or_else(|| r.error("shape overflow"))?)?;
    let intercept = r.f64s(h.d_target)?;
    r.finish()?;
    Ok(LinearAlignment {
        method: h.method,
        source_year: h.source_year,
        target_year: h.target_year,
        d_source: h.d_source,
        d_target: h.d_target,
        matrix,
        intercept,
        regularized: h.regularized,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct GridHeader {
    k: usize,
    dim: usize,
    construction: GridConstruction,
}

pub fn write_grid(path: &Path, grid: &FibonacciGrid) -> Result<()> {
    let header = GridHeader { k: grid.k, dim: grid.dim, construction: grid.construction };
    atomic_write(path, &encode(&GRID_MAGIC, &header, &f64_bytes(&grid.directions)))
}

pub fn read_grid(path: &Path) -> Result<FibonacciGrid> {
    let bytes = read_bytes(path)?;
    let mut r = Reader::new(path, &bytes, &GRID_MAGIC)?;
    let h: GridHeader = r.json()?;
    let directions = r.f64s(h.k.checked_mul(h.dim).ok_or_else(|| r.error("shape overflow"))?)?;
    r.finish()?;
    Ok(FibonacciGrid { k: h.k, dim: h.dim, construction: h.construction, directions })
}

/// JSON summary stored ahead of the node-to-cluster array.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PartitionHeader {
    pub k: usize,
    pub num_nodes: usize,
    pub counts: Vec<u64>,
    pub unassignable: Vec<u32>,
    pub grid_fingerprint: u64,
    pub embedding_fingerprint: u64,
}

pub fn write_partition(path: &Path, p: &Partition) -> Result<()> {
    let header = PartitionHeader {
        k: p.k,
        num_nodes: p.assignment.len(),
        counts: p.counts.clone(),
        unassignable: p.unassignable.clone(),
        grid_fingerprint: p.grid_fingerprint,
        embedding_fingerprint: p.embedding_fingerprint,
    };
    atomic_write(path, &encode(&PARTITION_MAGIC, &header, &u32_bytes(&p.assignment)))
}

pub fn read_partition(path: &Path) -> Result<Partition> {
    let bytes = read_bytes(path)?;
    let mut r = Reader::new(path, &bytes, &PARTITION_MAGIC)?;
    let h: PartitionHeader = r.json()?;
    let assignment = r.u32s(h.num_nodes)?;
    r.finish()?;
    if h.counts.len() != h.k {
        return Err(r.error("counts length differs from k"));
    }
    let mut counts = vec![0u64; h.k];
    for &c in &assignment {
        if c != layerwalk_core::partition::UNASSIGNED {
            *counts.get_mut(c as usize).ok_or_else(|| r.error(format!("cluster {c} outside k = {}", h.k)))? += 1;
        }
    }
    if counts != h.counts {
        return Err(r.error("cluster counts do not match the assignment"));
    }
    Ok(Partition {
        k: h.k,
        assignment,
        counts,
        unassignable: h.unassignable,
        grid_fingerprint: h.grid_fingerprint,
        embedding_fingerprint: h.embedding_fingerprint,
    })
}

/// Funnel plot data: `cluster,share,deviation,lower,upper,flagged`.
pub fn funnel_csv(points: &[FunnelPoint]) -> String {
    let mut out = String::from("cluster,share,deviation,lower,upper,flagged\n");
    for p in points {
        let _ = writeln!(out, "{},{},{},{},{},{}", p.cluster, p.share, p.deviation, -p.envelope, p.envelope, p.flagged);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use layerwalk_core::partition::fibonacci_grid;

    #[test]
    fn binary_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let al = LinearAlignment::identity(3).with_years(2011, 2009);
        let p = dir.path().join("m.aln");
        write_alignment(&p, &al).unwrap();
        assert_eq!(read_alignment(&p).unwrap(), al);

        let grid = fibonacci_grid(12, 4).unwrap();
        let p = dir.path().join("g.grid");
        write_grid(&p, &grid).unwrap();
        assert_eq!(read_grid(&p).unwrap(), grid);

        let part = Partition {
            k: 3,
            assignment: vec![0, 2, 2, layerwalk_core::partition::UNASSIGNED],
            counts: vec![1, 0, 2],
            unassignable: vec![3],
            grid_fingerprint: 7,
            embedding_fingerprint: 9,
        };
        let p = dir.path().join("p.part");
        write_partition(&p, &part).unwrap();
        assert_eq!(read_partition(&p).unwrap(), part);
        assert!(read_grid(&dir.path().join("p.part")).is_err());
    }
}

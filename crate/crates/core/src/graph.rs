//! Multiplex graph: one shared node set, one compressed undirected adjacency
//! per relation layer.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};

pub type NodeId = u32;

/// Dense layer index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LayerId(pub u16);

impl LayerId {
    pub const FAMILY: LayerId = LayerId(0);
    pub const HOUSEHOLD: LayerId = LayerId(1);
    pub const NEIGHBOR: LayerId = LayerId(2);
    pub const COLLEAGUE: LayerId = LayerId(3);
    pub const CLASSMATE: LayerId = LayerId(4);

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for LayerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

pub const CANONICAL_LAYERS: [&str; 5] = ["family", "household", "neighbor", "colleague", "classmate"];

pub fn canonical_layer_names() -> Vec<String> {
    CANONICAL_LAYERS.iter().map(|s| s.to_string()).collect()
}

/// Compressed adjacency for one layer.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Csr {
    offsets: Vec<usize>,
    neighbors: Vec<NodeId>,
}

impl Csr {
    /// Wraps raw arrays without checking any invariant; use
    /// [`MultiplexGraph::validate`] to audit the result.
    pub fn from_raw(offsets: Vec<usize>, neighbors: Vec<NodeId>) -> Self {
        Csr { offsets, neighbors }
    }

    pub fn empty(num_nodes: usize) -> Self {
        Csr { offsets: alloc::vec![0; num_nodes + 1], neighbors: Vec::new() }
    }

    /// Builds from directed pairs; pairs are sorted and deduplicated.
    fn from_pairs(num_nodes: usize, mut pairs: Vec<(NodeId, NodeId)>) -> Self {
        pairs.sort_unstable();
        pairs.dedup();
        let mut offsets = alloc::vec![0usize; num_nodes + 1];
        for &(u, _) in &pairs {
            offsets[u as usize + 1] += 1;
        }
        for i in 0..num_nodes {
            offsets[i + 1] += offsets[i];
        }
        let neighbors = pairs.into_iter().map(|(_, v)| v).collect();
        Csr { offsets, neighbors }
    }

    #[inline]
    pub fn neighbors(&self, v: NodeId) -> &[NodeId] {
        let v = v as usize;
        &self.neighbors[self.offsets[v]..self.offsets[v + 1]]
    }

    #[inline]
    pub fn degree(&self, v: NodeId) -> usize {
        let v = v as usize;
        self.offsets[v + 1] - self.offsets[v]
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.neighbors(u).binary_search(&v).is_ok()
    }

    /// Number of adjacency entries (twice the undirected edge count).
    pub fn num_entries(&self) -> usize {
        self.neighbors.len()
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn raw_neighbors(&self) -> &[NodeId] {
        &self.neighbors
    }
}

/// One yearly snapshot of the multiplex network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiplexGraph {
    num_nodes: u32,
    year: i32,
    layer_names: Vec<String>,
    layers: Vec<Csr>,
}

impl MultiplexGraph {
    /// Builds a graph from undirected typed edges. Each edge may be listed in
    /// one or both directions; duplicates collapse.
    pub fn from_edges<I>(num_nodes: u32, year: i32, layer_names: Vec<String>, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (NodeId, NodeId, LayerId)>,
    {
        check_layer_names(&layer_names)?;
        let mut per_layer: Vec<Vec<(NodeId, NodeId)>> = alloc::vec![Vec::new(); layer_names.len()];
        for (u, v, l) in edges {
            if u >= num_nodes || v >= num_nodes {
                return Err(Error::MalformedInput(alloc::format!(
                    "edge ({u}, {v}) references a node >= {num_nodes}"
                )));
            }
            if l.index() >= layer_names.len() {
                return Err(Error::MalformedInput(alloc::format!("unknown layer id {l}")));
            }
            if u == v {
                return Err(Error::MalformedInput(alloc::format!("self-loop on node {u} in layer {l}")));
            }
            per_layer[l.index()].push((u, v));
            per_layer[l.index()].push((v, u));
        }
        let n = num_nodes as usize;
        let layers = per_layer.into_iter().map(|pairs| Csr::from_pairs(n, pairs)).collect();
        Ok(MultiplexGraph { num_nodes, year, layer_names, layers })
    }

    /// Assembles a graph from prebuilt layers without checking adjacency
    /// invariants.
    pub fn from_layers(num_nodes: u32, year: i32, layer_names: Vec<String>, layers: Vec<Csr>) -> Result<Self> {
        check_layer_names(&layer_names)?;
        if layers.len() != layer_names.len() {
            return Err(Error::DimensionMismatch { expected: layer_names.len(), actual: layers.len() });
        }
        for layer in &layers {
            if layer.offsets.len() != num_nodes as usize + 1 {
                return Err(Error::MalformedInput("offset array length must be num_nodes + 1".into()));
            }
        }
        Ok(MultiplexGraph { num_nodes, year, layer_names, layers })
    }

    #[inline]
    pub fn num_nodes(&self) -> u32 {
        self.num_nodes
    }

    #[inline]
    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn year(&self) -> i32 {
        self.year
    }

    pub fn set_year(&mut self, year: i32) {
        self.year = year;
    }

    pub fn layer_names(&self) -> &[String] {
        &self.layer_names
    }

    #[inline]
    pub fn layer(&self, l: LayerId) -> &Csr {
        &self.layers[l.index()]
    }

    pub fn layer_ids(&self) -> impl Iterator<Item = LayerId> + '_ {
        (0..self.layers.len()).map(|i| LayerId(i as u16))
    }

    #[inline]
    pub fn neighbors(&self, v: NodeId, l: LayerId) -> &[NodeId] {
        self.layers[l.index()].neighbors(v)
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId, l: LayerId) -> bool {
        self.layers[l.index()].has_edge(u, v)
    }

    /// Layers in which `v` has at least one neighbor, ascending.
    pub fn active_layers(&self, v: NodeId) -> impl Iterator<Item = LayerId> + '_ {
        self.layer_ids().filter(move |&l| self.layers[l.index()].degree(v) > 0)
    }

    pub fn is_isolated(&self, v: NodeId) -> bool {
        self.layers.iter().all(|l| l.degree(v) == 0)
    }

    /// Undirected edges `(u, v, layer)` with `u < v`, in canonical order.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId, LayerId)> + '_ {
        self.layer_ids().flat_map(move |l| {
            (0..self.num_nodes).flat_map(move |u| {
                self.neighbors(u, l).iter().filter(move |&&v| v > u).map(move |&v| (u, v, l))
            })
        })
    }

    pub fn num_edges(&self) -> usize {
        self.layers.iter().map(|l| l.num_entries() / 2).sum()
    }

    /// Union of all layers with duplicate neighbors collapsed.
    pub fn flattened(&self) -> Csr {
        let n = self.num_nodes as usize;
        let mut offsets = alloc::vec![0usize; n + 1];
        let mut neighbors = Vec::with_capacity(self.layers.iter().map(Csr::num_entries).sum());
        let mut scratch = Vec::new();
        for v in 0..self.num_nodes {
            scratch.clear();
            for layer in &self.layers {
                scratch.extend_from_slice(layer.neighbors(v));
            }
            scratch.sort_unstable();
            scratch.dedup();
            neighbors.extend_from_slice(&scratch);
            offsets[v as usize + 1] = neighbors.len();
        }
        Csr { offsets, neighbors }
    }

    /// Checks every structural invariant and summarizes per-layer statistics.
    pub fn validate(&self) -> ValidationReport {
        const MAX_VIOLATIONS: usize = 1000;
        let n = self.num_nodes as usize;
        let mut violations = Vec::new();
        let mut layers = Vec::with_capacity(self.layers.len());
        let mut total_entries = 0usize;
        for (li, csr) in self.layers.iter().enumerate() {
            let layer = LayerId(li as u16);
            let offsets_ok = csr.offsets.len() == n + 1
                && csr.offsets.first() == Some(&0)
                && csr.offsets.windows(2).all(|w| w[0] <= w[1])
                && csr.offsets.last() == Some(&csr.neighbors.len());
            if !offsets_ok {
                violations.push(Violation::BadOffsets { layer });
                layers.push(LayerStats { name: self.layer_names[li].clone(), ..LayerStats::default() });
                continue;
            }
            let mut active = 0usize;
            for u in 0..self.num_nodes {
                let adj = csr.neighbors(u);
                if !adj.is_empty() {
                    active += 1;
                }
                for (i, &v) in adj.iter().enumerate() {
                    if violations.len() >= MAX_VIOLATIONS {
                        break;
                    }
                    if v >= self.num_nodes {
                        violations.push(Violation::OutOfRange { layer, node: u, neighbor: v });
                        continue;
                    }
                    if v == u {
                        violations.push(Violation::SelfLoop { layer, node: u });
                    }
                    if i > 0 && adj[i - 1] == v {
                        violations.push(Violation::Duplicate { layer, node: u, neighbor: v });
                    } else if i > 0 && adj[i - 1] > v {
                        violations.push(Violation::Unsorted { layer, node: u });
                    }
                    if !csr.neighbors(v).contains(&u) {
                        violations.push(Violation::Asymmetric { layer, from: u, to: v });
                    }
                }
            }
            total_entries += csr.neighbors.len();
            let edges = csr.neighbors.len() / 2;
            layers.push(LayerStats {
                name: self.layer_names[li].clone(),
                active_nodes: active,
                edges,
                mean_degree: if active == 0 { 0.0 } else { csr.neighbors.len() as f64 / active as f64 },
            });
        }
        ValidationReport {
            valid: violations.is_empty(),
            num_nodes: n,
            mean_degree: if n == 0 { 0.0 } else { total_entries as f64 / n as f64 },
            layers,
            violations,
        }
    }
}

fn check_layer_names(names: &[String]) -> Result<()> {
    if names.len() > u16::MAX as usize {
        return Err(Error::Config("too many layers".into()));
    }
    for (i, a) in names.iter().enumerate() {
        if names[..i].contains(a) {
            return Err(Error::Config(alloc::format!("duplicate layer name {a:?}")));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LayerStats {
    pub name: String,
    /// Nodes with at least one edge in this layer.
    pub active_nodes: usize,
    pub edges: usize,
    /// Mean degree over active nodes.
    pub mean_degree: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Violation {
    BadOffsets { layer: LayerId },
    OutOfRange { layer: LayerId, node: NodeId, neighbor: NodeId },
    SelfLoop { layer: LayerId, node: NodeId },
    Duplicate { layer: LayerId, node: NodeId, neighbor: NodeId },
    Unsorted { layer: LayerId, node: NodeId },
    Asymmetric { layer: LayerId, from: NodeId, to: NodeId },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::BadOffsets { layer } => write!(f, "layer {layer}: malformed offsets"),
            Violation::OutOfRange { layer, node, neighbor } => {
                write!(f, "layer {layer}: node {node} lists out-of-range neighbor {neighbor}")
            }
            Violation::SelfLoop { layer, node } => write!(f, "layer {layer}: self-loop on {node}"),
            Violation::Duplicate { layer, node, neighbor } => {
                write!(f, "layer {layer}: node {node} lists {neighbor} twice")
            }
            Violation::Unsorted { layer, node } => write!(f, "layer {layer}: neighbors of {node} unsorted"),
            Violation::Asymmetric { layer, from, to } => {
                write!(f, "layer {layer}: {from} -> {to} has no reverse edge")
            }
        }
    }
}

/// Result of [`MultiplexGraph::validate`].
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ValidationReport {
    pub valid: bool,
    pub num_nodes: usize,
    /// Typed adjacency entries per node, all layers combined.
    pub mean_degree: f64,
    pub layers: Vec<LayerStats>,
    pub violations: Vec<Violation>,
}

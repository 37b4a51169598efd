//! Random-walk corpora over multiplex graphs.
//!
//! Three modes share one transition kernel:
//!
//! * `Flatten` walks the union of all layers, uniform over distinct neighbors.
//! * `Blind` follows the layer-persistence rule but emits person tokens only.
//! * `Aware` follows the same rule and interleaves a hub token naming the
//!   layer of every traversed edge: `u, [layer], v, [layer], w, ...`.
//!
//! Layer persistence: keep the previous layer with probability `p`; otherwise
//! (and at the first step, or when the previous layer has no neighbor here)
//! draw a layer uniformly among the layers where the current node has edges.
//! The previous layer may be drawn again.

use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{Csr, LayerId, MultiplexGraph, NodeId};
use crate::rng::{self, Fingerprint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum WalkMode {
    Flatten,
    Blind,
    Aware,
}

impl WalkMode {
    pub fn name(self) -> &'static str {
        match self {
            WalkMode::Flatten => "flatten",
            WalkMode::Blind => "blind",
            WalkMode::Aware => "aware",
        }
    }
}

impl core::str::FromStr for WalkMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "flatten" => Ok(WalkMode::Flatten),
            "blind" => Ok(WalkMode::Blind),
            "aware" => Ok(WalkMode::Aware),
            other => Err(Error::Config(alloc::format!("unknown walk mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct WalkConfig {
    pub mode: WalkMode,
    /// Probability of staying in the previous layer.
    pub persistence: f64,
    /// Person tokens per walk.
    pub walk_length: usize,
    pub walks_per_node: usize,
    pub seed: u64,
}

impl Default for WalkConfig {
    fn default() -> Self {
        WalkConfig { mode: WalkMode::Aware, persistence: 0.8, walk_length: 40, walks_per_node: 4, seed: 0 }
    }
}

impl WalkConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.persistence) {
            return Err(Error::Config(alloc::format!("persistence {} outside [0, 1]", self.persistence)));
        }
        if self.walk_length < 2 {
            return Err(Error::Config("walk_length must be at least 2".into()));
        }
        if self.walks_per_node < 1 {
            return Err(Error::Config("walks_per_node must be at least 1".into()));
        }
        Ok(())
    }
}

/// Token sequences plus the vocabulary layout that produced them.
///
/// Person tokens occupy `[0, num_nodes)`; hub tokens occupy
/// `[num_nodes, num_nodes + num_layers)` in layer order.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkCorpus {
    tokens: Vec<u32>,
    offsets: Vec<usize>,
    num_nodes: u32,
    num_layers: u16,
    config: WalkConfig,
    year: i32,
}

impl WalkCorpus {
    /// Reassembles a corpus from stored parts, checking token ranges.
    pub fn from_parts(
        num_nodes: u32,
        num_layers: u16,
        config: WalkConfig,
        year: i32,
        walks: Vec<Vec<u32>>,
    ) -> Result<Self> {
        let vocab = num_nodes as u64 + u64::from(num_layers);
        let mut tokens = Vec::with_capacity(walks.iter().map(Vec::len).sum());
        let mut offsets = Vec::with_capacity(walks.len() + 1);
        offsets.push(0);
        for w in walks {
            if let Some(&t) = w.iter().find(|&&t| u64::from(t) >= vocab) {
                return Err(Error::MalformedInput(alloc::format!("token {t} outside vocabulary of {vocab}")));
            }
            tokens.extend_from_slice(&w);
            offsets.push(tokens.len());
        }
        Ok(WalkCorpus { tokens, offsets, num_nodes, num_layers, config, year })
    }

    pub fn walks(&self) -> impl ExactSizeIterator<Item = &[u32]> + '_ {
        self.offsets.windows(2).map(move |w| &self.tokens[w[0]..w[1]])
    }

    pub fn walk(&self, i: usize) -> &[u32] {
        &self.tokens[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn num_walks(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn num_tokens(&self) -> usize {
        self.tokens.len()
    }

    pub fn num_nodes(&self) -> u32 {
        self.num_nodes
    }

    pub fn num_layers(&self) -> u16 {
        self.num_layers
    }

    pub fn vocab_size(&self) -> usize {
        self.num_nodes as usize + self.num_layers as usize
    }

    pub fn config(&self) -> &WalkConfig {
        &self.config
    }

    pub fn year(&self) -> i32 {
        self.year
    }

    #[inline]
    pub fn hub_token(&self, l: LayerId) -> u32 {
        self.num_nodes + u32::from(l.0)
    }

    #[inline]
    pub fn token_layer(&self, t: u32) -> Option<LayerId> {
        (t >= self.num_nodes).then(|| LayerId((t - self.num_nodes) as u16))
    }

    pub fn token_counts(&self) -> Vec<u64> {
        let mut counts = alloc::vec![0u64; self.vocab_size()];
        for &t in &self.tokens {
            counts[t as usize] += 1;
        }
        counts
    }

    pub fn fingerprint(&self) -> u64 {
        Fingerprint::default()
            .u64(u64::from(self.num_nodes))
            .u64(u64::from(self.num_layers))
            .u32s(&self.tokens)
            .u64(self.offsets.len() as u64)
            .finish()
    }

    fn require_aware(&self, what: &'static str) -> Result<()> {
        if self.config.mode == WalkMode::Aware {
            Ok(())
        } else {
            Err(Error::UnsupportedMode(what))
        }
    }
}

/// One application of the layer-persistence rule.
///
/// Returns `None` when `current` has no edge in any layer.
pub fn next_step<R: Rng + ?Sized>(
    graph: &MultiplexGraph,
    current: NodeId,
    current_layer: Option<LayerId>,
    persistence: f64,
    rng: &mut R,
) -> Option<(NodeId, LayerId)> {
    let keep = match current_layer {
        Some(l) if !graph.neighbors(current, l).is_empty() => rng.random::<f64>() < persistence,
        _ => false,
    };
    let layer = if keep {
        current_layer?
    } else {
        let active = graph.active_layers(current).count();
        if active == 0 {
            return None;
        }
        let pick = rng.random_range(0..active);
        graph.active_layers(current).nth(pick)?
    };
    let adj = graph.neighbors(current, layer);
    Some((adj[rng.random_range(0..adj.len())], layer))
}

fn flat_step<R: Rng + ?Sized>(flat: &Csr, current: NodeId, rng: &mut R) -> Option<NodeId> {
    let adj = flat.neighbors(current);
    (!adj.is_empty()).then(|| adj[rng.random_range(0..adj.len())])
}

/// Generates walk number `index` rooted at `start`.
///
/// The random stream is keyed by `(seed, start, index)`, so the result does
/// not depend on which other walks are generated or in what order.
pub fn walk_from(
    graph: &MultiplexGraph,
    flat: Option<&Csr>,
    config: &WalkConfig,
    start: NodeId,
    index: u32,
) -> Vec<u32> {
    let mut rng = rng::keyed(config.seed, rng::domain::WALK, rng::pair_key(u64::from(start), u64::from(index)));
    let capacity = match config.mode {
        WalkMode::Aware => 2 * config.walk_length - 1,
        _ => config.walk_length,
    };
    let mut out = Vec::with_capacity(capacity);
    out.push(start);
    let mut current = start;
    let mut layer = None;
    for _ in 1..config.walk_length {
        match config.mode {
            WalkMode::Flatten => {
                let flat = flat.expect("flatten mode requires the flattened adjacency");
                match flat_step(flat, current, &mut rng) {
                    Some(next) => {
                        out.push(next);
                        current = next;
                    }
                    None => break,
                }
            }
            WalkMode::Blind | WalkMode::Aware => {
                match next_step(graph, current, layer, config.persistence, &mut rng) {
                    Some((next, used)) => {
                        if config.mode == WalkMode::Aware {
                            out.push(graph.num_nodes() + u32::from(used.0));
                        }
                        out.push(next);
                        current = next;
                        layer = Some(used);
                    }
                    None => break,
                }
            }
        }
    }
    out
}

fn walk_jobs(graph: &MultiplexGraph, config: &WalkConfig) -> Vec<(NodeId, u32)> {
    let starts: Vec<NodeId> = (0..graph.num_nodes()).filter(|&v| !graph.is_isolated(v)).collect();
    (0..config.walks_per_node as u32)
        .flat_map(|j| starts.iter().map(move |&v| (v, j)))
        .collect()
}

fn assemble(graph: &MultiplexGraph, config: &WalkConfig, walks: Vec<Vec<u32>>) -> WalkCorpus {
    let mut tokens = Vec::with_capacity(walks.iter().map(Vec::len).sum());
    let mut offsets = Vec::with_capacity(walks.len() + 1);
    offsets.push(0);
    for w in walks {
        tokens.extend_from_slice(&w);
        offsets.push(tokens.len());
    }
    WalkCorpus {
        tokens,
        offsets,
        num_nodes: graph.num_nodes(),
        num_layers: graph.num_layers() as u16,
        config: config.clone(),
        year: graph.year(),
    }
}

/// Generates `walks_per_node` walks from every non-isolated node.
///
/// Walks are ordered by pass index, then start node.
pub fn generate_walks(graph: &MultiplexGraph, config: &WalkConfig) -> Result<WalkCorpus> {
    config.validate()?;
    let flat = (config.mode == WalkMode::Flatten).then(|| graph.flattened());
    let walks = walk_jobs(graph, config)
        .into_iter()
        .map(|(v, j)| walk_from(graph, flat.as_ref(), config, v, j))
        .collect();
    Ok(assemble(graph, config, walks))
}

/// Parallel [`generate_walks`]; output is identical for any worker count.
/// `workers == 0` uses the global rayon pool.
#[cfg(feature = "std")]
pub fn generate_walks_parallel(graph: &MultiplexGraph, config: &WalkConfig, workers: usize) -> Result<WalkCorpus> {
    use rayon::prelude::*;
    config.validate()?;
    let flat = (config.mode == WalkMode::Flatten).then(|| graph.flattened());
    let jobs = walk_jobs(graph, config);
    let run = || {
        jobs.par_iter()
            .map(|&(v, j)| walk_from(graph, flat.as_ref(), config, v, j))
            .collect::<Vec<_>>()
    };
    let walks = crate::parallel::install(workers, run);
    Ok(assemble(graph, config, walks))
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LayerPersistence {
    pub layer: LayerId,
    /// Transitions whose previous edge was in this layer.
    pub transitions: u64,
    pub stays: u64,
    pub measured: f64,
    /// Mean of `p + (1 - p) / active_layers(node)` over the same transitions.
    pub theoretical: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PersistenceStats {
    pub persistence: f64,
    pub layers: Vec<LayerPersistence>,
    pub overall_measured: f64,
    pub overall_theoretical: f64,
}

/// Stay frequencies per layer, read off the hub tokens of an aware corpus.
pub fn persistence_stats(corpus: &WalkCorpus, graph: &MultiplexGraph) -> Result<PersistenceStats> {
    corpus.require_aware("persistence statistics")?;
    let p = corpus.config.persistence;
    let nl = corpus.num_layers as usize;
    let mut transitions = alloc::vec![0u64; nl];
    let mut stays = alloc::vec![0u64; nl];
    let mut expected = alloc::vec![0.0f64; nl];
    for walk in corpus.walks() {
        // walk = p0 h0 p1 h1 p2 ...; transition at p_{i+1} goes h_i -> h_{i+1}
        let mut i = 1;
        while i + 2 < walk.len() {
            let (from, via, to) = (walk[i], walk[i + 1], walk[i + 2]);
            let from_layer = corpus.token_layer(from).ok_or(Error::MalformedInput("hub expected".into()))?;
            let l = from_layer.index();
            transitions[l] += 1;
            if from == to {
                stays[l] += 1;
            }
            let active = graph.active_layers(via).count().max(1) as f64;
            expected[l] += p + (1.0 - p) / active;
            i += 2;
        }
    }
    let layers: Vec<_> = (0..nl)
        .map(|l| LayerPersistence {
            layer: LayerId(l as u16),
            transitions: transitions[l],
            stays: stays[l],
            measured: ratio(stays[l] as f64, transitions[l]),
            theoretical: ratio(expected[l], transitions[l]),
        })
        .collect();
    let total: u64 = transitions.iter().sum();
    Ok(PersistenceStats {
        persistence: p,
        overall_measured: ratio(stays.iter().sum::<u64>() as f64, total),
        overall_theoretical: ratio(expected.iter().sum(), total),
        layers,
    })
}

fn ratio(num: f64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num / den as f64
    }
}

/// Fraction of windows of `persons` consecutive person tokens whose
/// connecting edges all lie in one layer.
pub fn same_layer_run_frequency(corpus: &WalkCorpus, persons: usize) -> Result<f64> {
    corpus.require_aware("same-layer run frequency")?;
    if persons < 2 {
        return Err(Error::Config("a run needs at least two persons".into()));
    }
    let hubs_per_window = persons - 1;
    let (mut windows, mut uniform) = (0u64, 0u64);
    for walk in corpus.walks() {
        let hubs: Vec<u32> = walk.iter().skip(1).step_by(2).copied().collect();
        for w in hubs.windows(hubs_per_window) {
            windows += 1;
            if w.iter().all(|&h| h == w[0]) {
                uniform += 1;
            }
        }
    }
    if windows == 0 {
        return Err(Error::Empty("no window of the requested length"));
    }
    Ok(uniform as f64 / windows as f64)
}

/// Checks that every `(person, hub, person)` triple is a true typed edge and
/// that tokens alternate correctly. Returns the number of triples checked.
pub fn check_aware_soundness(corpus: &WalkCorpus, graph: &MultiplexGraph) -> Result<u64> {
    corpus.require_aware("soundness check")?;
    let mut checked = 0u64;
    for (wi, walk) in corpus.walks().enumerate() {
        if walk.len() % 2 == 0 {
            return Err(Error::MalformedInput(alloc::format!("walk {wi} has even length")));
        }
        for (i, &t) in walk.iter().enumerate() {
            let is_hub = corpus.token_layer(t).is_some();
            if is_hub != (i % 2 == 1) {
                return Err(Error::MalformedInput(alloc::format!("walk {wi} breaks alternation at {i}")));
            }
        }
        for triple in walk.windows(3).step_by(2) {
            let layer = corpus.token_layer(triple[1]).expect("alternation checked");
            if !graph.has_edge(triple[0], triple[2], layer) {
                return Err(Error::MalformedInput(alloc::format!(
                    "walk {wi}: ({}, {}) is not an edge in layer {layer}",
                    triple[0],
                    triple[2]
                )));
            }
            checked += 1;
        }
    }
    Ok(checked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::canonical_layer_names;
    use alloc::vec;

    fn graph(n: u32, edges: &[(u32, u32, u16)]) -> MultiplexGraph {
        MultiplexGraph::from_edges(n, 2009, canonical_layer_names(), edges.iter().map(|&(u, v, l)| (u, v, LayerId(l))))
            .unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(WalkConfig { persistence: 1.5, ..Default::default() }.validate().is_err());
        assert!(WalkConfig { walk_length: 1, ..Default::default() }.validate().is_err());
        assert!(WalkConfig { walks_per_node: 0, ..Default::default() }.validate().is_err());
        assert!(WalkConfig::default().validate().is_ok());
    }

    #[test]
    fn stay_probability_two_layers() {
        // node 0 has edges in layers 0 and 1: P(stay in 0) = 0.8 + 0.2 / 2.
        let g = graph(3, &[(0, 1, 0), (0, 2, 1)]);
        let mut rng = rng::keyed(1, 0, 0);
        let n = 100_000;
        let stays = (0..n)
            .filter(|_| next_step(&g, 0, Some(LayerId(0)), 0.8, &mut rng).unwrap().1 == LayerId(0))
            .count();
        assert!((stays as f64 / n as f64 - 0.9).abs() < 0.01);
    }

    #[test]
    fn stay_probability_three_layers() {
        let g = graph(4, &[(0, 1, 0), (0, 2, 1), (0, 3, 3)]);
        let mut rng = rng::keyed(2, 0, 0);
        let n = 100_000;
        let stays = (0..n)
            .filter(|_| next_step(&g, 0, Some(LayerId(0)), 0.8, &mut rng).unwrap().1 == LayerId(0))
            .count();
        assert!((stays as f64 / n as f64 - (0.8 + 0.2 / 3.0)).abs() < 0.01);
    }

    #[test]
    fn single_active_layer_always_used() {
        let g = graph(3, &[(0, 1, 0), (1, 2, 2)]);
        let mut rng = rng::keyed(3, 0, 0);
        for current in [None, Some(LayerId(0)), Some(LayerId(2)), Some(LayerId(4))] {
            for _ in 0..200 {
                assert_eq!(next_step(&g, 0, current, 0.3, &mut rng), Some((1, LayerId(0))));
            }
        }
    }

    #[test]
    fn isolated_node_ends_walk() {
        let g = graph(3, &[(0, 1, 0)]);
        let mut rng = rng::keyed(3, 0, 0);
        assert_eq!(next_step(&g, 2, None, 0.8, &mut rng), None);
    }

    #[test]
    fn single_edge_aware_walks() {
        let g = graph(2, &[(0, 1, 0)]);
        let cfg = WalkConfig { walk_length: 4, walks_per_node: 3, ..Default::default() };
        let corpus = generate_walks(&g, &cfg).unwrap();
        assert_eq!(corpus.num_walks(), 6);
        for w in corpus.walks() {
            let expect_0 = [0, 2, 1, 2, 0, 2, 1];
            let expect_1 = [1, 2, 0, 2, 1, 2, 0];
            assert!(w == expect_0 || w == expect_1, "{w:?}");
        }
    }

    #[test]
    fn walk_count_skips_isolated_nodes() {
        let g = graph(5, &[(0, 1, 0), (1, 2, 3)]);
        let cfg = WalkConfig { walks_per_node: 2, mode: WalkMode::Blind, ..Default::default() };
        let corpus = generate_walks(&g, &cfg).unwrap();
        assert_eq!(corpus.num_walks(), 6);
        assert!(corpus.walks().all(|w| w.len() == 40 && w.iter().all(|&t| t < 5)));
    }

    #[test]
    fn stats_reject_non_aware() {
        let g = graph(2, &[(0, 1, 0)]);
        let corpus = generate_walks(&g, &WalkConfig { mode: WalkMode::Blind, ..Default::default() }).unwrap();
        assert!(matches!(persistence_stats(&corpus, &g), Err(Error::UnsupportedMode(_))));
        assert!(same_layer_run_frequency(&corpus, 4).is_err());
    }

    #[test]
    fn soundness_detects_fake_edge() {
        let g = graph(3, &[(0, 1, 0), (1, 2, 1)]);
        let ok = WalkCorpus::from_parts(3, 5, WalkConfig::default(), 0, vec![vec![0, 3, 1, 4, 2]]).unwrap();
        assert_eq!(check_aware_soundness(&ok, &g).unwrap(), 2);
        let bad = WalkCorpus::from_parts(3, 5, WalkConfig::default(), 0, vec![vec![0, 4, 1]]).unwrap();
        assert!(check_aware_soundness(&bad, &g).is_err());
    }

    #[test]
    fn from_parts_rejects_out_of_vocab() {
        assert!(WalkCorpus::from_parts(3, 5, WalkConfig::default(), 0, vec![vec![0, 8]]).is_err());
    }
}

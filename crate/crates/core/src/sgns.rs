//! Skip-gram with negative sampling over walk corpora.
//!
//! Person and hub tokens share one vocabulary and are trained identically.
//! The canonical embedding of a token is its input vector.

use alloc::string::String;
use alloc::vec::Vec;

use num_traits::Float;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::weighted::WeightedAliasIndex;

use crate::error::{Error, Result};
use crate::graph::NodeId;
use crate::rng::{self, Fingerprint};
use crate::walker::WalkCorpus;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct TrainConfig {
    pub dim: usize,
    /// Maximum context radius in tokens; the radius actually used for each
    /// center is drawn uniformly from `1..=window`.
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub learning_rate: f32,
    pub min_learning_rate: f32,
    /// Frequent-token subsampling threshold; `None` keeps every token.
    pub subsample: Option<f64>,
    pub unigram_power: f64,
    pub seed: u64,
    /// 1 trains single-threaded and bit-reproducibly. More workers share
    /// parameters without locks.
    pub workers: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dim: 128,
            window: 5,
            negatives: 5,
            epochs: 50,
            learning_rate: 0.025,
            min_learning_rate: 1e-4,
            subsample: None,
            unigram_power: 0.75,
            seed: 0,
            workers: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Config("dim must be positive".into()));
        }
        if self.window < 1 || self.negatives < 1 || self.epochs < 1 {
            return Err(Error::Config("window, negatives and epochs must all be at least 1".into()));
        }
        if !(self.learning_rate > 0.0) || self.min_learning_rate < 0.0 {
            return Err(Error::Config("learning rates must be positive".into()));
        }
        if let Some(t) = self.subsample {
            if !(t > 0.0) {
                return Err(Error::Config("subsample threshold must be positive".into()));
            }
        }
        Ok(())
    }
}

/// A transform that has been applied to an embedding space.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "lowercase"))]
pub enum TransformRecord {
    Alignment { method: String, source_year: i32, target_year: i32 },
    Whitening { fingerprint: u64 },
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct EmbeddingMeta {
    pub year: i32,
    pub num_nodes: u32,
    pub num_layers: u16,
    pub corpus_fingerprint: u64,
    /// Person tokens that never occurred in the training corpus.
    pub absent: Vec<NodeId>,
    pub train: Option<TrainConfig>,
    pub transforms: Vec<TransformRecord>,
}

/// Dense vectors for a person + hub vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    vocab_size: usize,
    dim: usize,
    vectors: Vec<f32>,
    /// Output (context) vectors; empty for derived spaces.
    context: Vec<f32>,
    pub meta: EmbeddingMeta,
}

impl EmbeddingMatrix {
    pub fn from_vectors(vocab_size: usize, dim: usize, vectors: Vec<f32>, meta: EmbeddingMeta) -> Result<Self> {
        if vectors.len() != vocab_size * dim {
            return Err(Error::DimensionMismatch { expected: vocab_size * dim, actual: vectors.len() });
        }
        if vectors.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("embedding vectors"));
        }
        Ok(EmbeddingMatrix { vocab_size, dim, vectors, context: Vec::new(), meta })
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn row(&self, token: usize) -> &[f32] {
        &self.vectors[token * self.dim..(token + 1) * self.dim]
    }

    pub fn vectors(&self) -> &[f32] {
        &self.vectors
    }

    pub fn context_vectors(&self) -> &[f32] {
        &self.context
    }

    /// Person tokens that were seen during training.
    pub fn present_nodes(&self) -> Vec<NodeId> {
        let persons = (self.meta.num_nodes as usize).min(self.vocab_size);
        let mut absent = self.meta.absent.clone();
        absent.sort_unstable();
        (0..persons as NodeId).filter(|v| absent.binary_search(v).is_err()).collect()
    }

    pub fn fingerprint(&self) -> u64 {
        Fingerprint::default()
            .u64(self.vocab_size as u64)
            .u64(self.dim as u64)
            .f32s(&self.vectors)
            .finish()
    }

    /// Cosine similarity of two input vectors.
    pub fn cosine(&self, a: usize, b: usize) -> Result<f64> {
        for t in [a, b] {
            if t >= self.vocab_size {
                return Err(Error::MalformedInput(alloc::format!("token {t} outside vocabulary")));
            }
        }
        cosine_f32(self.row(a), self.row(b)).ok_or_else(|| Error::Undefined("cosine of a zero vector".into()))
    }
}

/// Cosine of two f32 vectors accumulated in f64; `None` for a zero vector.
pub fn cosine_f32(a: &[f32], b: &[f32]) -> Option<f64> {
    let (mut dot, mut na, mut nb) = (0.0f64, 0.0f64, 0.0f64);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (f64::from(x), f64::from(y));
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    Some((dot / libm::sqrt(na * nb)).clamp(-1.0, 1.0))
}

/// Negative-sampling distribution proportional to `count^power`.
#[derive(Debug, Clone)]
pub struct UnigramTable {
    probs: Vec<f64>,
    alias: WeightedAliasIndex<f64>,
}

impl UnigramTable {
    pub fn from_counts(counts: &[u64], power: f64) -> Result<Self> {
        let weights: Vec<f64> =
            counts.iter().map(|&c| if c == 0 { 0.0 } else { libm::pow(c as f64, power) }).collect();
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Empty("corpus"));
        }
        let probs = weights.iter().map(|w| w / total).collect();
        let alias = WeightedAliasIndex::new(weights).map_err(|e| Error::Undefined(alloc::format!("{e}")))?;
        Ok(UnigramTable { probs, alias })
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        self.alias.sample(rng) as u32
    }
}

pub fn build_unigram_table(corpus: &WalkCorpus, power: f64) -> Result<UnigramTable> {
    if corpus.num_tokens() == 0 {
        return Err(Error::Empty("corpus"));
    }
    UnigramTable::from_counts(&corpus.token_counts(), power)
}

#[inline]
fn sigmoid<F: Float>(x: F) -> F {
    F::one() / (F::one() + (-x).exp())
}

/// `-ln sigmoid(x)`, stable for large `|x|`.
#[inline]
fn neg_log_sigmoid<F: Float>(x: F) -> F {
    if x > F::zero() {
        (-x).exp().ln_1p()
    } else {
        -x + x.exp().ln_1p()
    }
}

/// Loss and analytic gradients of one skip-gram tuple.
#[derive(Debug, Clone, PartialEq)]
pub struct TupleGradient<F> {
    pub loss: F,
    pub center: Vec<F>,
    pub context: Vec<F>,
    pub negatives: Vec<Vec<F>>,
}

fn dot<F: Float>(a: &[F], b: &[F]) -> F {
    a.iter().zip(b).fold(F::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Loss `-ln s(u.v) - sum_k ln s(-u.n_k)` of one tuple.
pub fn tuple_loss<F: Float>(center: &[F], context: &[F], negatives: &[&[F]]) -> F {
    negatives
        .iter()
        .fold(neg_log_sigmoid(dot(center, context)), |acc, n| acc + neg_log_sigmoid(-dot(center, n)))
}

/// Gradient of [`tuple_loss`] with respect to every participating vector.
pub fn tuple_gradient<F: Float>(center: &[F], context: &[F], negatives: &[&[F]]) -> TupleGradient<F> {
    let d = center.len();
    let mut g_center = alloc::vec![F::zero(); d];
    let pos = sigmoid(dot(center, context)) - F::one();
    let g_context: Vec<F> = center.iter().map(|&u| pos * u).collect();
    for (gc, &v) in g_center.iter_mut().zip(context) {
        *gc = *gc + pos * v;
    }
    let mut g_negs = Vec::with_capacity(negatives.len());
    for n in negatives {
        let s = sigmoid(dot(center, n));
        for (gc, &v) in g_center.iter_mut().zip(n.iter()) {
            *gc = *gc + s * v;
        }
        g_negs.push(center.iter().map(|&u| s * u).collect());
    }
    TupleGradient { loss: tuple_loss(center, context, negatives), center: g_center, context: g_context, negatives: g_negs }
}

/// Dot product with independent partial sums, which lets the compiler
/// vectorize the loop.
#[inline]
fn dot_f32(a: &[f32], b: &[f32]) -> f32 {
    let mut acc = [0.0f32; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let tail: f32 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    acc.iter().sum::<f32>() + tail
}

/// One SGD update of `target` against the (frozen) `center` vector.
/// Accumulates the center's descent direction into `center_step` and
/// returns the loss term.
#[inline]
fn update_target(center: &[f32], center_step: &mut [f32], target: &mut [f32], label: f32, lr: f32) -> f32 {
    let f = dot_f32(center, target);
    let g = (label - sigmoid(f)) * lr;
    for ((s, t), &c) in center_step.iter_mut().zip(target.iter_mut()).zip(center) {
        *s += g * *t;
        *t += g * c;
    }
    if label > 0.5 {
        neg_log_sigmoid(f)
    } else {
        neg_log_sigmoid(-f)
    }
}

/// Row-addressed parameter storage, local or shared.
trait Rows {
    fn load(&self, row: usize, out: &mut [f32]);
    /// Applies `f` to `row`; shared storage goes through `buf`.
    fn update<R>(&mut self, row: usize, buf: &mut [f32], f: impl FnOnce(&mut [f32]) -> R) -> R;
}

struct LocalRows<'a> {
    data: &'a mut [f32],
    dim: usize,
}

impl Rows for LocalRows<'_> {
    #[inline]
    fn load(&self, row: usize, out: &mut [f32]) {
        out.copy_from_slice(&self.data[row * self.dim..(row + 1) * self.dim]);
    }

    #[inline]
    fn update<R>(&mut self, row: usize, _buf: &mut [f32], f: impl FnOnce(&mut [f32]) -> R) -> R {
        f(&mut self.data[row * self.dim..(row + 1) * self.dim])
    }
}

/// Per-epoch training summary.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainReport {
    /// Mean tuple loss per epoch.
    pub epoch_losses: Vec<f64>,
    pub tuples: u64,
}

struct Schedule {
    lr0: f32,
    min_lr: f32,
    total: f64,
}

impl Schedule {
    #[inline]
    fn lr(&self, processed: f64) -> f32 {
        let lr = self.lr0 * (1.0 - (processed / self.total) as f32);
        lr.max(self.min_lr)
    }
}

struct Scratch {
    center: Vec<f32>,
    step: Vec<f32>,
    target: Vec<f32>,
    kept: Vec<u32>,
}

impl Scratch {
    fn new(dim: usize) -> Self {
        Scratch { center: alloc::vec![0.0; dim], step: alloc::vec![0.0; dim], target: alloc::vec![0.0; dim], kept: Vec::new() }
    }
}

struct Trainer<'a> {
    config: &'a TrainConfig,
    table: &'a UnigramTable,
    keep_prob: Option<Vec<f64>>,
    schedule: Schedule,
}

impl Trainer<'_> {
    /// Trains on one walk. Randomness is keyed by `(epoch, walk)` so the
    /// draws do not depend on how walks are distributed over workers.
    fn walk<I: Rows, O: Rows>(
        &self,
        input: &mut I,
        output: &mut O,
        scratch: &mut Scratch,
        walk: &[u32],
        epoch: usize,
        walk_index: usize,
        processed: f64,
    ) -> (f64, u64) {
        let mut rng = rng::keyed(self.config.seed, rng::domain::TRAIN, rng::pair_key(epoch as u64, walk_index as u64));
        let Scratch { center, step, target, kept } = scratch;
        kept.clear();
        match &self.keep_prob {
            Some(keep) => kept.extend(walk.iter().copied().filter(|&t| rng.random::<f64>() < keep[t as usize])),
            None => kept.extend_from_slice(walk),
        }
        let lr = self.schedule.lr(processed);
        let (mut loss, mut tuples) = (0.0f64, 0u64);
        for i in 0..kept.len() {
            let radius = rng.random_range(1..=self.config.window);
            let lo = i.saturating_sub(radius);
            let hi = (i + radius).min(kept.len() - 1);
            for j in lo..=hi {
                if j == i {
                    continue;
                }
                let (c, ctx) = (kept[i] as usize, kept[j] as usize);
                input.load(c, center);
                step.iter_mut().for_each(|s| *s = 0.0);
                let mut l = output.update(ctx, target, |row| update_target(center, step, row, 1.0, lr));
                for _ in 0..self.config.negatives {
                    let neg = self.table.sample(&mut rng) as usize;
                    if neg == ctx {
                        continue;
                    }
                    l += output.update(neg, target, |row| update_target(center, step, row, 0.0, lr));
                }
                input.update(c, target, |row| {
                    for (u, s) in row.iter_mut().zip(step.iter()) {
                        *u += *s;
                    }
                });
                loss += f64::from(l);
                tuples += 1;
            }
        }
        (loss, tuples)
    }
}

fn init_vectors(vocab: usize, dim: usize, seed: u64) -> Vec<f32> {
    let mut rng = rng::keyed(seed, rng::domain::TRAIN, u64::MAX);
    let scale = 1.0 / dim as f32;
    (0..vocab * dim).map(|_| (rng.random::<f32>() - 0.5) * scale).collect()
}

/// Trains embeddings; see [`train_with_report`].
pub fn train(corpus: &WalkCorpus, config: &TrainConfig) -> Result<EmbeddingMatrix> {
    train_with_report(corpus, config).map(|(emb, _)| emb)
}

/// Trains skip-gram embeddings over `corpus`, returning per-epoch losses.
pub fn train_with_report(corpus: &WalkCorpus, config: &TrainConfig) -> Result<(EmbeddingMatrix, TrainReport)> {
    config.validate()?;
    if corpus.num_tokens() == 0 || corpus.num_walks() == 0 {
        return Err(Error::Empty("corpus"));
    }
    let counts = corpus.token_counts();
    let table = UnigramTable::from_counts(&counts, config.unigram_power)?;
    let total_tokens = corpus.num_tokens() as f64;
    let keep_prob = config.subsample.map(|t| {
        counts
            .iter()
            .map(|&c| {
                let f = c as f64 / total_tokens;
                if f == 0.0 {
                    1.0
                } else {
                    ((libm::sqrt(f / t) + 1.0) * t / f).min(1.0)
                }
            })
            .collect()
    });
    let trainer = Trainer {
        config,
        table: &table,
        keep_prob,
        schedule: Schedule {
            lr0: config.learning_rate,
            min_lr: config.min_learning_rate,
            total: total_tokens * config.epochs as f64,
        },
    };
    let (vocab, dim) = (corpus.vocab_size(), config.dim);
    let mut vectors = init_vectors(vocab, dim, config.seed);
    let mut context = alloc::vec![0.0f32; vocab * dim];
    let mut report = TrainReport::default();

    #[cfg(feature = "std")]
    let parallel = config.workers > 1;
    #[cfg(not(feature = "std"))]
    let parallel = false;

    if parallel {
        #[cfg(feature = "std")]
        hogwild::train(&trainer, corpus, &mut vectors, &mut context, &mut report);
    } else {
        let mut scratch = Scratch::new(dim);
        let mut input = LocalRows { data: &mut vectors, dim };
        let mut output = LocalRows { data: &mut context, dim };
        for epoch in 0..config.epochs {
            let (mut loss, mut tuples) = (0.0, 0u64);
            let mut processed = epoch as f64 * total_tokens;
            for (wi, walk) in corpus.walks().enumerate() {
                let (l, t) = trainer.walk(&mut input, &mut output, &mut scratch, walk, epoch, wi, processed);
                loss += l;
                tuples += t;
                processed += walk.len() as f64;
            }
            report.epoch_losses.push(if tuples == 0 { 0.0 } else { loss / tuples as f64 });
            report.tuples += tuples;
        }
    }

    if vectors.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("trained vectors"));
    }
    let absent = (0..corpus.num_nodes()).filter(|&v| counts[v as usize] == 0).collect();
    let meta = EmbeddingMeta {
        year: corpus.year(),
        num_nodes: corpus.num_nodes(),
        num_layers: corpus.num_layers(),
        corpus_fingerprint: corpus.fingerprint(),
        absent,
        train: Some(config.clone()),
        transforms: Vec::new(),
    };
    Ok((EmbeddingMatrix { vocab_size: vocab, dim, vectors, context, meta }, report))
}

#[cfg(feature = "std")]
mod hogwild {
    //! Lock-free shared-parameter training. Rows are read and written with
    //! relaxed atomics; concurrent updates to one row may overwrite each
    //! other, which the objective tolerates.

    use super::*;
    use core::sync::atomic::{AtomicU32, Ordering};
    use rayon::prelude::*;

    struct SharedRows<'a> {
        data: &'a [AtomicU32],
        dim: usize,
    }

    impl Rows for SharedRows<'_> {
        #[inline]
        fn load(&self, row: usize, out: &mut [f32]) {
            for (o, a) in out.iter_mut().zip(&self.data[row * self.dim..(row + 1) * self.dim]) {
                *o = f32::from_bits(a.load(Ordering::Relaxed));
            }
        }

        #[inline]
        fn update<R>(&mut self, row: usize, buf: &mut [f32], f: impl FnOnce(&mut [f32]) -> R) -> R {
            self.load(row, buf);
            let out = f(buf);
            for (a, &v) in self.data[row * self.dim..(row + 1) * self.dim].iter().zip(buf.iter()) {
                a.store(v.to_bits(), Ordering::Relaxed);
            }
            out
        }
    }

    fn to_atomic(v: &[f32]) -> Vec<AtomicU32> {
        v.iter().map(|x| AtomicU32::new(x.to_bits())).collect()
    }

    pub(super) fn train(
        trainer: &Trainer<'_>,
        corpus: &WalkCorpus,
        vectors: &mut [f32],
        context: &mut [f32],
        report: &mut TrainReport,
    ) {
        let dim = trainer.config.dim;
        let shared_in = to_atomic(vectors);
        let shared_out = to_atomic(context);
        let n = corpus.num_walks();
        let workers = trainer.config.workers;
        let shard = n.div_ceil(workers);
        let mut starts = Vec::with_capacity(n + 1);
        let mut acc = 0usize;
        for w in corpus.walks() {
            starts.push(acc);
            acc += w.len();
        }
        let total_tokens = acc as f64;
        crate::parallel::install(workers, || {
            for epoch in 0..trainer.config.epochs {
                let (loss, tuples) = (0..workers)
                    .into_par_iter()
                    .map(|s| {
                        let mut scratch = Scratch::new(dim);
                        let mut input = SharedRows { data: &shared_in, dim };
                        let mut output = SharedRows { data: &shared_out, dim };
                        let (mut loss, mut tuples) = (0.0, 0u64);
                        for wi in (s * shard)..((s + 1) * shard).min(n) {
                            let processed = epoch as f64 * total_tokens + starts[wi] as f64;
                            let (l, t) = trainer.walk(
                                &mut input,
                                &mut output,
                                &mut scratch,
                                corpus.walk(wi),
                                epoch,
                                wi,
                                processed,
                            );
                            loss += l;
                            tuples += t;
                        }
                        (loss, tuples)
                    })
                    .reduce(|| (0.0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
                report.epoch_losses.push(if tuples == 0 { 0.0 } else { loss / tuples as f64 });
                report.tuples += tuples;
            }
        });
        for (v, a) in vectors.iter_mut().zip(&shared_in) {
            *v = f32::from_bits(a.load(Ordering::Relaxed));
        }
        for (v, a) in context.iter_mut().zip(&shared_out) {
            *v = f32::from_bits(a.load(Ordering::Relaxed));
        }
    }
}

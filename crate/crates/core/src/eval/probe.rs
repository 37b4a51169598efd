use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use super::metrics::{auc, r2};
use super::tasks::{Split, TaskDataset, TaskKind};
use crate::error::{Error, Result};
use crate::rng::{self, domain};
use crate::sgns::EmbeddingMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Optimizer {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct ProbeConfig {
    pub hidden: usize,
    pub batch_sizes: Vec<usize>,
    pub learning_rates: Vec<f64>,
    pub max_epochs: usize,
    pub patience: usize,
    pub optimizer: Optimizer,
    /// Scale features (and regression targets) with train-split statistics.
    pub standardize: bool,
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            hidden: 64,
            batch_sizes: alloc::vec![16, 128],
            learning_rates: alloc::vec![1e-3, 5e-4, 5e-5],
            max_epochs: 20,
            patience: 2,
            optimizer: Optimizer::Adam,
            standardize: true,
            seed: 0,
        }
    }
}

impl ProbeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.max_epochs == 0 || self.patience == 0 {
            return Err(Error::Config("hidden, max_epochs and patience must be positive".into()));
        }
        if self.batch_sizes.is_empty() || self.batch_sizes.contains(&0) {
            return Err(Error::Config("batch_sizes must be non-empty and positive".into()));
        }
        if self.learning_rates.is_empty() || self.learning_rates.iter().any(|lr| !(lr.is_finite() && *lr > 0.0)) {
            return Err(Error::Config("learning_rates must be non-empty and positive".into()));
        }
        Ok(())
    }
}

/// Two-layer perceptron with one rectified hidden layer and a scalar output.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Mlp {
    pub d_in: usize,
    pub hidden: usize,
    /// Row `j` holds the input weights of hidden unit `j`.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

impl Mlp {
    pub fn zeros(d_in: usize, hidden: usize) -> Self {
        Mlp {
            d_in,
            hidden,
            w1: alloc::vec![0.0; d_in * hidden],
            b1: alloc::vec![0.0; hidden],
            w2: alloc::vec![0.0; hidden],
            b2: 0.0,
        }
    }

    /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
    pub fn init<R: Rng + ?Sized>(d_in: usize, hidden: usize, rng: &mut R) -> Self {
        let mut m = Mlp::zeros(d_in, hidden);
        let b = 1.0 / libm::sqrt(d_in as f64);
        m.w1.iter_mut().chain(m.b1.iter_mut()).for_each(|w| *w = rng.random_range(-b..b));
        let b = 1.0 / libm::sqrt(hidden as f64);
        m.w2.iter_mut().for_each(|w| *w = rng.random_range(-b..b));
        m.b2 = rng.random_range(-b..b);
        m
    }

    pub fn forward(&self, x: &[f64]) -> f64 {
        let mut z = self.b2;
        for j in 0..self.hidden {
            let h = self.b1[j] + dot(&self.w1[j * self.d_in..(j + 1) * self.d_in], x);
            if h > 0.0 {
                z += self.w2[j] * h;
            }
        }
        z
    }

    fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.w1.iter_mut().chain(self.b1.iter_mut()).chain(self.w2.iter_mut()).chain(core::iter::once(&mut self.b2))
    }

    fn params(&self) -> impl Iterator<Item = &f64> {
        self.w1.iter().chain(self.b1.iter()).chain(self.w2.iter()).chain(core::iter::once(&self.b2))
    }

    pub fn num_params(&self) -> usize {
        self.hidden * (self.d_in + 2) + 1
    }

    pub fn is_finite(&self) -> bool {
        self.params().all(|p| p.is_finite())
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for i in 0..4 {
            acc[i] += x[i] * y[i];
        }
    }
    let tail: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
    acc[0] + acc[1] + acc[2] + acc[3] + tail
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Loss {
    /// Binary cross-entropy on the logit, scaled per class.
    WeightedBce { positive: f64, negative: f64 },
    /// Squared error.
    Mse,
}

impl Loss {
    /// Value and derivative with respect to the model output.
    #[inline]
    fn eval(self, z: f64, y: f64) -> (f64, f64) {
        match self {
            Loss::WeightedBce { positive, negative } => {
                let w = if y > 0.5 { positive } else { negative };
                // softplus(z) - y z, written to stay finite for large |z|
                let softplus = if z > 0.0 { z + libm::log1p(libm::exp(-z)) } else { libm::log1p(libm::exp(z)) };
                let sigmoid = 1.0 / (1.0 + libm::exp(-z));
                (w * (softplus - y * z), w * (sigmoid - y))
            }
            Loss::Mse => ((z - y) * (z - y), 2.0 * (z - y)),
        }
    }
}

/// Mean loss over a batch of rows and its gradient.
pub fn loss_and_gradient(model: &Mlp, rows: &[&[f64]], targets: &[f64], loss: Loss) -> (f64, Mlp) {
    let mut grad = Mlp::zeros(model.d_in, model.hidden);
    let mut hidden = alloc::vec![0.0; model.hidden];
    let total = accumulate(model, rows, targets, loss, &mut grad, &mut hidden);
    let scale = 1.0 / rows.len().max(1) as f64;
    grad.params_mut().for_each(|g| *g *= scale);
    (total * scale, grad)
}

/// Adds the summed gradient of the batch into `grad` and returns the summed loss.
fn accumulate(model: &Mlp, rows: &[&[f64]], targets: &[f64], loss: Loss, grad: &mut Mlp, hidden: &mut [f64]) -> f64 {
    let d = model.d_in;
    let mut total = 0.0;
    for (x, &y) in rows.iter().zip(targets) {
        let mut z = model.b2;
        for j in 0..model.hidden {
            let h = model.b1[j] + dot(&model.w1[j * d..(j + 1) * d], x);
            hidden[j] = h;
            if h > 0.0 {
                z += model.w2[j] * h;
            }
        }
        let (l, dz) = loss.eval(z, y);
        total += l;
        grad.b2 += dz;
        for j in 0..model.hidden {
            let h = hidden[j];
            if h > 0.0 {
                grad.w2[j] += dz * h;
                let dh = dz * model.w2[j];
                grad.b1[j] += dh;
                for (g, xi) in grad.w1[j * d..(j + 1) * d].iter_mut().zip(x.iter()) {
                    *g += dh * xi;
                }
            }
        }
    }
    total
}

/// Dense probe inputs: one row per example plus its target and split.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeData {
    pub dim: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub split: Vec<Split>,
}

impl ProbeData {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }

    fn indices(&self, split: Split) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.split[i] == split).collect()
    }
}

/// Looks up node embeddings; pair examples concatenate both vectors.
pub fn features(task: &TaskDataset, emb: &EmbeddingMatrix) -> Result<ProbeData> {
    let persons = (emb.meta.num_nodes as usize).min(emb.vocab_size());
    let mut absent = emb.meta.absent.clone();
    absent.sort_unstable();
    let check = |v: u32| {
        if v as usize >= persons || absent.binary_search(&v).is_ok() {
            return Err(Error::MalformedInput(alloc::format!("task {}: node {v} has no embedding", task.name)));
        }
        Ok(())
    };
    let d = emb.dim();
    let dim = if task.kind.is_pair() { 2 * d } else { d };
    let mut x = Vec::with_capacity(task.examples.len() * dim);
    for e in &task.examples {
        check(e.a)?;
        x.extend(emb.row(e.a as usize).iter().map(|&v| f64::from(v)));
        if task.kind.is_pair() {
            let b = e.b.ok_or_else(|| Error::MalformedInput(alloc::format!("task {}: pair example without b", task.name)))?;
            check(b)?;
            x.extend(emb.row(b as usize).iter().map(|&v| f64::from(v)));
        }
    }
    Ok(ProbeData {
        dim,
        x,
        y: task.examples.iter().map(|e| e.target).collect(),
        split: task.examples.iter().map(|e| e.split).collect(),
    })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ProbeModel {
    pub kind: TaskKind,
    pub mlp: Mlp,
    pub feature_mean: Vec<f64>,
    pub feature_scale: Vec<f64>,
    pub target_mean: f64,
    pub target_scale: f64,
}

impl ProbeModel {
    /// Logit for binary tasks, target-scale prediction for regression.
    pub fn predict(&self, x: &[f64]) -> f64 {
        let z: Vec<f64> = x.iter().zip(&self.feature_mean).zip(&self.feature_scale).map(|((v, m), s)| (v - m) / s).collect();
        self.target_mean + self.target_scale * self.mlp.forward(&z)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GridCell {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub best_val: f64,
    /// Epoch (1-based) whose weights were kept.
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub val_curve: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ProbeResult {
    pub task: String,
    /// "auc" or "r2".
    pub metric: String,
    pub test_metric: f64,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs_run: usize,
    pub val_curve: Vec<f64>,
    pub grid: Vec<GridCell>,
    pub num_train: usize,
    pub num_val: usize,
    pub num_test: usize,
}

struct Prepared {
    rows: Vec<f64>,
    dim: usize,
    targets: Vec<f64>,
    train: Vec<usize>,
    val: Vec<usize>,
    loss: Loss,
    binary: bool,
}

impl Prepared {
    fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.dim..(i + 1) * self.dim]
    }

    fn metric(&self, model: &Mlp, idx: &[usize], target_mean: f64, target_scale: f64, raw: &[f64]) -> Result<f64> {
        let scores: Vec<f64> = idx.iter().map(|&i| model.forward(self.row(i))).collect();
        if self.binary {
            let labels: Vec<bool> = idx.iter().map(|&i| raw[i] > 0.5).collect();
            auc(&scores, &labels)
        } else {
            let preds: Vec<f64> = scores.iter().map(|s| target_mean + target_scale * s).collect();
            let targets: Vec<f64> = idx.iter().map(|&i| raw[i]).collect();
            r2(&preds, &targets)
        }
    }
}

struct Trained {
    cell: GridCell,
    model: Mlp,
}

fn train_cell(
    data: &Prepared,
    raw: &[f64],
    target: (f64, f64),
    init: &Mlp,
    cell_id: u64,
    batch_size: usize,
    lr: f64,
    cfg: &ProbeConfig,
) -> Result<Trained> {
    let mut model = init.clone();
    let mut best = model.clone();
    let mut best_val = f64::NEG_INFINITY;
    let mut best_epoch = 0;
    let mut since_best = 0;
    let mut curve = Vec::new();
    let mut order = data.train.clone();
    let mut grad = Mlp::zeros(model.d_in, model.hidden);
    let mut hidden = alloc::vec![0.0; model.hidden];
    let mut m1 = alloc::vec![0.0; model.num_params()];
    let mut m2 = alloc::vec![0.0; model.num_params()];
    let mut step = 0i32;
    let mut rows: Vec<&[f64]> = Vec::with_capacity(batch_size);
    let mut ys: Vec<f64> = Vec::with_capacity(batch_size);
    for epoch in 0..cfg.max_epochs {
        let mut rng = rng::keyed(cfg.seed, domain::PROBE, rng::pair_key(cell_id, epoch as u64));
        order.shuffle(&mut rng);
        for batch in order.chunks(batch_size) {
            rows.clear();
            ys.clear();
            rows.extend(batch.iter().map(|&i| data.row(i)));
            ys.extend(batch.iter().map(|&i| data.targets[i]));
            grad.params_mut().for_each(|g| *g = 0.0);
            accumulate(&model, &rows, &ys, data.loss, &mut grad, &mut hidden);
            let scale = 1.0 / batch.len() as f64;
            match cfg.optimizer {
                Optimizer::Sgd => {
                    for (p, g) in model.params_mut().zip(grad.params()) {
                        *p -= lr * scale * g;
                    }
                }
                Optimizer::Adam => {
                    step += 1;
                    let (b1, b2) = (0.9f64, 0.999f64);
                    let c1 = 1.0 - libm::pow(b1, f64::from(step));
                    let c2 = 1.0 - libm::pow(b2, f64::from(step));
                    for (((p, g), m), v) in model.params_mut().zip(grad.params()).zip(m1.iter_mut()).zip(m2.iter_mut()) {
                        let g = g * scale;
                        *m = b1 * *m + (1.0 - b1) * g;
                        *v = b2 * *v + (1.0 - b2) * g * g;
                        *p -= lr * (*m / c1) / (libm::sqrt(*v / c2) + 1e-8);
                    }
                }
            }
        }
        if !model.is_finite() {
            return Err(Error::NonFinite("probe parameters"));
        }
        let val = data.metric(&model, &data.val, target.0, target.1, raw)?;
        curve.push(val);
        if val > best_val {
            best_val = val;
            best = model.clone();
            best_epoch = epoch + 1;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                break;
            }
        }
    }
    let epochs_run = curve.len();
    Ok(Trained {
        cell: GridCell { batch_size, learning_rate: lr, best_val, best_epoch, epochs_run, val_curve: curve },
        model: best,
    })
}

/// Grid search over batch sizes and learning rates with early stopping on
/// the validation metric; the selected cell is scored once on the test split.
pub fn train_probe_data(name: &str, kind: TaskKind, data: &ProbeData, cfg: &ProbeConfig) -> Result<(ProbeModel, ProbeResult)> {
    cfg.validate()?;
    if data.x.len() != data.len() * data.dim || data.split.len() != data.len() {
        return Err(Error::DimensionMismatch { expected: data.len() * data.dim, actual: data.x.len() });
    }
    if data.x.iter().chain(&data.y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("probe data"));
    }
    let train = data.indices(Split::Train);
    let val = data.indices(Split::Val);
    let test = data.indices(Split::Test);
    if train.is_empty() || val.is_empty() || test.is_empty() {
        return Err(Error::Empty("train, validation or test split"));
    }
    let binary = kind.is_binary();
    let d = data.dim;

    let (mut mean, mut scale) = (alloc::vec![0.0; d], alloc::vec![1.0; d]);
    if cfg.standardize {
        for &i in &train {
            for (m, v) in mean.iter_mut().zip(data.row(i)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= train.len() as f64);
        let mut var = alloc::vec![0.0; d];
        for &i in &train {
            for ((s, v), m) in var.iter_mut().zip(data.row(i)).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        for (s, v) in scale.iter_mut().zip(&var) {
            let sd = libm::sqrt(v / train.len() as f64);
            *s = if sd > 1e-12 { sd } else { 1.0 };
        }
    }
    let rows: Vec<f64> = data
        .x
        .chunks_exact(d.max(1))
        .flat_map(|r| r.iter().zip(&mean).zip(&scale).map(|((v, m), s)| (v - m) / s))
        .collect();

    let (loss, target_mean, target_scale) = if binary {
        if data.y.iter().any(|&y| y != 0.0 && y != 1.0) {
            return Err(Error::MalformedInput(alloc::format!("task {name}: binary targets must be 0 or 1")));
        }
        let pos = train.iter().filter(|&&i| data.y[i] > 0.5).count();
        let neg = train.len() - pos;
        if pos == 0 || neg == 0 {
            return Err(Error::Undefined(alloc::format!("task {name}: training split holds a single class")));
        }
        let n = train.len() as f64;
        (Loss::WeightedBce { positive: n / (2.0 * pos as f64), negative: n / (2.0 * neg as f64) }, 0.0, 1.0)
    } else if cfg.standardize {
        let m = train.iter().map(|&i| data.y[i]).sum::<f64>() / train.len() as f64;
        let v = train.iter().map(|&i| (data.y[i] - m) * (data.y[i] - m)).sum::<f64>() / train.len() as f64;
        let sd = libm::sqrt(v);
        (Loss::Mse, m, if sd > 1e-12 { sd } else { 1.0 })
    } else {
        (Loss::Mse, 0.0, 1.0)
    };
    let targets: Vec<f64> = data.y.iter().map(|y| (y - target_mean) / target_scale).collect();
    let prepared = Prepared { rows, dim: d, targets, train, val, loss, binary };

    let mut init_rng = rng::keyed(cfg.seed, domain::PROBE, u64::MAX);
    let init = Mlp::init(d, cfg.hidden, &mut init_rng);
    let cells: Vec<(u64, usize, f64)> = cfg
        .batch_sizes
        .iter()
        .flat_map(|&b| cfg.learning_rates.iter().map(move |&lr| (b, lr)))
        .enumerate()
        .map(|(i, (b, lr))| (i as u64, b, lr))
        .collect();
    let run = |&(id, b, lr): &(u64, usize, f64)| train_cell(&prepared, &data.y, (target_mean, target_scale), &init, id, b, lr, cfg);
    #[cfg(feature = "std")]
    let outcomes: Vec<Result<Trained>> = {
        use rayon::prelude::*;
        cells.par_iter().map(run).collect()
    };
    #[cfg(not(feature = "std"))]
    let outcomes: Vec<Result<Trained>> = cells.iter().map(run).collect();
    let outcomes = outcomes.into_iter().collect::<Result<Vec<Trained>>>()?;

    let chosen = outcomes
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| {
            b.cell
                .best_val
                .total_cmp(&a.cell.best_val)
                .then(a.cell.learning_rate.total_cmp(&b.cell.learning_rate))
                .then(a.cell.batch_size.cmp(&b.cell.batch_size))
        })
        .map(|(i, _)| i)
        .expect("at least one cell");
    let best = &outcomes[chosen];
    let test_metric = prepared.metric(&best.model, &test, target_mean, target_scale, &data.y)?;
    let model = ProbeModel {
        kind,
        mlp: best.model.clone(),
        feature_mean: mean,
        feature_scale: scale,
        target_mean,
        target_scale,
    };
    let result = ProbeResult {
        task: name.to_string(),
        metric: if binary { "auc" } else { "r2" }.to_string(),
        test_metric,
        batch_size: best.cell.batch_size,
        learning_rate: best.cell.learning_rate,
        epochs_run: best.cell.epochs_run,
        val_curve: best.cell.val_curve.clone(),
        num_train: prepared.train.len(),
        num_val: prepared.val.len(),
        num_test: test.len(),
        grid: outcomes.into_iter().map(|t| t.cell).collect(),
    };
    Ok((model, result))
}

/// Builds features for `task` from `emb` and runs the probe protocol.
pub fn train_probe(task: &TaskDataset, emb: &EmbeddingMatrix, cfg: &ProbeConfig) -> Result<(ProbeModel, ProbeResult)> {
    task.validate()?;
    let data = features(task, emb)?;
    train_probe_data(&task.name, task.kind, &data, cfg)
}

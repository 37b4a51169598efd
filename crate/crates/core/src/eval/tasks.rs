use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::{index, SliceRandom};
use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{MultiplexGraph, NodeId};
use crate::rng::{self, domain};
use crate::synth::NodeAttributes;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum TaskKind {
    NodeBinary,
    NodeRegression,
    PairBinary,
}

impl TaskKind {
    pub fn is_binary(self) -> bool {
        !matches!(self, TaskKind::NodeRegression)
    }

    pub fn is_pair(self) -> bool {
        matches!(self, TaskKind::PairBinary)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Split {
    Train,
    Val,
    Test,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Example {
    pub a: NodeId,
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub b: Option<NodeId>,
    /// 0/1 for binary tasks.
    pub target: f64,
    pub split: Split,
}

impl Example {
    pub fn label(&self) -> bool {
        self.target > 0.5
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TaskDataset {
    pub name: String,
    pub kind: TaskKind,
    /// Year the targets refer to.
    pub year: i32,
    pub examples: Vec<Example>,
    /// Positive rate in the population the examples were drawn from.
    #[cfg_attr(feature = "serde", serde(default))]
    pub population_rate: Option<f64>,
}

impl TaskDataset {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &Example> + '_ {
        self.examples.iter().filter(move |e| e.split == split)
    }

    pub fn positive_share(&self) -> Option<f64> {
        self.kind.is_binary().then(|| {
            self.examples.iter().filter(|e| e.label()).count() as f64 / self.examples.len().max(1) as f64
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.examples.is_empty() {
            return Err(Error::Empty("task examples"));
        }
        for e in &self.examples {
            if e.b.is_some() != self.kind.is_pair() {
                return Err(Error::MalformedInput(alloc::format!("task {}: example arity does not match kind", self.name)));
            }
            if !e.target.is_finite() || (self.kind.is_binary() && e.target != 0.0 && e.target != 1.0) {
                return Err(Error::MalformedInput(alloc::format!("task {}: bad target {}", self.name, e.target)));
            }
        }
        Ok(())
    }
}

/// Exactly `round(0.7 n)` train and `round(0.1 n)` validation examples in
/// a random order; the rest are test.
pub fn assign_splits<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<Split> {
    let n_train = libm::round(0.7 * n as f64) as usize;
    let n_val = (libm::round(0.1 * n as f64) as usize).min(n - n_train);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut splits = alloc::vec![Split::Test; n];
    for (rank, &i) in order.iter().enumerate() {
        if rank < n_train {
            splits[i] = Split::Train;
        } else if rank < n_train + n_val {
            splits[i] = Split::Val;
        }
    }
    splits
}

#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct TaskConfig {
    /// Year the event and income targets are read from; the last year if unset.
    pub label_year: Option<i32>,
    /// Simple random sample size for single-node event tasks; all nodes if unset.
    pub event_sample: Option<usize>,
    pub seed: u64,
}


#[derive(Debug, Clone, Default, PartialEq)]
pub struct TaskSuite {
    pub tasks: Vec<TaskDataset>,
    pub warnings: Vec<String>,
}

fn finish(name: &str, kind: TaskKind, year: i32, items: Vec<(NodeId, Option<NodeId>, f64)>, rate: Option<f64>, key: u64, seed: u64) -> TaskDataset {
    let mut rng = rng::keyed(seed, domain::TASKS, key);
    let splits = assign_splits(items.len(), &mut rng);
    TaskDataset {
        name: name.to_string(),
        kind,
        year,
        examples: items.into_iter().zip(splits).map(|((a, b, target), split)| Example { a, b, target, split }).collect(),
        population_rate: rate,
    }
}

/// Twin pairs against an equal number of random pairs of unrelated people
/// (different clans, no family edge, not a positive pair).
pub fn twin_task(attrs: &NodeAttributes, graph: &MultiplexGraph, seed: u64) -> Result<TaskDataset> {
    let n = attrs.num_nodes();
    if attrs.twins.is_empty() {
        return Err(Error::Empty("twin pairs"));
    }
    if n < 2 {
        return Err(Error::Empty("population"));
    }
    let family = crate::graph::LayerId::FAMILY;
    let mut seen: BTreeSet<(NodeId, NodeId)> = attrs.twins.iter().copied().collect();
    let mut rng = rng::keyed(seed, domain::TASKS, 1);
    let mut items: Vec<(NodeId, Option<NodeId>, f64)> = attrs.twins.iter().map(|&(u, v)| (u, Some(v), 1.0)).collect();
    let mut negatives = 0;
    let mut attempts = 0usize;
    while negatives < attrs.twins.len() {
        attempts += 1;
        if attempts > 1000 * attrs.twins.len() + 10_000 {
            return Err(Error::Config("could not find enough unrelated pairs".into()));
        }
        let pick = index::sample(&mut rng, n, 2);
        let (u, v) = (pick.index(0).min(pick.index(1)) as NodeId, pick.index(0).max(pick.index(1)) as NodeId);
        let related = attrs.clan[u as usize] == attrs.clan[v as usize]
            || (graph.num_layers() > family.index() && graph.has_edge(u, v, family));
        if related || !seen.insert((u, v)) {
            continue;
        }
        items.push((u, Some(v), 0.0));
        negatives += 1;
    }
    Ok(finish("twins", TaskKind::PairBinary, graph.year(), items, None, 1, seed))
}

fn year_index(attrs: &NodeAttributes, year: Option<i32>) -> Result<usize> {
    let years = attrs.num_years();
    if years == 0 {
        return Err(Error::Empty("attribute years"));
    }
    match year {
        None => Ok(years - 1),
        Some(y) => {
            let t = y - attrs.start_year;
            if t < 0 || t as usize >= years {
                return Err(Error::Config(alloc::format!("label year {y} outside the attribute years")));
            }
            Ok(t as usize)
        }
    }
}

/// Builds the twin pair task, one task per binary event and the log-income
/// regression. Tasks without positive examples are skipped with a warning.
pub fn build_tasks(attrs: &NodeAttributes, graphs: &[MultiplexGraph], config: &TaskConfig) -> Result<TaskSuite> {
    let graph = graphs.first().ok_or(Error::Empty("graphs"))?;
    if graph.num_nodes() as usize != attrs.num_nodes() {
        return Err(Error::DimensionMismatch { expected: attrs.num_nodes(), actual: graph.num_nodes() as usize });
    }
    let t = year_index(attrs, config.label_year)?;
    let year = attrs.start_year + t as i32;
    let n = attrs.num_nodes();
    let seed = config.seed;
    let mut suite = TaskSuite::default();

    match twin_task(attrs, graph, seed) {
        Ok(task) => suite.tasks.push(task),
        Err(e) => suite.warnings.push(alloc::format!("twins: skipped ({e})")),
    }

    for (i, &name) in NodeAttributes::EVENTS.iter().enumerate() {
        let key = 10 + i as u64;
        let flags = &attrs.event(name).expect("known event")[t];
        if name == "divorce" {
            let items: Vec<(NodeId, Option<NodeId>, f64)> = attrs
                .couples
                .iter()
                .map(|&(u, v)| (u, Some(v), f64::from(u8::from(flags[u as usize]))))
                .collect();
            if !items.iter().any(|x| x.2 > 0.5) {
                suite.warnings.push(alloc::format!("{name}: skipped (no positive couples in {year})"));
                continue;
            }
            let rate = items.iter().filter(|x| x.2 > 0.5).count() as f64 / items.len() as f64;
            suite.tasks.push(finish(name, TaskKind::PairBinary, year, items, Some(rate), key, seed));
            continue;
        }
        let rate = flags.iter().filter(|&&f| f).count() as f64 / n as f64;
        if rate == 0.0 {
            suite.warnings.push(alloc::format!("{name}: skipped (no positive examples in {year})"));
            continue;
        }
        let nodes: Vec<usize> = match config.event_sample {
            Some(m) if m < n => {
                let mut rng = rng::keyed(seed, domain::TASKS, 100 + i as u64);
                let mut s = index::sample(&mut rng, n, m).into_vec();
                s.sort_unstable();
                s
            }
            _ => (0..n).collect(),
        };
        let items: Vec<(NodeId, Option<NodeId>, f64)> =
            nodes.iter().map(|&v| (v as NodeId, None, f64::from(u8::from(flags[v])))).collect();
        if !items.iter().any(|x| x.2 > 0.5) {
            suite.warnings.push(alloc::format!("{name}: skipped (sample holds no positives)"));
            continue;
        }
        suite.tasks.push(finish(name, TaskKind::NodeBinary, year, items, Some(rate), key, seed));
    }

    let items: Vec<(NodeId, Option<NodeId>, f64)> = attrs.income[t]
        .iter()
        .enumerate()
        .filter(|(_, &x)| x > 0.0 && x.is_finite())
        .map(|(v, &x)| (v as NodeId, None, libm::log(x)))
        .collect();
    if items.len() < 10 {
        suite.warnings.push(alloc::format!("income: skipped (only {} positive incomes)", items.len()));
    } else {
        suite.tasks.push(finish("income", TaskKind::NodeRegression, year, items, None, 20, seed));
    }
    Ok(suite)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate_synthetic, SyntheticPopulationConfig};

    fn small() -> (Vec<MultiplexGraph>, NodeAttributes) {
        let cfg = SyntheticPopulationConfig { num_nodes: 3000, twin_rate: 0.2, ..Default::default() };
        generate_synthetic(&cfg, 5).unwrap()
    }

    #[test]
    fn split_sizes_are_exact() {
        let mut rng = rng::keyed(1, domain::TASKS, 0);
        for n in [1usize, 2, 7, 10, 33, 1001] {
            let s = assign_splits(n, &mut rng);
            let count = |x| s.iter().filter(|&&y| y == x).count();
            let train = count(Split::Train);
            let val = count(Split::Val);
            assert!((train as f64 - 0.7 * n as f64).abs() <= 1.0, "n={n}");
            assert!((val as f64 - 0.1 * n as f64).abs() <= 1.0, "n={n}");
            assert_eq!(train + val + count(Split::Test), n);
        }
    }

    #[test]
    fn twin_task_is_balanced_and_unrelated() {
        let (graphs, attrs) = small();
        let task = twin_task(&attrs, &graphs[0], 3).unwrap();
        let pos: Vec<_> = task.examples.iter().filter(|e| e.label()).map(|e| (e.a, e.b.unwrap())).collect();
        let neg: Vec<_> = task.examples.iter().filter(|e| !e.label()).map(|e| (e.a, e.b.unwrap())).collect();
        assert_eq!(pos.len(), attrs.twins.len());
        assert_eq!(neg.len(), pos.len());
        let pos_set: BTreeSet<_> = pos.iter().collect();
        let neg_set: BTreeSet<_> = neg.iter().collect();
        assert_eq!(neg_set.len(), neg.len());
        assert!(pos_set.is_disjoint(&neg_set));
        for &(u, v) in &neg {
            assert!(u < v);
            assert_ne!(attrs.clan[u as usize], attrs.clan[v as usize]);
            assert!(!graphs[0].has_edge(u, v, crate::graph::LayerId::FAMILY));
        }
    }

    #[test]
    fn suite_contents() {
        let (graphs, mut attrs) = small();
        attrs.income[2][0] = 0.0;
        let suite = build_tasks(&attrs, &graphs, &TaskConfig::default()).unwrap();
        let names: Vec<&str> = suite.tasks.iter().map(|t| t.name.as_str()).collect();
        assert_eq!(names, ["twins", "union", "fertility", "divorce", "income"]);
        for task in &suite.tasks {
            task.validate().unwrap();
            assert_eq!(task.year, if task.name == "twins" { 2009 } else { 2011 });
        }
        let income = suite.tasks.iter().find(|t| t.name == "income").unwrap();
        assert!(income.examples.iter().all(|e| e.a != 0));
        let positive = attrs.income[2].iter().filter(|&&x| x > 0.0).count();
        assert_eq!(income.examples.len(), positive);
        let divorce = suite.tasks.iter().find(|t| t.name == "divorce").unwrap();
        assert_eq!(divorce.examples.len(), attrs.couples.len());
    }

    #[test]
    fn event_sample_preserves_base_rate() {
        let (graphs, mut attrs) = small();
        let n = attrs.num_nodes();
        // plant a 3% event so the check does not depend on calibration
        let mut rng = rng::keyed(9, domain::TASKS, 77);
        attrs.union[2] = (0..n).map(|_| rng.random::<f64>() < 0.03).collect();
        let rate = attrs.union[2].iter().filter(|&&f| f).count() as f64 / n as f64;
        let cfg = TaskConfig { event_sample: Some(2000), seed: 4, ..Default::default() };
        let suite = build_tasks(&attrs, &graphs, &cfg).unwrap();
        let union = suite.tasks.iter().find(|t| t.name == "union").unwrap();
        assert_eq!(union.examples.len(), 2000);
        assert!((union.positive_share().unwrap() - rate).abs() < 0.005);
        assert_eq!(union.population_rate, Some(rate));
    }

    #[test]
    fn missing_positives_are_skipped() {
        let (graphs, mut attrs) = small();
        for year in attrs.fertility.iter_mut() {
            year.iter_mut().for_each(|f| *f = false);
        }
        attrs.twins.clear();
        let suite = build_tasks(&attrs, &graphs, &TaskConfig::default()).unwrap();
        assert!(suite.tasks.iter().all(|t| t.name != "fertility" && t.name != "twins"));
        assert_eq!(suite.warnings.len(), 2);
        assert!(build_tasks(&attrs, &graphs, &TaskConfig { label_year: Some(1990), ..Default::default() }).is_err());
    }
}

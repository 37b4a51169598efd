//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! and exits non-zero if any failed.

use std::path::Path;
use std::time::Instant;

use layerwalk::io::read_json;
use layerwalk::pipeline::{self, EvalReport, Pipeline, RunOptions};
use layerwalk_core::align::{fit_ols, fit_procrustes};
use layerwalk_core::audit::{self, AuditInput, WiggleConfig};
use layerwalk_core::eval::{self, assign_splits, train_probe_data, ProbeConfig, ProbeData, TaskKind};
use layerwalk_core::graph::{canonical_layer_names, LayerId, MultiplexGraph, NodeId};
use layerwalk_core::partition::{self, assign_rows, balance_metrics, fibonacci_grid, Partition};
use layerwalk_core::sgns::{self, tuple_gradient, tuple_loss};
use layerwalk_core::synth;
use layerwalk_core::walker::{self, WalkConfig, WalkMode};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::rngs::StdRng;
use rand::seq::{index, IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn normal(rng: &mut StdRng) -> f64 {
    StandardNormal.sample(rng)
}

fn gaussian(rng: &mut StdRng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| normal(rng))
}

fn random_orthogonal(rng: &mut StdRng, d: usize) -> DMatrix<f64> {
    gaussian(rng, d, d).qr().q()
}

fn cosine_rows(m: &DMatrix<f64>, i: usize, j: usize) -> Option<f64> {
    let (a, b) = (m.row(i), m.row(j));
    let den = a.norm() * b.norm();
    (den > 0.0).then(|| a.dot(&b) / den)
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

/// Pearson correlation of pairwise row cosines in two matrices over random pairs.
fn pairwise_cosine_pearson(a: &DMatrix<f64>, b: &DMatrix<f64>, pairs: usize, seed: u64) -> f64 {
    let mut rng = StdRng::seed_from_u64(seed);
    let n = a.nrows();
    let (mut xs, mut ys) = (Vec::with_capacity(pairs), Vec::with_capacity(pairs));
    while xs.len() < pairs {
        let (i, j) = (rng.random_range(0..n), rng.random_range(0..n));
        if i == j {
            continue;
        }
        if let (Some(x), Some(y)) = (cosine_rows(a, i, j), cosine_rows(b, i, j)) {
            xs.push(x);
            ys.push(y);
        }
    }
    pearson(&xs, &ys)
}

fn covariance(x: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = x.nrows() as f64;
    let mean: Vec<f64> = (0..x.ncols()).map(|j| x.column(j).sum() / n).collect();
    let mut c = x.clone();
    for j in 0..x.ncols() {
        c.column_mut(j).add_scalar_mut(-mean[j]);
    }
    let cov = c.transpose() * &c / (n - 1.0);
    (mean, cov)
}

fn layered_graph(n: u32, seed: u64) -> MultiplexGraph {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut edges = Vec::new();
    let layers: Vec<u16> = (0..5).collect();
    for v in 0..n {
        let m = rng.random_range(2..=3);
        for &l in layers.choose_multiple(&mut rng, m) {
            for _ in 0..2 {
                let mut u = rng.random_range(0..n);
                while u == v {
                    u = rng.random_range(0..n);
                }
                edges.push((v, u, LayerId(l)));
            }
        }
    }
    MultiplexGraph::from_edges(n, 2009, canonical_layer_names(), edges).unwrap()
}

fn criterion_1_2() -> (Outcome, Outcome) {
    let graph = layered_graph(10_000, 11);
    let min_layers = (0..graph.num_nodes()).map(|v| graph.active_layers(v).count()).min().unwrap();
    let cfg = WalkConfig { mode: WalkMode::Aware, persistence: 0.8, walk_length: 40, walks_per_node: 4, seed: 11 };

    let start = Instant::now();
    let corpus = walker::generate_walks_parallel(&graph, &cfg, rayon::current_num_threads()).unwrap();
    let freq = walker::same_layer_run_frequency(&corpus, 4).unwrap();
    let t1 = start.elapsed().as_secs_f64();
    let first = outcome(
        min_layers >= 2 && freq >= 0.62 && t1 < 60.0,
        format!("4-person same-layer frequency {freq:.4} (>= 0.62), min active layers {min_layers}, {t1:.1}s"),
    );

    let start = Instant::now();
    let expected: u64 = corpus.walks().map(|w| (w.len() as u64 - 1) / 2).sum();
    let checked = walker::check_aware_soundness(&corpus, &graph);
    let t2 = start.elapsed().as_secs_f64() + t1;
    let second = match checked {
        Ok(c) => outcome(c == expected && c > 0 && t2 < 60.0, format!("{c}/{expected} triples are typed edges, {t2:.1}s")),
        Err(e) => outcome(false, format!("unsound triple: {e}")),
    };
    (first, second)
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(b.iter().map(|x| x * x).sum::<f64>().sqrt());
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

fn criterion_3() -> Outcome {
    let mut rng = StdRng::seed_from_u64(3);
    let (d, k, h) = (16, 5, 1e-6);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let mut vecs: Vec<Vec<f64>> =
            (0..k + 2).map(|_| (0..d).map(|_| 0.5 * normal(&mut rng)).collect()).collect();
        let loss = |v: &[Vec<f64>]| {
            let negs: Vec<&[f64]> = v[2..].iter().map(|x| x.as_slice()).collect();
            tuple_loss(&v[0], &v[1], &negs)
        };
        let analytic = {
            let negs: Vec<&[f64]> = vecs[2..].iter().map(|x| x.as_slice()).collect();
            tuple_gradient(&vecs[0], &vecs[1], &negs)
        };
        let mut grads = vec![analytic.center.clone(), analytic.context.clone()];
        grads.extend(analytic.negatives.iter().cloned());
        for (which, g) in grads.iter().enumerate() {
            let mut numeric = vec![0.0; d];
            for i in 0..d {
                let orig = vecs[which][i];
                vecs[which][i] = orig + h;
                let up = loss(&vecs);
                vecs[which][i] = orig - h;
                let down = loss(&vecs);
                vecs[which][i] = orig;
                numeric[i] = (up - down) / (2.0 * h);
            }
            worst = worst.max(rel_err(g, &numeric));
        }
    }
    outcome(worst < 1e-4, format!("worst relative gradient error {worst:.2e} over 100 tuples (< 1e-4)"))
}

fn criterion_4() -> Outcome {
    let mut rng = StdRng::seed_from_u64(4);
    let (n, d) = (500, 8);
    let x = gaussian(&mut rng, n, d);
    let a = gaussian(&mut rng, d, d);
    let b = gaussian(&mut rng, 1, d);
    let mut y = &x * &a;
    for mut row in y.row_iter_mut() {
        row += &b;
    }
    let ols = fit_ols(&x, &y).unwrap();
    let residual = ols.residual(&x, &y).unwrap();
    let aligned = ols.apply_rows(&x).unwrap();
    let r = pairwise_cosine_pearson(&aligned, &y, 20_000, 4);

    let q = random_orthogonal(&mut rng, d);
    let yq = &x * &q;
    let pro = fit_procrustes(&x, &yq).unwrap();
    let orth = pro.orthogonality_deviation();
    let map_err = (pro.matrix() - &q).abs().max();
    let icpt = pro.intercept.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    outcome(
        residual < 1e-8 && (1.0 - r).abs() < 1e-8 && orth < 1e-10 && map_err.max(icpt) < 1e-8,
        format!(
            "OLS residual {residual:.1e}, cosine Pearson 1 - {:.1e}; Procrustes orthogonality {orth:.1e}, map error {:.1e}",
            1.0 - r,
            map_err.max(icpt)
        ),
    )
}

fn criterion_5() -> Outcome {
    let (n, d, steps) = (1000, 16, 5);
    let mut ols_wins = 0;
    let mut monotone = true;
    let mut gaps = Vec::new();
    for seed in 0..10u64 {
        let mut rng = StdRng::seed_from_u64(500 + seed);
        let base = gaussian(&mut rng, n, d);
        let mut current = base.clone();
        let (mut ols_curve, mut pro_curve) = (Vec::new(), Vec::new());
        for _ in 0..steps {
            let drift = DMatrix::<f64>::identity(d, d) + gaussian(&mut rng, d, d) * (0.3 / (d as f64).sqrt());
            current = &current * drift + gaussian(&mut rng, n, d) * 0.25;
            let ols = fit_ols(&current, &base).unwrap().apply_rows(&current).unwrap();
            let pro = fit_procrustes(&current, &base).unwrap().apply_rows(&current).unwrap();
            ols_curve.push(pairwise_cosine_pearson(&ols, &base, 20_000, seed));
            pro_curve.push(pairwise_cosine_pearson(&pro, &base, 20_000, seed));
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        if mean(&ols_curve) > mean(&pro_curve) {
            ols_wins += 1;
        }
        gaps.push(mean(&ols_curve) - mean(&pro_curve));
        let non_increasing = |v: &[f64]| v.windows(2).all(|w| w[1] <= w[0]);
        monotone &= non_increasing(&ols_curve) && non_increasing(&pro_curve);
    }
    let min_gap = gaps.iter().cloned().fold(f64::INFINITY, f64::min);
    outcome(
        ols_wins >= 9 && monotone,
        format!("OLS ahead in {ols_wins}/10 seeds (smallest gap {min_gap:.4}), correlations non-increasing with distance: {monotone}"),
    )
}

fn anisotropic(rng: &mut StdRng, n: usize, d: usize, sd_max: f64, offset: f64) -> DMatrix<f64> {
    let mut z = gaussian(rng, n, d);
    for j in 0..d {
        let sd = sd_max.powf(j as f64 / (d - 1) as f64);
        z.column_mut(j).scale_mut(sd);
    }
    let mut x = z * random_orthogonal(rng, d);
    for j in 0..d {
        x.column_mut(j).add_scalar_mut(offset * (1.0 + j as f64 / d as f64));
    }
    x
}

fn criterion_6() -> Outcome {
    let mut rng = StdRng::seed_from_u64(6);
    let x = anisotropic(&mut rng, 5000, 10, 30.0, 4.0);
    let w = partition::fit_whitening_rows(&x, 1e-8).unwrap();
    let white = w.apply_rows(&x).unwrap();
    let (mean, cov) = covariance(&white);
    let mean_dev = mean.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let cov_dev = (cov - DMatrix::<f64>::identity(10, 10)).abs().max();
    let again = partition::fit_whitening_rows(&white, 1e-8).unwrap().apply_rows(&white).unwrap();
    let idem = (again - &white).abs().max();
    outcome(
        mean_dev < 1e-8 && cov_dev < 1e-6 && idem < 1e-6,
        format!("mean {mean_dev:.1e} (< 1e-8), covariance deviation {cov_dev:.1e} (< 1e-6), idempotence {idem:.1e} (< 1e-6)"),
    )
}

fn criterion_7() -> Outcome {
    let g2 = fibonacci_grid(10, 2).unwrap();
    let mut angles: Vec<f64> = (0..10).map(|j| {
        let p = g2.direction(j);
        p[1].atan2(p[0]).to_degrees().rem_euclid(360.0)
    }).collect();
    angles.sort_by(f64::total_cmp);
    let mut gaps: Vec<f64> = angles.windows(2).map(|w| w[1] - w[0]).collect();
    gaps.push(360.0 - angles[9] + angles[0]);
    let gap_ok = gaps.iter().all(|g| (g - 36.0).abs() <= 0.2 * 36.0);
    let (gmin, gmax) = gaps.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &g| (a.min(g), b.max(g)));

    let g3 = fibonacci_grid(100, 3).unwrap();
    let mut min_angle = f64::INFINITY;
    for i in 0..100 {
        for j in i + 1..100 {
            let dot: f64 = g3.direction(i).iter().zip(g3.direction(j)).map(|(a, b)| a * b).sum();
            min_angle = min_angle.min(dot.clamp(-1.0, 1.0).acos().to_degrees());
        }
    }

    let g128 = fibonacci_grid(100, 128).unwrap();
    let mut rng = StdRng::seed_from_u64(7);
    let data = gaussian(&mut rng, 100_000, 128);
    let labels = assign_rows(&data, &g128).unwrap();
    let mut counts = vec![0u64; 100];
    for c in labels {
        counts[c as usize] += 1;
    }
    let ratio = *counts.iter().max().unwrap() as f64 / 1000.0;
    outcome(
        gap_ok && min_angle > 10.0 && ratio < 3.0,
        format!(
            "d=2 gaps {gmin:.1}..{gmax:.1} deg (36 +/- 20%), d=3 min angle {min_angle:.2} deg (> 10), d=128 max/mean share {ratio:.2} (< 3)"
        ),
    )
}

fn criterion_8() -> Outcome {
    let mut rng = StdRng::seed_from_u64(8);
    let d = 16;
    let x = anisotropic(&mut rng, 20_000, d, 12.0, 1.5);
    let (_, cov) = covariance(&x);
    let eig = SymmetricEigen::new(cov).eigenvalues;
    let cond = eig.max() / eig.min();
    let grid = fibonacci_grid(50, d).unwrap();
    let gini = |rows: &DMatrix<f64>| {
        let mut counts = vec![0u64; 50];
        for c in assign_rows(rows, &grid).unwrap() {
            counts[c as usize] += 1;
        }
        balance_metrics(&counts).unwrap()
    };
    let raw = gini(&x);
    let w = partition::fit_whitening_rows(&x, 1e-8).unwrap();
    let white = gini(&w.apply_rows(&x).unwrap());
    outcome(
        cond >= 100.0 && white.gini < raw.gini,
        format!(
            "condition number {cond:.0}; Gini {:.3} -> {:.3}, clusters holding half {:.0}% -> {:.0}%",
            raw.gini,
            white.gini,
            100.0 * raw.fraction_for_half,
            100.0 * white.fraction_for_half
        ),
    )
}

fn criterion_9() -> Outcome {
    let (n, k) = (100_000usize, 100usize);
    let mut rng = StdRng::seed_from_u64(9);
    let part = |labels: Vec<u32>| {
        let mut counts = vec![0u64; k];
        labels.iter().for_each(|&c| counts[c as usize] += 1);
        Partition { k, assignment: labels, counts, unassignable: vec![], grid_fingerprint: 1, embedding_fingerprint: 0 }
    };
    let base = part((0..n).map(|_| rng.random_range(0..k as u32)).collect());
    let mut shuffled = base.assignment.clone();
    shuffled.shuffle(&mut rng);
    let relabeled = part(shuffled);
    let nodes: Vec<NodeId> = (0..n as NodeId).collect();
    let random = partition::retention(&base, &relabeled, &nodes).unwrap();
    let identity = partition::retention(&base, &base, &nodes).unwrap();
    outcome(
        (random - 0.01).abs() <= 0.003 && identity == 1.0,
        format!("random relabeling {random:.4} (0.01 +/- 0.003), identity {identity}"),
    )
}

fn population(k: usize, total: u64) -> Vec<u64> {
    let weights: Vec<f64> = (0..k).map(|i| (-(i as f64) / 15.0).exp()).collect();
    let sum: f64 = weights.iter().sum();
    let mut counts: Vec<u64> = weights.iter().map(|w| (w / sum * total as f64).floor() as u64).collect();
    let short = total - counts.iter().sum::<u64>();
    counts[0] += short;
    counts
}

/// Simple random sample of `size` units, drawn by index from an expanded population.
fn srs(pop: &[u64], size: usize, rng: &mut StdRng) -> Vec<u64> {
    let total: u64 = pop.iter().sum();
    let bounds: Vec<u64> = pop.iter().scan(0, |acc, &c| {
        *acc += c;
        Some(*acc)
    }).collect();
    let mut out = vec![0u64; pop.len()];
    for i in index::sample(rng, total as usize, size) {
        let c = bounds.partition_point(|&b| b <= i as u64);
        out[c] += 1;
    }
    out
}

fn criterion_10() -> Outcome {
    let start = Instant::now();
    let (k, size, q, alpha) = (50usize, 1000usize, 1000usize, 0.05);
    let pop = population(k, 100_000);
    let total: u64 = pop.iter().sum();

    let reps = 10_000u64;
    let rejections: usize = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = StdRng::seed_from_u64(10_000 + r);
            let input = AuditInput::new(pop.clone(), srs(&pop, size, &mut rng), q, r);
            usize::from(audit::global_misfit(&input).unwrap().p_global < alpha)
        })
        .sum();
    let type1 = rejections as f64 / reps as f64;

    let template = AuditInput::new(pop.clone(), srs(&pop, size, &mut StdRng::seed_from_u64(1)), q, 0);
    let wiggle = audit::default_wiggle(&template, &WiggleConfig::default()).unwrap();

    let null_runs = 4000u64;
    let clean: usize = (0..null_runs)
        .into_par_iter()
        .map(|r| {
            let mut rng = StdRng::seed_from_u64(50_000 + r);
            let input = AuditInput::new(pop.clone(), srs(&pop, size, &mut rng), q, 50_000 + r);
            usize::from(audit::audit_with_wiggle(&input, alpha, wiggle.clone()).unwrap().clusters.flags.is_empty())
        })
        .sum();
    let clean_rate = clean as f64 / null_runs as f64;

    // cluster 20 holds about 2% of the population; the sample gets three times its share
    let target = 20usize;
    let planted_count = (3.0 * pop[target] as f64 / total as f64 * size as f64).round() as usize;
    let mut rest = pop.clone();
    rest[target] = 0;
    let planted_runs = 1000u64;
    let detected: usize = (0..planted_runs)
        .into_par_iter()
        .map(|r| {
            let mut rng = StdRng::seed_from_u64(90_000 + r);
            let mut sample = srs(&rest, size - planted_count, &mut rng);
            sample[target] = planted_count as u64;
            let input = AuditInput::new(pop.clone(), sample, q, 90_000 + r);
            let res = audit::audit_with_wiggle(&input, alpha, wiggle.clone()).unwrap();
            usize::from(res.clusters.flags.contains(&target))
        })
        .sum();
    let power = detected as f64 / planted_runs as f64;
    let secs = start.elapsed().as_secs_f64();
    outcome(
        (type1 - 0.05).abs() <= 0.01 && power > 0.99 && clean_rate >= 0.94 && secs < 300.0,
        format!(
            "type I {type1:.4} (0.05 +/- 0.01), 3x cluster flagged {:.1}% (> 99%), null runs without flags {:.1}% (>= 94%), {secs:.0}s",
            100.0 * power,
            100.0 * clean_rate
        ),
    )
}

fn probe_rows(n: usize, d: usize, seed: u64, label: impl Fn(&[f64], &mut StdRng) -> bool) -> ProbeData {
    let mut rng = StdRng::seed_from_u64(seed);
    let x: Vec<f64> = (0..n * d).map(|_| normal(&mut rng)).collect();
    let y = x.chunks(d).map(|r| f64::from(u8::from(label(r, &mut rng)))).collect();
    ProbeData { dim: d, x, y, split: assign_splits(n, &mut rng) }
}

struct DemoRun {
    seconds: f64,
    report_json: Vec<u8>,
    report_csv: Vec<u8>,
    twin_auc: Option<f64>,
}

fn demo_run(dir: &Path) -> DemoRun {
    let start = Instant::now();
    let options = RunOptions { force: false, workers: rayon::current_num_threads(), quiet: true };
    let mut p = Pipeline::new(pipeline::demo_config(), dir, options).unwrap();
    p.run().unwrap();
    let seconds = start.elapsed().as_secs_f64();
    let (json, csv) = p.report_paths();
    let eval: EvalReport = read_json(&dir.join("eval/aware.json")).unwrap();
    DemoRun {
        seconds,
        report_json: std::fs::read(json).unwrap(),
        report_csv: std::fs::read(csv).unwrap(),
        twin_auc: eval.results.iter().find(|r| r.task == "twins").map(|r| r.test_metric),
    }
}

fn criterion_11(demo: &DemoRun) -> Outcome {
    let cfg = ProbeConfig::default();
    let random = probe_rows(5000, 16, 111, |_, rng| rng.random::<bool>());
    let (_, r) = train_probe_data("random", TaskKind::NodeBinary, &random, &cfg).unwrap();
    let w: Vec<f64> = (0..16).map(|i| (i as f64 - 7.5) / 4.0).collect();
    let planted = probe_rows(5000, 16, 112, |row, _| row.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() > 0.0);
    let (_, p) = train_probe_data("planted", TaskKind::NodeBinary, &planted, &cfg).unwrap();
    let twin = demo.twin_auc.unwrap_or(f64::NAN);
    outcome(
        (r.test_metric - 0.5).abs() <= 0.03 && p.test_metric > 0.99 && twin > 0.9,
        format!(
            "random labels AUC {:.4} (0.5 +/- 0.03), planted linear AUC {:.4} (> 0.99), twins with aware embeddings AUC {twin:.4} (> 0.9)",
            r.test_metric, p.test_metric
        ),
    )
}

const BINARY_TASKS: [&str; 4] = ["twins", "union", "fertility", "divorce"];

fn mean_binary_auc(report: &EvalReport) -> Option<f64> {
    let aucs: Vec<f64> = BINARY_TASKS
        .iter()
        .map(|t| report.results.iter().find(|r| r.task == *t).map(|r| r.test_metric))
        .collect::<Option<_>>()?;
    Some(aucs.iter().sum::<f64>() / aucs.len() as f64)
}

fn criterion_12() -> Outcome {
    let mut diffs = Vec::new();
    let mut missing = false;
    for seed in 1..=6u64 {
        let mut cfg = pipeline::demo_config();
        cfg.seed = seed;
        let (graphs, attrs) = synth::generate_synthetic(&cfg.synth, seed).unwrap();
        let suite = eval::build_tasks(&attrs, &graphs, &cfg.task_config()).unwrap();
        let mut means = Vec::new();
        for mode in [WalkMode::Aware, WalkMode::Blind] {
            let corpus = walker::generate_walks_parallel(&graphs[0], &cfg.walk_config(mode), rayon::current_num_threads()).unwrap();
            let emb = sgns::train(&corpus, &cfg.train_config(1)).unwrap();
            let report = pipeline::evaluate_tasks(&suite.tasks, &emb, &cfg.probe_config());
            means.push(mean_binary_auc(&report));
        }
        match (means[0], means[1]) {
            (Some(a), Some(b)) => diffs.push(a - b),
            _ => missing = true,
        }
    }
    let n = diffs.len() as f64;
    let mean = diffs.iter().sum::<f64>() / n;
    let sd = (diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let t = mean / (sd / n.sqrt());
    let p = 1.0 - StudentsT::new(0.0, 1.0, n - 1.0).unwrap().cdf(t);
    let shown: Vec<String> = diffs.iter().map(|d| format!("{d:+.4}")).collect();
    outcome(
        !missing && diffs.len() >= 5 && mean > 0.0 && p < 0.05,
        format!("aware - blind mean AUC per seed [{}], paired t = {t:.2}, one-sided p = {p:.4} (< 0.05)", shown.join(", ")),
    )
}

fn criterion_13(a: &DemoRun, b: &DemoRun) -> Outcome {
    let same = a.report_json == b.report_json && a.report_csv == b.report_csv;
    let slowest = a.seconds.max(b.seconds);
    outcome(
        same && slowest < 900.0,
        format!("reports byte-identical: {same}; pipeline wall time {:.0}s and {:.0}s (< 900s)", a.seconds, b.seconds),
    )
}

fn report(n: usize, o: &Outcome, failures: &mut usize) {
    if !o.pass {
        *failures += 1;
    }
    println!("criterion {n:>2}: {} | {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
}

fn main() {
    // `cargo test -- --list` and filtered runs should not start the suite
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    if let Some(filter) = args.iter().find(|a| !a.starts_with('-')) {
        if !"acceptance".contains(filter.as_str()) {
            return;
        }
    }

    // ACCEPTANCE_CRITERIA=10,12 runs a subset
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_CRITERIA")
        .ok()
        .map(|v| v.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let on = |n: usize| only.as_ref().is_none_or(|o| o.contains(&n));

    let mut failures = 0;
    let mut ran = 0;
    let mut emit = |n: usize, o: Outcome| {
        ran += 1;
        report(n, &o, &mut failures);
    };
    if on(1) || on(2) {
        let (c1, c2) = criterion_1_2();
        if on(1) {
            emit(1, c1);
        }
        if on(2) {
            emit(2, c2);
        }
    }
    let simple: [(usize, fn() -> Outcome); 8] = [
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
    ];
    for (n, f) in simple {
        if on(n) {
            emit(n, f());
        }
    }

    let tmp = tempfile::tempdir().unwrap();
    let first = (on(11) || on(13)).then(|| demo_run(&tmp.path().join("a")));
    if on(11) {
        emit(11, criterion_11(first.as_ref().unwrap()));
    }
    if on(12) {
        emit(12, criterion_12());
    }
    if on(13) {
        let second = demo_run(&tmp.path().join("b"));
        emit(13, criterion_13(first.as_ref().unwrap(), &second));
    }

    println!("acceptance: {} of {ran} criteria passed", ran - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}

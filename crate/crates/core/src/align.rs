//! Alignment of yearly embedding spaces onto a base year.
//!
//! The primary map is a per-dimension least-squares regression with
//! intercept: every target dimension is regressed on the full source
//! vector. Orthogonal Procrustes on column-centered data is the baseline.

use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::NodeId;
use crate::linalg::{column_means, ensure_finite, gather_rows};
use crate::rng;
use crate::sgns::{cosine_f32, EmbeddingMatrix, TransformRecord};
use crate::stats;

/// Ridge used when the least-squares design is rank deficient.
pub const RIDGE_FALLBACK: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum AlignMethod {
    Ols,
    Procrustes,
}

impl AlignMethod {
    pub fn name(self) -> &'static str {
        match self {
            AlignMethod::Ols => "ols",
            AlignMethod::Procrustes => "procrustes",
        }
    }
}

impl core::str::FromStr for AlignMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ols" => Ok(AlignMethod::Ols),
            "procrustes" => Ok(AlignMethod::Procrustes),
            other => Err(Error::Config(alloc::format!("unknown alignment method {other:?}"))),
        }
    }
}

/// Affine map `x -> x A + b` between embedding spaces.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LinearAlignment {
    pub method: AlignMethod,
    pub source_year: i32,
    pub target_year: i32,
    pub d_source: usize,
    pub d_target: usize,
    /// `d_source x d_target`, row-major.
    pub matrix: Vec<f64>,
    pub intercept: Vec<f64>,
    /// True when the ridge fallback was used.
    #[cfg_attr(feature = "serde", serde(default))]
    pub regularized: bool,
}

impl LinearAlignment {
    pub fn identity(d: usize) -> Self {
        LinearAlignment {
            method: AlignMethod::Ols,
            source_year: 0,
            target_year: 0,
            d_source: d,
            d_target: d,
            matrix: DMatrix::<f64>::identity(d, d).transpose().as_slice().to_vec(),
            intercept: alloc::vec![0.0; d],
            regularized: false,
        }
    }

    fn from_parts(method: AlignMethod, a: &DMatrix<f64>, b: Vec<f64>, regularized: bool) -> Result<Self> {
        // nalgebra is column-major; store row-major
        let matrix: Vec<f64> = a.transpose().as_slice().to_vec();
        if matrix.iter().chain(&b).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("alignment parameters"));
        }
        Ok(LinearAlignment {
            method,
            source_year: 0,
            target_year: 0,
            d_source: a.nrows(),
            d_target: a.ncols(),
            matrix,
            intercept: b,
            regularized,
        })
    }

    pub fn with_years(mut self, source_year: i32, target_year: i32) -> Self {
        self.source_year = source_year;
        self.target_year = target_year;
        self
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.d_source, self.d_target, &self.matrix)
    }

    pub fn map_row(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.intercept);
        for (i, &xi) in x.iter().enumerate() {
            let row = &self.matrix[i * self.d_target..(i + 1) * self.d_target];
            for (o, &a) in out.iter_mut().zip(row) {
                *o += xi * a;
            }
        }
    }

    /// Applies the map to every row of `x`.
    pub fn apply_rows(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.d_source {
            return Err(Error::DimensionMismatch { expected: self.d_source, actual: x.ncols() });
        }
        let mut y = x * self.matrix();
        for mut row in y.row_iter_mut() {
            for (v, b) in row.iter_mut().zip(&self.intercept) {
                *v += b;
            }
        }
        Ok(y)
    }

    /// Largest absolute entry of `A^T A - I`.
    pub fn orthogonality_deviation(&self) -> f64 {
        let a = self.matrix();
        let g = a.transpose() * &a - DMatrix::<f64>::identity(self.d_target, self.d_target);
        g.abs().max()
    }

    /// Frobenius norm of the fit residual `X A + 1 b^T - Y`.
    pub fn residual(&self, x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<f64> {
        Ok((self.apply_rows(x)? - y).norm())
    }
}

fn check_pair(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<()> {
    if x.nrows() != y.nrows() {
        return Err(Error::DimensionMismatch { expected: x.nrows(), actual: y.nrows() });
    }
    if x.nrows() < x.ncols() + 1 {
        return Err(Error::UnderDetermined { rows: x.nrows(), params: x.ncols() + 1 });
    }
    ensure_finite(x, "source embeddings")?;
    ensure_finite(y, "target embeddings")
}

/// Least-squares affine map from rows of `x` to rows of `y`.
pub fn fit_ols(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<LinearAlignment> {
    check_pair(x, y)?;
    let (n, d) = (x.nrows(), x.ncols());
    let mut z = DMatrix::<f64>::zeros(n, d + 1);
    z.columns_mut(0, d).copy_from(x);
    z.column_mut(d).fill(1.0);

    let qr = z.clone().qr();
    let r = qr.r();
    let r_diag = r.diagonal().abs();
    let (lo, hi) = (r_diag.min(), r_diag.max());
    let full_rank = hi > 0.0 && lo > 1e-10 * hi;
    let solved = full_rank.then(|| r.solve_upper_triangular(&(qr.q().transpose() * y))).flatten();
    let (beta, regularized) = match solved {
        Some(beta) => (beta, false),
        None => {
            let mut gram = z.transpose() * &z;
            for i in 0..=d {
                gram[(i, i)] += RIDGE_FALLBACK;
            }
            let rhs = z.transpose() * y;
            let beta = gram
                .cholesky()
                .ok_or_else(|| Error::Undefined("ridge system is not positive definite".into()))?
                .solve(&rhs);
            (beta, true)
        }
    };
    let a = beta.rows(0, d).into_owned();
    let b = beta.row(d).iter().copied().collect();
    LinearAlignment::from_parts(AlignMethod::Ols, &a, b, regularized)
}

/// Orthogonal Procrustes on column-centered data, without scaling.
pub fn fit_procrustes(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<LinearAlignment> {
    check_pair(x, y)?;
    if x.ncols() != y.ncols() {
        return Err(Error::DimensionMismatch { expected: x.ncols(), actual: y.ncols() });
    }
    let (mx, my) = (column_means(x), column_means(y));
    let mut xc = x.clone();
    let mut yc = y.clone();
    for j in 0..x.ncols() {
        xc.column_mut(j).add_scalar_mut(-mx[j]);
        yc.column_mut(j).add_scalar_mut(-my[j]);
    }
    let svd = (xc.transpose() * yc).svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::Undefined("SVD did not converge".into())),
    };
    let a = u * v_t;
    let mean_mapped = nalgebra::RowDVector::from_row_slice(&mx) * &a;
    let b = my.iter().zip(mean_mapped.iter()).map(|(t, s)| t - s).collect();
    LinearAlignment::from_parts(AlignMethod::Procrustes, &a, b, false)
}

/// Person tokens present in both spaces.
pub fn common_nodes(a: &EmbeddingMatrix, b: &EmbeddingMatrix) -> Vec<NodeId> {
    let pb = b.present_nodes();
    a.present_nodes().into_iter().filter(|v| pb.binary_search(v).is_ok()).collect()
}

/// Fits a map from `source` onto `target` using their common person tokens.
pub fn fit_embeddings(source: &EmbeddingMatrix, target: &EmbeddingMatrix, method: AlignMethod) -> Result<LinearAlignment> {
    let nodes = common_nodes(source, target);
    let x = gather_rows(source, &nodes)?;
    let y = gather_rows(target, &nodes)?;
    let al = match method {
        AlignMethod::Ols => fit_ols(&x, &y)?,
        AlignMethod::Procrustes => fit_procrustes(&x, &y)?,
    };
    Ok(al.with_years(source.meta.year, target.meta.year))
}

/// Maps every row of `emb` (persons and hubs) through `alignment`.
pub fn apply(alignment: &LinearAlignment, emb: &EmbeddingMatrix) -> Result<EmbeddingMatrix> {
    if emb.dim() != alignment.d_source {
        return Err(Error::DimensionMismatch { expected: alignment.d_source, actual: emb.dim() });
    }
    let mut x = alloc::vec![0.0f64; alignment.d_source];
    let mut y = alloc::vec![0.0f64; alignment.d_target];
    let mut out = Vec::with_capacity(emb.vocab_size() * alignment.d_target);
    for t in 0..emb.vocab_size() {
        for (xi, &v) in x.iter_mut().zip(emb.row(t)) {
            *xi = f64::from(v);
        }
        alignment.map_row(&x, &mut y);
        out.extend(y.iter().map(|&v| v as f32));
    }
    let mut meta = emb.meta.clone();
    meta.transforms.push(TransformRecord::Alignment {
        method: String::from(alignment.method.name()),
        source_year: alignment.source_year,
        target_year: alignment.target_year,
    });
    EmbeddingMatrix::from_vectors(emb.vocab_size(), alignment.d_target, out, meta)
}

/// Correlation of pairwise cosine similarities between two spaces.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PairSimilarityEval {
    pub n_pairs: usize,
    pub pearson: f64,
    pub spearman: f64,
    pub seed: u64,
}

/// Draws `n_pairs` distinct unordered pairs of distinct entries of `nodes`.
pub fn sample_pairs(nodes: &[NodeId], n_pairs: usize, seed: u64) -> Result<Vec<(NodeId, NodeId)>> {
    let n = nodes.len() as u128;
    let available = n * n.saturating_sub(1) / 2;
    if n_pairs as u128 > available {
        return Err(Error::Config(alloc::format!("{n_pairs} pairs requested, only {available} exist")));
    }
    let mut rng = rng::keyed(seed, rng::domain::PAIRS, 0);
    let mut seen = alloc::collections::BTreeSet::new();
    let mut out = Vec::with_capacity(n_pairs);
    while out.len() < n_pairs {
        let i = rng.random_range(0..nodes.len());
        let j = rng.random_range(0..nodes.len());
        if i == j {
            continue;
        }
        let key = (i.min(j), i.max(j));
        if seen.insert(key) {
            out.push((nodes[key.0], nodes[key.1]));
        }
    }
    Ok(out)
}

/// Pearson and Spearman correlation of two similarity functions over
/// random node pairs. Pairs where either similarity is undefined are
/// skipped.
pub fn evaluate_pairs_with<A, B>(nodes: &[NodeId], n_pairs: usize, seed: u64, sim_a: A, sim_b: B) -> Result<PairSimilarityEval>
where
    A: Fn(NodeId, NodeId) -> Option<f64>,
    B: Fn(NodeId, NodeId) -> Option<f64>,
{
    if n_pairs < 2 {
        return Err(Error::Config("at least two pairs are needed".into()));
    }
    let pairs = sample_pairs(nodes, n_pairs, seed)?;
    let (mut a, mut b) = (Vec::with_capacity(n_pairs), Vec::with_capacity(n_pairs));
    for (u, v) in pairs {
        if let (Some(x), Some(y)) = (sim_a(u, v), sim_b(u, v)) {
            a.push(x);
            b.push(y);
        }
    }
    Ok(PairSimilarityEval {
        n_pairs: a.len(),
        pearson: stats::pearson(&a, &b)?,
        spearman: stats::spearman(&a, &b)?,
        seed,
    })
}

/// Compares pairwise cosines of the same nodes in two embedding spaces,
/// e.g. a source space against its aligned image, or an aligned space
/// against the base-year target.
pub fn evaluate_pairs(
    first: &EmbeddingMatrix,
    second: &EmbeddingMatrix,
    nodes: &[NodeId],
    n_pairs: usize,
    seed: u64,
) -> Result<PairSimilarityEval> {
    for &v in nodes {
        if v as usize >= first.vocab_size() || v as usize >= second.vocab_size() {
            return Err(Error::MalformedInput(alloc::format!("node {v} outside vocabulary")));
        }
    }
    evaluate_pairs_with(
        nodes,
        n_pairs,
        seed,
        |u, v| cosine_f32(first.row(u as usize), first.row(v as usize)),
        |u, v| cosine_f32(second.row(u as usize), second.row(v as usize)),
    )
}

/// Row-cosine similarity on an f64 matrix.
pub fn row_cosine(m: &DMatrix<f64>, i: usize, j: usize) -> Option<f64> {
    let (a, b) = (m.row(i), m.row(j));
    let (na, nb) = (a.norm(), b.norm());
    (na > 0.0 && nb > 0.0).then(|| (a.dot(&b) / (na * nb)).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sgns::EmbeddingMeta;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(n: usize, d: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = rng::keyed(seed, 99, 0);
        DMatrix::from_fn(n, d, |_, _| StandardNormal.sample(&mut rng))
    }

    #[test]
    fn ols_exact_recovery() {
        let x = gaussian(200, 6, 1);
        let a = gaussian(6, 6, 2);
        let b = gaussian(1, 6, 3);
        let mut y = &x * &a;
        for mut row in y.row_iter_mut() {
            row += &b;
        }
        let al = fit_ols(&x, &y).unwrap();
        assert!(!al.regularized);
        let rel = (al.matrix() - &a).norm() / a.norm();
        assert!(rel < 1e-8, "{rel}");
        for (got, want) in al.intercept.iter().zip(b.iter()) {
            assert!((got - want).abs() < 1e-8);
        }
        assert!(al.residual(&x, &y).unwrap() < 1e-6);
    }

    #[test]
    fn identical_spaces_give_identity() {
        let x = gaussian(100, 5, 4);
        let ols = fit_ols(&x, &x).unwrap();
        assert!((ols.matrix() - DMatrix::<f64>::identity(5, 5)).abs().max() < 1e-8);
        assert!(ols.intercept.iter().all(|b| b.abs() < 1e-8));
        let pro = fit_procrustes(&x, &x).unwrap();
        assert!((pro.matrix() - DMatrix::<f64>::identity(5, 5)).abs().max() < 1e-8);
    }

    #[test]
    fn procrustes_recovers_rotation() {
        let x = gaussian(150, 5, 5);
        let r = gaussian(5, 5, 6).qr().q();
        let y = &x * &r;
        let al = fit_procrustes(&x, &y).unwrap();
        assert!((al.matrix() - &r).abs().max() < 1e-8);
        assert!(al.residual(&x, &y).unwrap() < 1e-6);
        assert!(al.orthogonality_deviation() < 1e-10);
    }

    #[test]
    fn underdetermined_and_nonfinite() {
        let x = gaussian(5, 5, 7);
        assert!(matches!(fit_ols(&x, &x), Err(Error::UnderDetermined { .. })));
        let mut x = gaussian(10, 2, 8);
        x[(0, 0)] = f64::NAN;
        assert!(matches!(fit_ols(&x, &x), Err(Error::NonFinite(_))));
    }

    #[test]
    fn rank_deficient_uses_ridge() {
        let mut x = gaussian(50, 4, 9);
        let c = x.column(0).into_owned();
        x.column_mut(1).copy_from(&c);
        let y = gaussian(50, 4, 10);
        let al = fit_ols(&x, &y).unwrap();
        assert!(al.regularized);
        assert!(al.matrix.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn identity_apply_is_exact() {
        let data: Vec<f32> = (0..12).map(|i| i as f32 * 0.37 - 2.0).collect();
        let emb = EmbeddingMatrix::from_vectors(4, 3, data.clone(), EmbeddingMeta::default()).unwrap();
        let out = apply(&LinearAlignment::identity(3), &emb).unwrap();
        assert_eq!(out.vectors(), &data[..]);
        assert_eq!(out.meta.transforms.len(), 1);
        assert!(apply(&LinearAlignment::identity(4), &emb).is_err());
    }

    #[test]
    fn pair_eval_identity() {
        let data: Vec<f32> = (0..60).map(|i| ((i * 37 % 11) as f32) - 5.0).collect();
        let emb = EmbeddingMatrix::from_vectors(20, 3, data, EmbeddingMeta::default()).unwrap();
        let nodes: Vec<NodeId> = (0..20).collect();
        let e = evaluate_pairs(&emb, &emb, &nodes, 50, 1).unwrap();
        assert!((e.pearson - 1.0).abs() < 1e-12 && (e.spearman - 1.0).abs() < 1e-12);
        assert!(evaluate_pairs(&emb, &emb, &nodes, 1, 1).is_err());
        assert!(evaluate_pairs(&emb, &emb, &nodes, 1000, 1).is_err());
    }

    #[test]
    fn sampled_pairs_are_distinct() {
        let nodes: Vec<NodeId> = (0..10).collect();
        let pairs = sample_pairs(&nodes, 45, 3).unwrap();
        let set: alloc::collections::BTreeSet<_> = pairs.iter().collect();
        assert_eq!(set.len(), 45);
        assert!(pairs.iter().all(|(a, b)| a < b));
    }
}

//! Dense helpers on top of nalgebra.

use alloc::vec::Vec;
use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::graph::NodeId;
use crate::sgns::EmbeddingMatrix;

/// Gathers embedding rows for `nodes` into an `n x d` f64 matrix.
pub fn gather_rows(emb: &EmbeddingMatrix, nodes: &[NodeId]) -> Result<DMatrix<f64>> {
    let d = emb.dim();
    for &v in nodes {
        if v as usize >= emb.vocab_size() {
            return Err(Error::MalformedInput(alloc::format!("node {v} outside vocabulary")));
        }
    }
    Ok(DMatrix::from_fn(nodes.len(), d, |i, j| f64::from(emb.row(nodes[i] as usize)[j])))
}

pub fn column_means(x: &DMatrix<f64>) -> Vec<f64> {
    let n = x.nrows() as f64;
    (0..x.ncols()).map(|j| x.column(j).iter().sum::<f64>() / n).collect()
}

pub fn ensure_finite(x: &DMatrix<f64>, what: &'static str) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

/// Sample covariance with `n - 1` denominator.
pub fn covariance(x: &DMatrix<f64>) -> DMatrix<f64> {
    let means = column_means(x);
    let mut centered = x.clone();
    for j in 0..x.ncols() {
        centered.column_mut(j).add_scalar_mut(-means[j]);
    }
    let denom = (x.nrows().max(2) - 1) as f64;
    (centered.transpose() * &centered) / denom
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Off-diagonal entries negligible relative to their diagonal pair are left
/// untouched, so an (almost) diagonal input keeps the coordinate axes as its
/// eigenvectors and the original order. Eigenvalues are not sorted.
/// Returns `(eigenvalues, eigenvectors as columns)`.
pub fn symmetric_eigen_jacobi(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    const REL_TOL: f64 = 1e-13;
    const MAX_SWEEPS: usize = 100;
    let n = a.nrows();
    let mut m = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                let (app, aqq) = (m[(p, p)], m[(q, q)]);
                let scale = libm::sqrt(libm::fabs(app * aqq)).max(libm::fabs(app).max(libm::fabs(aqq)) * 1e-300);
                if apq == 0.0 || libm::fabs(apq) <= REL_TOL * scale {
                    continue;
                }
                rotated = true;
                let theta = (aqq - app) / (2.0 * apq);
                let t = libm::copysign(1.0, theta) / (libm::fabs(theta) + libm::sqrt(theta * theta + 1.0));
                let c = 1.0 / libm::sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[(k, p)], m[(k, q)]);
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[(p, k)], m[(q, k)]);
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    ((0..n).map(|i| m[(i, i)]).collect(), v)
}

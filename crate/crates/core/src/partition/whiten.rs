use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::graph::NodeId;
use crate::linalg::{column_means, covariance, ensure_finite, gather_rows, symmetric_eigen_jacobi};
use crate::rng::Fingerprint;
use crate::sgns::{EmbeddingMatrix, TransformRecord};

/// PCA whitening `x -> (x - mean) W` with `W = E diag(1 / sqrt(max(l, floor)))`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WhiteningTransform {
    pub dim: usize,
    pub mean: Vec<f64>,
    /// `d x d`, row-major.
    pub matrix: Vec<f64>,
    /// Covariance eigenvalues, in the column order of `matrix`.
    pub eigenvalues: Vec<f64>,
    pub floor: f64,
}

/// Fits a whitening transform on the rows of `data`.
///
/// Eigenvector signs are canonicalized so that each column's largest
/// magnitude component is positive.
pub fn fit_whitening_rows(data: &DMatrix<f64>, floor: f64) -> Result<WhiteningTransform> {
    let (n, d) = (data.nrows(), data.ncols());
    if n < d + 1 {
        return Err(Error::UnderDetermined { rows: n, params: d + 1 });
    }
    ensure_finite(data, "whitening input")?;
    if !(floor > 0.0) {
        return Err(Error::Config("eigenvalue floor must be positive".into()));
    }
    let mean = column_means(data);
    let (eigenvalues, mut vecs) = symmetric_eigen_jacobi(&covariance(data));
    for j in 0..d {
        let mut col = vecs.column_mut(j);
        let pivot = col.iter().copied().fold(0.0f64, |best, v| if v.abs() > best.abs() { v } else { best });
        if pivot < 0.0 {
            col.neg_mut();
        }
        let scale = 1.0 / libm::sqrt(eigenvalues[j].max(floor));
        col.scale_mut(scale);
    }
    Ok(WhiteningTransform { dim: d, mean, matrix: vecs.transpose().as_slice().to_vec(), eigenvalues, floor })
}

/// Fits whitening on the embeddings of `nodes`.
pub fn fit_whitening(emb: &EmbeddingMatrix, nodes: &[NodeId], floor: f64) -> Result<WhiteningTransform> {
    fit_whitening_rows(&gather_rows(emb, nodes)?, floor)
}

impl WhiteningTransform {
    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.matrix)
    }

    pub fn fingerprint(&self) -> u64 {
        Fingerprint::default().f64s(&self.mean).f64s(&self.matrix).finish()
    }

    pub fn apply_row(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (i, (&xi, &mi)) in x.iter().zip(&self.mean).enumerate() {
            let c = xi - mi;
            let row = &self.matrix[i * self.dim..(i + 1) * self.dim];
            for (o, &w) in out.iter_mut().zip(row) {
                *o += c * w;
            }
        }
    }

    pub fn apply_rows(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, actual: x.ncols() });
        }
        let mut centered = x.clone();
        for j in 0..self.dim {
            centered.column_mut(j).add_scalar_mut(-self.mean[j]);
        }
        Ok(centered * self.matrix())
    }

    /// Whitens every row of `emb`.
    pub fn apply(&self, emb: &EmbeddingMatrix) -> Result<EmbeddingMatrix> {
        if emb.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, actual: emb.dim() });
        }
        let mut x = alloc::vec![0.0; self.dim];
        let mut y = alloc::vec![0.0; self.dim];
        let mut out = Vec::with_capacity(emb.vectors().len());
        for t in 0..emb.vocab_size() {
            for (xi, &v) in x.iter_mut().zip(emb.row(t)) {
                *xi = f64::from(v);
            }
            self.apply_row(&x, &mut y);
            out.extend(y.iter().map(|&v| v as f32));
        }
        let mut meta = emb.meta.clone();
        meta.transforms.push(TransformRecord::Whitening { fingerprint: self.fingerprint() });
        EmbeddingMatrix::from_vectors(emb.vocab_size(), self.dim, out, meta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(n: usize, d: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = rng::keyed(seed, 77, 0);
        DMatrix::from_fn(n, d, |_, _| StandardNormal.sample(&mut rng))
    }

    fn cov_deviation(x: &DMatrix<f64>) -> f64 {
        (covariance(x) - DMatrix::<f64>::identity(x.ncols(), x.ncols())).abs().max()
    }

    #[test]
    fn anisotropic_gaussian_is_whitened() {
        // generator with covariance eigenvalues [100, 1], rotated by 30 degrees
        let z = gaussian(10_000, 2, 1);
        let (c, s) = (libm::cos(core::f64::consts::FRAC_PI_6), libm::sin(core::f64::consts::FRAC_PI_6));
        let m = DMatrix::from_row_slice(2, 2, &[10.0 * c, 10.0 * s, -s, c]);
        let x = &z * m;
        let w = fit_whitening_rows(&x, 1e-9).unwrap();
        let white = w.apply_rows(&x).unwrap();
        assert!(cov_deviation(&white) < 1e-6);
        assert!(column_means(&white).iter().all(|m| m.abs() < 1e-8));
        let mut ev = w.eigenvalues.clone();
        ev.sort_by(f64::total_cmp);
        assert!((ev[1] / 100.0 - 1.0).abs() < 0.05 && (ev[0] - 1.0).abs() < 0.05);
        // fresh draws from the same generator: whitened covariance close to I
        let fresh = &gaussian(10_000, 2, 2) * DMatrix::from_row_slice(2, 2, &[10.0 * c, 10.0 * s, -s, c]);
        assert!(cov_deviation(&w.apply_rows(&fresh).unwrap()) < 5e-2);
    }

    #[test]
    fn idempotent_on_white_data() {
        let x = gaussian(2_000, 6, 3) * DMatrix::from_fn(6, 6, |i, j| if i == j { (i + 1) as f64 } else { 0.3 });
        let white = fit_whitening_rows(&x, 1e-9).unwrap().apply_rows(&x).unwrap();
        let again = fit_whitening_rows(&white, 1e-9).unwrap();
        assert!((again.matrix() - DMatrix::<f64>::identity(6, 6)).abs().max() < 1e-6);
        assert!(again.mean.iter().all(|m| m.abs() < 1e-8));
    }

    #[test]
    fn duplicate_dimension_is_floored() {
        let mut x = gaussian(500, 3, 4);
        let c = x.column(0).into_owned();
        x.column_mut(2).copy_from(&c);
        let w = fit_whitening_rows(&x, 1e-6).unwrap();
        let white = w.apply_rows(&x).unwrap();
        assert!(white.iter().all(|v| v.is_finite()));
        let cov = covariance(&white);
        assert!((0..3).all(|i| cov[(i, i)] <= 1.0 + 1e-6));
    }

    #[test]
    fn rejects_too_few_rows() {
        assert!(fit_whitening_rows(&gaussian(3, 3, 5), 1e-9).is_err());
    }
}

//! Principal component analysis via the sample covariance matrix.
//!
//! The covariance (divisor `N - 1`) is decomposed with a dense symmetric
//! eigensolver. Components are ordered by descending eigenvalue and each one
//! is sign-flipped so that its largest-magnitude entry is positive.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{check_dims, EmbeddingVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    input_dim: usize,
    mean: Vec<f64>,
    /// Row-major `output_dim x input_dim`.
    components: Vec<f64>,
    explained_variance: Vec<f64>,
}

impl PcaModel {
    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.explained_variance.len()
    }

    pub fn mean(&self) -> EmbeddingVector {
        EmbeddingVector::from_f64(&self.mean).expect("mean is finite")
    }

    pub fn mean_f64(&self) -> &[f64] {
        &self.mean
    }

    pub fn component(&self, i: usize) -> &[f64] {
        &self.components[i * self.input_dim..(i + 1) * self.input_dim]
    }

    pub fn components(&self) -> impl Iterator<Item = &[f64]> {
        self.components.chunks_exact(self.input_dim)
    }

    pub fn explained_variance(&self) -> &[f64] {
        &self.explained_variance
    }

    /// `components · (v - mean)`.
    pub fn transform(&self, v: &EmbeddingVector) -> Result<EmbeddingVector> {
        check_dims(self.input_dim, v.dim())?;
        let out = self.transform_f64(v.as_slice());
        EmbeddingVector::from_f64(&out)
    }

    pub(crate) fn transform_f64(&self, v: &[f32]) -> Vec<f64> {
        let centered: Vec<f64> = v
            .iter()
            .zip(&self.mean)
            .map(|(&x, &m)| f64::from(x) - m)
            .collect();
        self.components()
            .map(|c| c.iter().zip(&centered).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `components · v`: the projection onto the principal subspace expressed
    /// relative to the origin rather than the mean. Differs from
    /// [`transform`](Self::transform) by the constant `components · mean`.
    pub fn transform_uncentered(&self, v: &EmbeddingVector) -> Result<EmbeddingVector> {
        check_dims(self.input_dim, v.dim())?;
        let out: Vec<f64> = self
            .components()
            .map(|c| {
                c.iter()
                    .zip(v.as_slice())
                    .map(|(a, &b)| a * f64::from(b))
                    .sum()
            })
            .collect();
        EmbeddingVector::from_f64(&out)
    }

    /// `mean + componentsᵀ · y`.
    pub fn inverse_transform(&self, y: &EmbeddingVector) -> Result<EmbeddingVector> {
        check_dims(self.output_dim(), y.dim())?;
        let mut out = self.mean.clone();
        for (c, &w) in self.components().zip(y.as_slice()) {
            let w = f64::from(w);
            for (o, a) in out.iter_mut().zip(c) {
                *o += a * w;
            }
        }
        EmbeddingVector::from_f64(&out)
    }
}

pub fn pca_fit(vs: &[EmbeddingVector], output_dim: usize) -> Result<PcaModel> {
    let rows: Vec<&[f32]> = vs.iter().map(|v| v.as_slice()).collect();
    fit_rows(&rows, output_dim)
}

pub(crate) fn fit_rows(rows: &[&[f32]], output_dim: usize) -> Result<PcaModel> {
    let n = rows.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "PCA needs at least 2 vectors, got {n}"
        )));
    }
    let dim = rows[0].len();
    for r in rows {
        check_dims(dim, r.len())?;
    }
    if output_dim == 0 || output_dim > dim {
        return Err(Error::DimMismatch {
            expected: dim,
            got: output_dim,
        });
    }
    if output_dim > n {
        return Err(Error::InsufficientData(format!(
            "PCA to {output_dim} dims needs at least {output_dim} vectors, got {n}"
        )));
    }

    let mut mean = vec![0.0f64; dim];
    for r in rows {
        for (m, &x) in mean.iter_mut().zip(*r) {
            *m += f64::from(x);
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }

    let centered = DMatrix::from_fn(n, dim, |i, j| f64::from(rows[i][j]) - mean[j]);
    let mut cov = centered.tr_mul(&centered);
    cov /= (n - 1) as f64;
    // tr_mul is symmetric up to rounding; make it exact.
    for i in 0..dim {
        for j in 0..i {
            let v = 0.5 * (cov[(i, j)] + cov[(j, i)]);
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }

    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });

    let mut components = Vec::with_capacity(output_dim * dim);
    let mut explained_variance = Vec::with_capacity(output_dim);
    for &idx in order.iter().take(output_dim) {
        let col = eig.eigenvectors.column(idx);
        let mut pivot = 0;
        for j in 1..dim {
            if col[j].abs() > col[pivot].abs() {
                pivot = j;
            }
        }
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        components.extend(col.iter().map(|&x| x * sign));
        explained_variance.push(eig.eigenvalues[idx].max(0.0));
    }

    Ok(PcaModel {
        input_dim: dim,
        mean,
        components,
        explained_variance,
    })
}

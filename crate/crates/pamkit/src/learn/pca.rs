//! Principal component analysis via eigendecomposition of the
//! sample covariance.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{LabeledDataset, LearnError};

/// Principal axes of a dataset, strongest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaResult {
    /// Unit-norm components, one row per axis.
    pub components: Vec<Vec<f64>>,
    /// Fraction of total variance captured by each component.
    pub explained_variance: Vec<f64>,
    pub mean: Vec<f64>,
}

impl PcaResult {
    /// Coordinates of one vector in the component basis.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        self.components
            .iter()
            .map(|c| c.iter().zip(x).zip(&self.mean).map(|((ci, xi), mi)| ci * (xi - mi)).sum())
            .collect()
    }
}

/// Computes the leading principal components of the dataset's
/// feature vectors. `n_components` may not exceed the feature count
/// or the sample count minus one.
pub fn pca(ds: &LabeledDataset, n_components: usize) -> Result<PcaResult, LearnError> {
    let n = ds.vectors.len();
    let dim = ds.vectors[0].values.len();
    let max_components = dim.min(n - 1);
    if n_components == 0 || n_components > max_components {
        return Err(LearnError::TooManyComponents {
            requested: n_components,
            max: max_components,
        });
    }

    let mut mean = vec![0.0; dim];
    for v in &ds.vectors {
        for (m, &x) in mean.iter_mut().zip(&v.values) {
            *m += x;
        }
    }
    for m in mean.iter_mut() {
        *m /= n as f64;
    }

    let mut cov = DMatrix::<f64>::zeros(dim, dim);
    for v in &ds.vectors {
        for i in 0..dim {
            for j in 0..dim {
                cov[(i, j)] += (v.values[i] - mean[i]) * (v.values[j] - mean[j]);
            }
        }
    }
    cov /= (n - 1) as f64;

    let eig = cov.symmetric_eigen();
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let total: f64 = eig.eigenvalues.iter().map(|&l| l.max(0.0)).sum();

    let mut components = Vec::with_capacity(n_components);
    let mut explained = Vec::with_capacity(n_components);
    for &col in order.iter().take(n_components) {
        let mut row: Vec<f64> = eig.eigenvectors.column(col).iter().copied().collect();
        let lead = row
            .iter()
            .cloned()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .map(|(i, _)| i)
            .unwrap();
        if row[lead] < 0.0 {
            for v in row.iter_mut() {
                *v = -*v;
            }
        }
        components.push(row);
        explained.push(if total > 0.0 {
            eig.eigenvalues[col].max(0.0) / total
        } else {
            0.0
        });
    }

    Ok(PcaResult {
        components,
        explained_variance: explained,
        mean,
    })
}

//! Linear discriminant analysis with optional diagonal shrinkage of
//! the pooled covariance, plus the Fisher projection onto the
//! between-class directions.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{softmax, LabeledDataset, LearnError, ModelParameters, TrainedModel};

/// Threshold below which a dimension counts as constant and is
/// dropped before fitting, mirroring the standardizer rule.
const VARIANCE_DROP_SCALE: f64 = 1e-9;

/// Discriminant parameters in the kept-dimension space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaParams {
    pub input_len: usize,
    /// Indices of the input dimensions that were kept.
    pub kept_dims: Vec<usize>,
    /// Per-class means, in class order.
    pub class_means: Vec<Vec<f64>>,
    pub grand_mean: Vec<f64>,
    /// Shrunk pooled within-class covariance.
    pub pooled_covariance: Vec<Vec<f64>>,
    /// Inverse of the pooled covariance.
    pub precision: Vec<Vec<f64>>,
    /// Unit-norm Fisher directions, one row per discriminant axis
    /// (at most one less than the number of classes).
    pub projection: Vec<Vec<f64>>,
    pub shrinkage: f64,
}

impl LdaParams {
    fn keep(&self, x: &[f64]) -> Vec<f64> {
        self.kept_dims.iter().map(|&d| x[d]).collect()
    }

    /// Softmax over the linear discriminant scores, with equal
    /// priors.
    pub fn class_probabilities(&self, x: &[f64]) -> Vec<f64> {
        let z = self.keep(x);
        let scores: Vec<f64> = self
            .class_means
            .iter()
            .map(|mu| {
                let pmu: Vec<f64> = self
                    .precision
                    .iter()
                    .map(|row| row.iter().zip(mu).map(|(p, m)| p * m).sum())
                    .collect();
                let xt: f64 = z.iter().zip(&pmu).map(|(a, b)| a * b).sum();
                let mt: f64 = mu.iter().zip(&pmu).map(|(a, b)| a * b).sum();
                xt - 0.5 * mt
            })
            .collect();
        softmax(&scores)
    }

    /// Coordinates of one vector along the Fisher directions,
    /// relative to the grand mean.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        let z = self.keep(x);
        self.projection
            .iter()
            .map(|w| w.iter().zip(&z).zip(&self.grand_mean).map(|((wi, xi), mi)| wi * (xi - mi)).sum())
            .collect()
    }
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// Fits the discriminant on a dataset. The pooled within-class
/// covariance is blended with its own diagonal:
/// `(1 - shrinkage) * S + shrinkage * diag(S)`, which keeps the fit
/// solvable when features outnumber samples.
pub fn train_lda(train: &LabeledDataset, shrinkage: f64) -> Result<TrainedModel, LearnError> {
    assert!((0.0..=1.0).contains(&shrinkage), "shrinkage must be in [0, 1]");
    let n_classes = train.classes.len();
    if n_classes < 2 {
        return Err(LearnError::TooFewClasses { found: n_classes });
    }

    let labels = train.label_indices();
    let input_len = train.vectors[0].values.len();
    let n = train.vectors.len();

    let mut class_rows: Vec<Vec<&[f64]>> = vec![Vec::new(); n_classes];
    for (v, &l) in train.vectors.iter().zip(&labels) {
        class_rows[l].push(&v.values);
    }
    for (class, rows) in train.classes.iter().zip(&class_rows) {
        if rows.len() < 2 {
            return Err(LearnError::ClassTooSmall {
                class: class.clone(),
                n: rows.len(),
                needed: 2,
            });
        }
    }

    // Drop dimensions that are constant across the whole dataset.
    let mut kept_dims = Vec::new();
    for d in 0..input_len {
        let mean: f64 = train.vectors.iter().map(|v| v.values[d]).sum::<f64>() / n as f64;
        let var: f64 = train
            .vectors
            .iter()
            .map(|v| (v.values[d] - mean) * (v.values[d] - mean))
            .sum::<f64>()
            / n as f64;
        if var.sqrt() > VARIANCE_DROP_SCALE * (1.0 + mean.abs()) {
            kept_dims.push(d);
        }
    }
    if kept_dims.is_empty() {
        return Err(LearnError::SingularCovariance);
    }
    let dim = kept_dims.len();
    let keep = |x: &[f64]| -> Vec<f64> { kept_dims.iter().map(|&d| x[d]).collect() };

    let class_means: Vec<Vec<f64>> = class_rows
        .iter()
        .map(|rows| {
            let mut mean = vec![0.0; dim];
            for row in rows {
                for (m, v) in mean.iter_mut().zip(keep(row)) {
                    *m += v;
                }
            }
            for m in mean.iter_mut() {
                *m /= rows.len() as f64;
            }
            mean
        })
        .collect();
    let mut grand_mean = vec![0.0; dim];
    for v in &train.vectors {
        for (m, x) in grand_mean.iter_mut().zip(keep(&v.values)) {
            *m += x;
        }
    }
    for m in grand_mean.iter_mut() {
        *m /= n as f64;
    }

    let mut s_w = DMatrix::<f64>::zeros(dim, dim);
    for (rows, mu) in class_rows.iter().zip(&class_means) {
        for row in rows {
            let z = keep(row);
            for i in 0..dim {
                for j in 0..dim {
                    s_w[(i, j)] += (z[i] - mu[i]) * (z[j] - mu[j]);
                }
            }
        }
    }
    s_w /= (n - n_classes) as f64;

    let mut sigma = s_w.clone() * (1.0 - shrinkage);
    for i in 0..dim {
        sigma[(i, i)] += shrinkage * s_w[(i, i)];
    }

    let chol = sigma.clone().cholesky().ok_or(LearnError::SingularCovariance)?;
    let precision = chol.inverse();

    let mut s_b = DMatrix::<f64>::zeros(dim, dim);
    for (rows, mu) in class_rows.iter().zip(&class_means) {
        let w = rows.len() as f64 / n as f64;
        for i in 0..dim {
            for j in 0..dim {
                s_b[(i, j)] += w * (mu[i] - grand_mean[i]) * (mu[j] - grand_mean[j]);
            }
        }
    }

    // Whiten, diagonalize the between-class scatter, and map the top
    // directions back to feature space.
    let eig_sigma = sigma.clone().symmetric_eigen();
    if eig_sigma.eigenvalues.iter().any(|&l| l <= 0.0) {
        return Err(LearnError::SingularCovariance);
    }
    let inv_sqrt_diag = DMatrix::from_diagonal(&eig_sigma.eigenvalues.map(|l| 1.0 / l.sqrt()));
    let sigma_inv_sqrt = &eig_sigma.eigenvectors * inv_sqrt_diag * eig_sigma.eigenvectors.transpose();
    let m = &sigma_inv_sqrt * s_b * &sigma_inv_sqrt;
    let eig_m = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig_m.eigenvalues[b].total_cmp(&eig_m.eigenvalues[a]));

    let n_axes = (n_classes - 1).min(dim);
    let mut projection = Vec::with_capacity(n_axes);
    for &col in order.iter().take(n_axes) {
        let u = eig_m.eigenvectors.column(col);
        let w = &sigma_inv_sqrt * u;
        let norm = w.norm();
        let mut row: Vec<f64> = w.iter().map(|v| v / norm).collect();
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
        projection.push(row);
    }

    Ok(TrainedModel {
        classes: train.classes.clone(),
        feature_config: train.feature_config,
        training_seed: 0,
        params: ModelParameters::Lda(LdaParams {
            input_len,
            kept_dims,
            class_means,
            grand_mean,
            pooled_covariance: to_rows(&sigma),
            precision: to_rows(&precision),
            projection,
            shrinkage,
        }),
    })
}

//! Per-class diagonal-covariance Gaussian mixture models fit by EM,
//! seeded from k-means.

use serde::{Deserialize, Serialize};

use super::{log_diag_gaussian, logsumexp, softmax, LabeledDataset, LearnError, ModelParameters, TrainedModel};
use crate::rng::derive_rng;
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

/// Variance floor applied every M-step so no dimension collapses.
pub const VARIANCE_FLOOR: f64 = 1e-6;
/// EM stops when the total log-likelihood gain falls below this.
pub const EM_TOLERANCE: f64 = 1e-6;
/// Hard cap on EM iterations per class.
pub const EM_MAX_ITERS: usize = 200;

/// Mixture fitted to one class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmClassModel {
    pub class: String,
    /// Component weights; nonnegative, sum to 1.
    pub weights: Vec<f64>,
    /// `means[component][dim]`.
    pub means: Vec<Vec<f64>>,
    /// Diagonal variances, floored at [`VARIANCE_FLOOR`].
    pub variances: Vec<Vec<f64>>,
    /// Total log-likelihood after each EM iteration; non-decreasing.
    pub log_likelihood_trace: Vec<f64>,
}

impl GmmClassModel {
    /// Log-likelihood of one vector under this mixture.
    pub fn log_likelihood(&self, x: &[f64]) -> f64 {
        let terms: Vec<f64> = self
            .weights
            .iter()
            .zip(self.means.iter().zip(&self.variances))
            .map(|(w, (mean, var))| w.max(1e-300).ln() + log_diag_gaussian(x, mean, var))
            .collect();
        logsumexp(&terms)
    }
}

/// All per-class mixtures of one trained GMM classifier, in class
/// order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmParams {
    pub k_components: usize,
    pub per_class: Vec<GmmClassModel>,
}

impl GmmParams {
    pub fn input_len(&self) -> usize {
        self.per_class[0].means[0].len()
    }

    /// Posterior probability of each class under equal priors.
    pub fn class_probabilities(&self, x: &[f64]) -> Vec<f64> {
        let lls: Vec<f64> = self.per_class.iter().map(|m| m.log_likelihood(x)).collect();
        softmax(&lls)
    }
}

/// Hard k-means assignment used to seed EM. Empty clusters are
/// re-seeded to the point farthest from its current center.
fn kmeans_assign(rows: &[&[f64]], k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = rows.len();
    let d = rows[0].len();
    if k == 1 {
        return vec![0; n];
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut centers: Vec<Vec<f64>> = order[..k].iter().map(|&i| rows[i].to_vec()).collect();
    let mut assign = vec![0usize; n];

    for _ in 0..50 {
        let mut changed = false;
        for (i, row) in rows.iter().enumerate() {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (j, c) in centers.iter().enumerate() {
                let dist: f64 = row.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum();
                if dist < best_d {
                    best_d = dist;
                    best = j;
                }
            }
            if assign[i] != best {
                assign[i] = best;
                changed = true;
            }
        }

        let mut counts = vec![0usize; k];
        for &a in &assign {
            counts[a] += 1;
        }
        for j in 0..k {
            if counts[j] == 0 {
                let (far, _) = rows
                    .iter()
                    .enumerate()
                    .map(|(i, row)| {
                        let c = &centers[assign[i]];
                        let dist: f64 = row.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum();
                        (i, dist)
                    })
                    .max_by(|a, b| a.1.total_cmp(&b.1))
                    .unwrap();
                centers[j] = rows[far].to_vec();
                assign[far] = j;
                counts[j] = 1;
                changed = true;
            }
        }

        let mut new_centers = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for (i, row) in rows.iter().enumerate() {
            counts[assign[i]] += 1;
            for (c, &x) in new_centers[assign[i]].iter_mut().zip(*row) {
                *c += x;
            }
        }
        for j in 0..k {
            if counts[j] > 0 {
                for c in &mut new_centers[j] {
                    *c /= counts[j] as f64;
                }
            } else {
                new_centers[j] = centers[j].clone();
            }
        }
        centers = new_centers;
        if !changed {
            break;
        }
    }
    assign
}

/// Fits one diagonal GMM to the rows of a single class.
fn fit_class(class: &str, rows: &[&[f64]], k: usize, rng: &mut ChaCha8Rng) -> GmmClassModel {
    let n = rows.len();
    let d = rows[0].len();

    // Seed responsibilities from the k-means hard assignment.
    let assign = kmeans_assign(rows, k, rng);
    let mut resp = vec![vec![0.0f64; k]; n];
    for (i, &a) in assign.iter().enumerate() {
        resp[i][a] = 1.0;
    }

    let mut weights = vec![0.0; k];
    let mut means = vec![vec![0.0; d]; k];
    let mut variances = vec![vec![VARIANCE_FLOOR; d]; k];
    let m_step = |resp: &[Vec<f64>], weights: &mut [f64], means: &mut [Vec<f64>], variances: &mut [Vec<f64>]| {
        for j in 0..k {
            let mass: f64 = resp.iter().map(|r| r[j]).sum();
            if mass < 1e-12 {
                // A starved component keeps its previous parameters.
                continue;
            }
            weights[j] = mass / n as f64;
            for v in means[j].iter_mut() {
                *v = 0.0;
            }
            for (i, row) in rows.iter().enumerate() {
                for (m, &x) in means[j].iter_mut().zip(*row) {
                    *m += resp[i][j] * x;
                }
            }
            for m in means[j].iter_mut() {
                *m /= mass;
            }
            for v in variances[j].iter_mut() {
                *v = 0.0;
            }
            for (i, row) in rows.iter().enumerate() {
                for ((v, &x), m) in variances[j].iter_mut().zip(*row).zip(&means[j]) {
                    let diff = x - m;
                    *v += resp[i][j] * diff * diff;
                }
            }
            for v in variances[j].iter_mut() {
                *v = (*v / mass).max(VARIANCE_FLOOR);
            }
        }
        let total: f64 = weights.iter().sum();
        for w in weights.iter_mut() {
            *w = (*w / total).max(1e-12);
        }
    };
    m_step(&resp, &mut weights, &mut means, &mut variances);

    let mut trace = Vec::new();
    for _ in 0..EM_MAX_ITERS {
        // E-step, which also evaluates the current log-likelihood.
        let mut total_ll = 0.0;
        for (i, row) in rows.iter().enumerate() {
            let joint: Vec<f64> = (0..k)
                .map(|j| weights[j].ln() + log_diag_gaussian(row, &means[j], &variances[j]))
                .collect();
            let ll = logsumexp(&joint);
            total_ll += ll;
            for j in 0..k {
                resp[i][j] = (joint[j] - ll).exp();
            }
        }
        let converged = trace
            .last()
            .is_some_and(|prev: &f64| total_ll - prev < EM_TOLERANCE);
        trace.push(total_ll);
        if converged {
            break;
        }
        m_step(&resp, &mut weights, &mut means, &mut variances);
    }

    GmmClassModel {
        class: class.to_string(),
        weights,
        means,
        variances,
        log_likelihood_trace: trace,
    }
}

/// Trains one diagonal-covariance GMM per class by EM, seeded from
/// k-means. Initialization draws from the `(seed, "gmm-<class idx>")`
/// stream so results are reproducible.
pub fn train_gmm(train: &LabeledDataset, k_components: usize, seed: u64) -> Result<TrainedModel, LearnError> {
    assert!(k_components >= 1, "k_components must be positive");
    if train.classes.len() < 2 {
        return Err(LearnError::TooFewClasses {
            found: train.classes.len(),
        });
    }

    let labels = train.label_indices();
    let mut per_class = Vec::with_capacity(train.classes.len());
    for (ci, class) in train.classes.iter().enumerate() {
        let rows: Vec<&[f64]> = train
            .vectors
            .iter()
            .zip(&labels)
            .filter(|(_, &l)| l == ci)
            .map(|(v, _)| v.values.as_slice())
            .collect();
        if rows.len() < k_components {
            return Err(LearnError::ClassTooSmall {
                class: class.clone(),
                n: rows.len(),
                needed: k_components,
            });
        }
        if k_components > 1 && rows.windows(2).all(|w| w[0] == w[1]) {
            return Err(LearnError::DegenerateClass { class: class.clone() });
        }
        let mut rng = derive_rng(seed, &format!("gmm-{ci}"));
        per_class.push(fit_class(class, &rows, k_components, &mut rng));
    }

    Ok(TrainedModel {
        classes: train.classes.clone(),
        feature_config: train.feature_config,
        training_seed: seed,
        params: ModelParameters::Gmm(GmmParams {
            k_components,
            per_class,
        }),
    })
}

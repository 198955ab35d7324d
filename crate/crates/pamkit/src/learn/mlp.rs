//! Single-hidden-layer perceptron with a logistic hidden layer and
//! softmax output, trained by full-batch gradient descent.

use serde::{Deserialize, Serialize};

use super::{softmax, LabeledDataset, LearnError, ModelParameters, Standardizer, TrainedModel};
use crate::rng::derive_rng;
use rand::Rng;

/// Network weights. `w1` is `[hidden][input]`, `w2` is
/// `[classes][hidden]`. The same struct carries gradients, which
/// share the shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpWeights {
    pub w1: Vec<Vec<f64>>,
    pub b1: Vec<f64>,
    pub w2: Vec<Vec<f64>>,
    pub b2: Vec<f64>,
}

impl MlpWeights {
    fn zeros_like(&self) -> MlpWeights {
        MlpWeights {
            w1: vec![vec![0.0; self.w1[0].len()]; self.w1.len()],
            b1: vec![0.0; self.b1.len()],
            w2: vec![vec![0.0; self.w2[0].len()]; self.w2.len()],
            b2: vec![0.0; self.b2.len()],
        }
    }

    /// Hidden activations for one standardized input.
    fn hidden(&self, x: &[f64]) -> Vec<f64> {
        self.w1
            .iter()
            .zip(&self.b1)
            .map(|(row, b)| sigmoid(row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b))
            .collect()
    }

    /// Softmax class probabilities for one standardized input.
    fn forward(&self, x: &[f64]) -> Vec<f64> {
        let a1 = self.hidden(x);
        let z2: Vec<f64> = self
            .w2
            .iter()
            .zip(&self.b2)
            .map(|(row, b)| row.iter().zip(&a1).map(|(w, v)| w * v).sum::<f64>() + b)
            .collect();
        softmax(&z2)
    }
}

/// Trained network plus the standardizer it expects inputs to pass
/// through.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub weights: MlpWeights,
    pub standardizer: Standardizer,
    /// Mean cross-entropy before each update step.
    pub loss_trace: Vec<f64>,
}

impl MlpParams {
    pub fn class_probabilities(&self, x: &[f64]) -> Vec<f64> {
        self.weights.forward(&self.standardizer.apply(x))
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Mean cross-entropy over `(xs, ys)` and its gradient with respect
/// to every weight, with `ys` holding class indices.
pub fn mlp_loss_and_gradient(weights: &MlpWeights, xs: &[Vec<f64>], ys: &[usize]) -> (f64, MlpWeights) {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mut grad = weights.zeros_like();
    let mut loss = 0.0;

    for (x, &y) in xs.iter().zip(ys) {
        let a1 = weights.hidden(x);
        let z2: Vec<f64> = weights
            .w2
            .iter()
            .zip(&weights.b2)
            .map(|(row, b)| row.iter().zip(&a1).map(|(w, v)| w * v).sum::<f64>() + b)
            .collect();
        let p = softmax(&z2);
        loss -= p[y].max(1e-300).ln();

        let delta2: Vec<f64> = p
            .iter()
            .enumerate()
            .map(|(c, &pc)| pc - if c == y { 1.0 } else { 0.0 })
            .collect();
        for (c, &d2) in delta2.iter().enumerate() {
            for (g, &a) in grad.w2[c].iter_mut().zip(&a1) {
                *g += d2 * a;
            }
            grad.b2[c] += d2;
        }
        for h in 0..a1.len() {
            let back: f64 = weights.w2.iter().zip(&delta2).map(|(row, &d2)| row[h] * d2).sum();
            let d1 = back * a1[h] * (1.0 - a1[h]);
            for (g, &v) in grad.w1[h].iter_mut().zip(x) {
                *g += d1 * v;
            }
            grad.b1[h] += d1;
        }
    }

    let scale = 1.0 / n;
    for row in grad.w1.iter_mut().chain(grad.w2.iter_mut()) {
        for g in row.iter_mut() {
            *g *= scale;
        }
    }
    for g in grad.b1.iter_mut().chain(grad.b2.iter_mut()) {
        *g *= scale;
    }
    (loss * scale, grad)
}

/// Trains the network by full-batch gradient descent. Weights start
/// uniform in [-0.5, 0.5) from the `(seed, "mlp")` stream; inputs
/// are standardized first.
pub fn train_mlp(
    train: &LabeledDataset,
    hidden: usize,
    epochs: usize,
    learning_rate: f64,
    seed: u64,
) -> Result<TrainedModel, LearnError> {
    assert!(hidden >= 1, "hidden size must be positive");
    assert!(epochs >= 1, "epochs must be positive");
    assert!(learning_rate > 0.0, "learning rate must be positive");
    if train.classes.len() < 2 {
        return Err(LearnError::TooFewClasses {
            found: train.classes.len(),
        });
    }

    let rows: Vec<&[f64]> = train.vectors.iter().map(|v| v.values.as_slice()).collect();
    let standardizer = Standardizer::fit(&rows);
    let xs: Vec<Vec<f64>> = train
        .vectors
        .iter()
        .map(|v| standardizer.apply(&v.values))
        .collect();
    let ys = train.label_indices();
    let dim = xs[0].len();
    let n_classes = train.classes.len();

    let mut rng = derive_rng(seed, "mlp");
    let mut uniform = || rng.gen_range(-0.5..0.5);
    let mut weights = MlpWeights {
        w1: (0..hidden).map(|_| (0..dim).map(|_| uniform()).collect()).collect(),
        b1: (0..hidden).map(|_| uniform()).collect(),
        w2: (0..n_classes).map(|_| (0..hidden).map(|_| uniform()).collect()).collect(),
        b2: (0..n_classes).map(|_| uniform()).collect(),
    };

    let mut loss_trace = Vec::with_capacity(epochs);
    for _ in 0..epochs {
        let (loss, grad) = mlp_loss_and_gradient(&weights, &xs, &ys);
        loss_trace.push(loss);
        for (wrow, grow) in weights.w1.iter_mut().zip(&grad.w1) {
            for (w, g) in wrow.iter_mut().zip(grow) {
                *w -= learning_rate * g;
            }
        }
        for (w, g) in weights.b1.iter_mut().zip(&grad.b1) {
            *w -= learning_rate * g;
        }
        for (wrow, grow) in weights.w2.iter_mut().zip(&grad.w2) {
            for (w, g) in wrow.iter_mut().zip(grow) {
                *w -= learning_rate * g;
            }
        }
        for (w, g) in weights.b2.iter_mut().zip(&grad.b2) {
            *w -= learning_rate * g;
        }
    }

    Ok(TrainedModel {
        classes: train.classes.clone(),
        feature_config: train.feature_config,
        training_seed: seed,
        params: ModelParameters::Mlp(MlpParams {
            weights,
            standardizer,
            loss_trace,
        }),
    })
}

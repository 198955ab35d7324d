//! Binary linear SVM trained with the Pegasos subgradient method,
//! with sigmoid calibration fit on the decision values.

use serde::{Deserialize, Serialize};

use super::{LabeledDataset, LearnError, ModelParameters, Standardizer, TrainedModel};
use crate::rng::derive_rng;
use rand::seq::SliceRandom;

/// Linear SVM parameters in standardized feature space.
///
/// The decision value of a vector `x` is `w . standardize(x) + bias`;
/// the calibrated probability of the second class (the later one in
/// sorted class order) is `1 / (1 + exp(a * f + b))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub platt_a: f64,
    pub platt_b: f64,
    pub standardizer: Standardizer,
    /// Regularized hinge objective after each epoch.
    pub objective_trace: Vec<f64>,
}

impl SvmParams {
    /// Raw decision value for one input vector.
    pub fn decision_value(&self, x: &[f64]) -> f64 {
        let z = self.standardizer.apply(x);
        self.weights.iter().zip(&z).map(|(w, v)| w * v).sum::<f64>() + self.bias
    }

    /// Calibrated probability that the input belongs to the second
    /// class.
    pub fn probability_of_second_class(&self, x: &[f64]) -> f64 {
        sigmoid_probability(self.platt_a, self.platt_b, self.decision_value(x))
    }
}

/// Numerically stable `1 / (1 + exp(a*f + b))`.
fn sigmoid_probability(a: f64, b: f64, f: f64) -> f64 {
    let fapb = a * f + b;
    if fapb >= 0.0 {
        (-fapb).exp() / (1.0 + (-fapb).exp())
    } else {
        1.0 / (1.0 + fapb.exp())
    }
}

/// Fits the sigmoid `p = 1/(1+exp(a*f+b))` to decision values and
/// +/-1 labels by regularized maximum likelihood, using Newton steps
/// with backtracking.
fn fit_sigmoid(decision_values: &[f64], ys: &[f64]) -> (f64, f64) {
    let n_pos = ys.iter().filter(|&&y| y > 0.0).count() as f64;
    let n_neg = ys.len() as f64 - n_pos;
    let hi_target = (n_pos + 1.0) / (n_pos + 2.0);
    let lo_target = 1.0 / (n_neg + 2.0);
    let targets: Vec<f64> = ys
        .iter()
        .map(|&y| if y > 0.0 { hi_target } else { lo_target })
        .collect();

    let objective = |a: f64, b: f64| -> f64 {
        decision_values
            .iter()
            .zip(&targets)
            .map(|(&f, &t)| {
                let fapb = a * f + b;
                if fapb >= 0.0 {
                    t * fapb + (1.0 + (-fapb).exp()).ln()
                } else {
                    (t - 1.0) * fapb + (1.0 + fapb.exp()).ln()
                }
            })
            .sum()
    };

    let mut a = 0.0;
    let mut b = ((n_neg + 1.0) / (n_pos + 1.0)).ln();
    let mut fval = objective(a, b);
    let sigma = 1e-12;
    let min_step = 1e-10;

    for _ in 0..100 {
        let mut h11 = sigma;
        let mut h22 = sigma;
        let mut h21 = 0.0;
        let mut g1 = 0.0;
        let mut g2 = 0.0;
        for (&f, &t) in decision_values.iter().zip(&targets) {
            let p = sigmoid_probability(a, b, f);
            let d2 = p * (1.0 - p);
            h11 += f * f * d2;
            h22 += d2;
            h21 += f * d2;
            let d1 = t - p;
            g1 += f * d1;
            g2 += d1;
        }
        if g1.abs() < 1e-5 && g2.abs() < 1e-5 {
            break;
        }
        let det = h11 * h22 - h21 * h21;
        let da = -(h22 * g1 - h21 * g2) / det;
        let db = -(-h21 * g1 + h11 * g2) / det;
        let gd = g1 * da + g2 * db;

        let mut step = 1.0;
        while step >= min_step {
            let new_a = a + step * da;
            let new_b = b + step * db;
            let new_f = objective(new_a, new_b);
            if new_f < fval + 1e-4 * step * gd {
                a = new_a;
                b = new_b;
                fval = new_f;
                break;
            }
            step /= 2.0;
        }
        if step < min_step {
            break;
        }
    }
    (a, b)
}

/// Trains a binary linear SVM with Pegasos.
///
/// Features are standardized and a constant-1 feature carries the
/// bias. Each epoch visits every training vector once in an order
/// drawn from the `(seed, "svm")` stream; the returned weights are
/// the average over the final quarter of all update steps. Labels
/// map to -1 for the first class and +1 for the second, and the
/// calibrated probability refers to the second class.
pub fn train_svm(
    train: &LabeledDataset,
    lambda: f64,
    epochs: usize,
    seed: u64,
) -> Result<TrainedModel, LearnError> {
    assert!(lambda > 0.0, "lambda must be positive");
    assert!(epochs >= 1, "epochs must be positive");
    if train.classes.len() != 2 {
        return Err(LearnError::NotBinary {
            found: train.classes.len(),
        });
    }

    let rows: Vec<&[f64]> = train.vectors.iter().map(|v| v.values.as_slice()).collect();
    let standardizer = Standardizer::fit(&rows);
    let xs: Vec<Vec<f64>> = train
        .vectors
        .iter()
        .map(|v| {
            let mut z = standardizer.apply(&v.values);
            z.push(1.0);
            z
        })
        .collect();
    let ys: Vec<f64> = train
        .label_indices()
        .iter()
        .map(|&l| if l == 0 { -1.0 } else { 1.0 })
        .collect();

    let n = xs.len();
    let dim = xs[0].len();
    let mut w = vec![0.0f64; dim];
    let mut w_sum = vec![0.0f64; dim];
    let mut averaged_steps = 0usize;
    let total_steps = epochs * n;
    let average_from = total_steps - (total_steps / 4).max(1) + 1;

    let mut rng = derive_rng(seed, "svm");
    let mut order: Vec<usize> = (0..n).collect();
    let mut objective_trace = Vec::with_capacity(epochs);
    let mut t = 0usize;

    for _ in 0..epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (lambda * t as f64);
            let margin = ys[i] * w.iter().zip(&xs[i]).map(|(a, b)| a * b).sum::<f64>();
            let shrink = 1.0 - 1.0 / t as f64;
            for v in w.iter_mut() {
                *v *= shrink;
            }
            if margin < 1.0 {
                for (v, &x) in w.iter_mut().zip(&xs[i]) {
                    *v += eta * ys[i] * x;
                }
            }
            if t >= average_from {
                for (s, &v) in w_sum.iter_mut().zip(&w) {
                    *s += v;
                }
                averaged_steps += 1;
            }
        }

        let norm_sq: f64 = w.iter().map(|v| v * v).sum();
        let mean_hinge: f64 = xs
            .iter()
            .zip(&ys)
            .map(|(x, &y)| {
                let m = y * w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
                (1.0 - m).max(0.0)
            })
            .sum::<f64>()
            / n as f64;
        objective_trace.push(lambda / 2.0 * norm_sq + mean_hinge);
    }

    let w_avg: Vec<f64> = w_sum.iter().map(|s| s / averaged_steps as f64).collect();
    let decision_values: Vec<f64> = xs
        .iter()
        .map(|x| w_avg.iter().zip(x).map(|(a, b)| a * b).sum::<f64>())
        .collect();
    let (platt_a, platt_b) = fit_sigmoid(&decision_values, &ys);

    let bias = w_avg[dim - 1];
    let weights = w_avg[..dim - 1].to_vec();

    Ok(TrainedModel {
        classes: train.classes.clone(),
        feature_config: train.feature_config,
        training_seed: seed,
        params: ModelParameters::Svm(SvmParams {
            weights,
            bias,
            platt_a,
            platt_b,
            standardizer,
            objective_trace,
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::super::test_support::*;
    use super::super::{classify, split_train_test};
    use super::*;

    fn unpack(model: &TrainedModel) -> &SvmParams {
        match &model.params {
            ModelParameters::Svm(p) => p,
            _ => panic!("wrong params kind"),
        }
    }

    #[test]
    fn separable_data_is_fit_perfectly_and_objective_falls() {
        let mut rng = derive_rng(31, "svm-sep");
        let ds = two_cluster_dataset(&mut rng, 3, 80, 8.0, 1.0);
        let (train, test) = split_train_test(&ds, 0.75, 7).unwrap();
        let model = train_svm(&train, 1e-4, 200, 7).unwrap();
        let params = unpack(&model);

        for v in train.vectors.iter().chain(&test.vectors) {
            let (class, _) = classify(&model, v).unwrap();
            assert_eq!(Some(class), v.label.clone());
        }
        let trace = &params.objective_trace;
        assert_eq!(trace.len(), 200);
        assert!(trace.last().unwrap() < trace.first().unwrap());
    }

    #[test]
    fn calibrated_probability_tracks_the_decision_value() {
        let mut rng = derive_rng(32, "svm-cal");
        let ds = two_cluster_dataset(&mut rng, 2, 120, 5.0, 1.0);
        let model = train_svm(&ds, 1e-4, 150, 11).unwrap();
        let params = unpack(&model);

        let labels = ds.label_indices();
        let mut mean_p = [0.0f64; 2];
        let mut count = [0usize; 2];
        for (v, &l) in ds.vectors.iter().zip(&labels) {
            let p = params.probability_of_second_class(&v.values);
            assert!((0.0..=1.0).contains(&p));
            mean_p[l] += p;
            count[l] += 1;
        }
        let mean_first = mean_p[0] / count[0] as f64;
        let mean_second = mean_p[1] / count[1] as f64;
        assert!(mean_first < 0.1, "first-class mean probability {mean_first}");
        assert!(mean_second > 0.9, "second-class mean probability {mean_second}");
    }

    #[test]
    fn duplicating_the_dataset_leaves_the_direction_stable() {
        let mut rng = derive_rng(33, "svm-dup");
        let ds = two_cluster_dataset(&mut rng, 3, 40, 4.0, 1.0);
        let doubled = LabeledDataset::from_vectors(
            ds.vectors
                .iter()
                .chain(&ds.vectors)
                .cloned()
                .collect(),
            ds.feature_config,
        )
        .unwrap();

        let a = train_svm(&ds, 1e-2, 800, 5).unwrap();
        let b = train_svm(&doubled, 1e-2, 800, 5).unwrap();
        let wa = &unpack(&a).weights;
        let wb = &unpack(&b).weights;

        let dot: f64 = wa.iter().zip(wb).map(|(x, y)| x * y).sum();
        let na: f64 = wa.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb: f64 = wb.iter().map(|x| x * x).sum::<f64>().sqrt();
        let cosine = dot / (na * nb);
        assert!(cosine > 0.999, "weight direction drifted, cosine {cosine}");
    }

    #[test]
    fn non_binary_dataset_is_rejected() {
        let mut rng = derive_rng(34, "svm-multi");
        let mut vectors = two_cluster_dataset(&mut rng, 2, 10, 4.0, 1.0).vectors;
        vectors.push(crate::dsp::FeatureVector {
            values: vec![9.0, 9.0],
            label: Some("c".into()),
        });
        let ds = LabeledDataset::from_vectors(vectors, synthetic_fingerprint()).unwrap();
        assert!(matches!(
            train_svm(&ds, 1e-4, 10, 0),
            Err(LearnError::NotBinary { found: 3 })
        ));
    }

    #[test]
    fn sigmoid_fit_recovers_a_known_link() {
        let mut rng = derive_rng(35, "svm-sigmoid");
        let mut fs = Vec::new();
        let mut ys = Vec::new();
        for _ in 0..4000 {
            let f = gaussian(&mut rng) * 3.0;
            let p = sigmoid_probability(-1.5, 0.4, f);
            let y = if rand::Rng::gen::<f64>(&mut rng) < p { 1.0 } else { -1.0 };
            fs.push(f);
            ys.push(y);
        }
        let (a, b) = fit_sigmoid(&fs, &ys);
        assert!((a - -1.5).abs() < 0.2, "a = {a}");
        assert!((b - 0.4).abs() < 0.2, "b = {b}");
    }
}

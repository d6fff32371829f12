//! One-hidden-layer ReLU network with a softmax output, trained by
//! mini-batch gradient descent on cross-entropy.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{cross_entropy, prepare, softmax, Classifier, ModelError, TrainedModel};
use crate::features::FeatureVector;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FfnnParams {
    pub hidden: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

impl Default for FfnnParams {
    fn default() -> Self {
        FfnnParams {
            hidden: 64,
            learning_rate: 0.05,
            epochs: 200,
            batch_size: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FfnnModel {
    /// `hidden x inputs`
    pub w1: Vec<Vec<f64>>,
    pub b1: Vec<f64>,
    /// `classes x hidden`
    pub w2: Vec<Vec<f64>>,
    pub b2: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FfnnGradient {
    pub w1: Vec<Vec<f64>>,
    pub b1: Vec<f64>,
    pub w2: Vec<Vec<f64>>,
    pub b2: Vec<f64>,
}

fn affine(w: &[Vec<f64>], b: &[f64], x: &[f64]) -> Vec<f64> {
    w.iter()
        .zip(b)
        .map(|(row, bias)| bias + row.iter().zip(x).map(|(a, v)| a * v).sum::<f64>())
        .collect()
}

impl FfnnModel {
    /// Weights uniform in `±1/sqrt(fan_in)`, biases zero.
    pub fn init<R: Rng>(inputs: usize, hidden: usize, classes: usize, rng: &mut R) -> Self {
        let mut layer = |rows: usize, fan_in: usize| -> Vec<Vec<f64>> {
            let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
            (0..rows)
                .map(|_| (0..fan_in).map(|_| rng.gen_range(-bound..=bound)).collect())
                .collect()
        };
        let w1 = layer(hidden, inputs);
        let w2 = layer(classes, hidden);
        FfnnModel {
            w1,
            b1: vec![0.0; hidden],
            w2,
            b2: vec![0.0; classes],
        }
    }

    fn forward(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let pre = affine(&self.w1, &self.b1, x);
        let hidden: Vec<f64> = pre.into_iter().map(|z| z.max(0.0)).collect();
        let logits = affine(&self.w2, &self.b2, &hidden);
        (hidden, logits)
    }

    pub fn probabilities(&self, x: &[f64]) -> Vec<f64> {
        softmax(&self.forward(x).1)
    }

    /// Mean cross-entropy over `rows`.
    pub fn loss(&self, rows: &[&[f64]], targets: &[usize]) -> f64 {
        rows.iter()
            .zip(targets)
            .map(|(x, &t)| cross_entropy(&self.forward(x).1, t))
            .sum::<f64>()
            / rows.len() as f64
    }

    /// Backpropagated gradient of [`FfnnModel::loss`].
    pub fn gradient(&self, rows: &[&[f64]], targets: &[usize]) -> FfnnGradient {
        let n = rows.len() as f64;
        let mut g = FfnnGradient {
            w1: vec![vec![0.0; self.w1.first().map_or(0, Vec::len)]; self.w1.len()],
            b1: vec![0.0; self.b1.len()],
            w2: vec![vec![0.0; self.b1.len()]; self.w2.len()],
            b2: vec![0.0; self.b2.len()],
        };
        for (x, &t) in rows.iter().zip(targets) {
            let (hidden, logits) = self.forward(x);
            let mut delta_out = softmax(&logits);
            delta_out[t] -= 1.0;
            for d in delta_out.iter_mut() {
                *d /= n;
            }
            let mut delta_hidden = vec![0.0; hidden.len()];
            for (c, &dc) in delta_out.iter().enumerate() {
                g.b2[c] += dc;
                for (h, &a) in hidden.iter().enumerate() {
                    g.w2[c][h] += dc * a;
                    delta_hidden[h] += dc * self.w2[c][h];
                }
            }
            for (h, dh) in delta_hidden.into_iter().enumerate() {
                if hidden[h] <= 0.0 {
                    continue;
                }
                g.b1[h] += dh;
                for (gw, &v) in g.w1[h].iter_mut().zip(x.iter()) {
                    *gw += dh * v;
                }
            }
        }
        g
    }

    fn step(&mut self, g: &FfnnGradient, lr: f64) {
        let update = |w: &mut [Vec<f64>], d: &[Vec<f64>]| {
            for (row, drow) in w.iter_mut().zip(d) {
                for (a, b) in row.iter_mut().zip(drow) {
                    *a -= lr * b;
                }
            }
        };
        update(&mut self.w1, &g.w1);
        update(&mut self.w2, &g.w2);
        for (a, b) in self.b1.iter_mut().zip(&g.b1) {
            *a -= lr * b;
        }
        for (a, b) in self.b2.iter_mut().zip(&g.b2) {
            *a -= lr * b;
        }
    }

    /// Trains from a seeded initialization. Returns the model and the mean
    /// training loss measured before each epoch.
    pub fn fit(
        rows: &[&[f64]],
        targets: &[usize],
        n_classes: usize,
        params: &FfnnParams,
        seed: u64,
    ) -> Result<(Self, Vec<f64>), ModelError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = rows.first().map_or(0, |r| r.len());
        let mut model = FfnnModel::init(d, params.hidden, n_classes, &mut rng);
        let mut order: Vec<usize> = (0..rows.len()).collect();
        let mut history = Vec::with_capacity(params.epochs);
        let mut batch_rows: Vec<&[f64]> = Vec::with_capacity(params.batch_size);
        let mut batch_targets = Vec::with_capacity(params.batch_size);
        for epoch in 0..params.epochs {
            let loss = model.loss(rows, targets);
            if !loss.is_finite() {
                return Err(ModelError::Diverged { epoch });
            }
            history.push(loss);
            order.shuffle(&mut rng);
            for chunk in order.chunks(params.batch_size) {
                batch_rows.clear();
                batch_targets.clear();
                batch_rows.extend(chunk.iter().map(|&i| rows[i]));
                batch_targets.extend(chunk.iter().map(|&i| targets[i]));
                let g = model.gradient(&batch_rows, &batch_targets);
                model.step(&g, params.learning_rate);
            }
        }
        if !model.loss(rows, targets).is_finite() {
            return Err(ModelError::Diverged {
                epoch: params.epochs,
            });
        }
        Ok((model, history))
    }
}

pub fn train_ffnn(
    rows: &[FeatureVector],
    labels: &[usize],
    params: &FfnnParams,
    seed: u64,
) -> Result<TrainedModel, ModelError> {
    let bad_rate = params.learning_rate.is_nan() || params.learning_rate <= 0.0;
    if params.hidden == 0 || params.batch_size == 0 || bad_rate {
        return Err(ModelError::InvalidParam(
            "hidden size and batch size must be positive, learning rate > 0".into(),
        ));
    }
    let data = prepare(rows, labels, true)?;
    let (model, _) = FfnnModel::fit(&data.rows, &data.slots, data.n_classes(), params, seed)?;
    Ok(TrainedModel {
        classifier: Classifier::Ffnn(model),
        label_map: data.label_map,
        feature_layout: data.layout,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs(seed: u64) -> (Vec<FeatureVector>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..40 {
            let c = i % 2;
            let center = if c == 0 { -2.0 } else { 2.0 };
            rows.push(FeatureVector::linguistic(vec![
                center + rng.gen_range(-1.0..1.0),
                center + rng.gen_range(-1.0..1.0),
            ]));
            labels.push(c);
        }
        (rows, labels)
    }

    #[test]
    fn separable_blobs_are_fit_exactly() {
        let (rows, labels) = blobs(1);
        let params = FfnnParams {
            hidden: 16,
            epochs: 300,
            ..FfnnParams::default()
        };
        let model = train_ffnn(&rows, &labels, &params, 3).unwrap();
        for (x, &l) in rows.iter().zip(&labels) {
            assert_eq!(model.predict(x).unwrap().label, l);
        }
    }

    #[test]
    fn initial_loss_is_near_log_classes() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let raw: Vec<Vec<f64>> = (0..40).map(|_| (0..5).map(|_| rng.gen_range(0.0..1.0)).collect()).collect();
        let rows: Vec<&[f64]> = raw.iter().map(Vec::as_slice).collect();
        let targets: Vec<usize> = (0..40).map(|i| i % 4).collect();
        let model = FfnnModel::init(5, 8, 4, &mut rng);
        assert!((model.loss(&rows, &targets) - 4f64.ln()).abs() < 0.1);
    }

    #[test]
    fn huge_learning_rate_reports_divergence() {
        let rows: Vec<FeatureVector> = (0..8)
            .map(|i| FeatureVector::linguistic(vec![1e150 * (i as f64 + 1.0)]))
            .collect();
        let labels: Vec<usize> = (0..8).map(|i| i % 2).collect();
        let params = FfnnParams {
            hidden: 4,
            learning_rate: 1e10,
            epochs: 5,
            batch_size: 4,
        };
        assert!(matches!(
            train_ffnn(&rows, &labels, &params, 0),
            Err(ModelError::Diverged { .. })
        ));
    }
}

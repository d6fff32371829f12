//! Multinomial logistic regression trained by full-batch gradient descent.

use serde::{Deserialize, Serialize};

use super::{cross_entropy, prepare, softmax, Classifier, ModelError, TrainedModel};
use crate::features::FeatureVector;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRegParams {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
}

impl Default for LogRegParams {
    fn default() -> Self {
        LogRegParams {
            learning_rate: 0.1,
            epochs: 300,
            l2: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegModel {
    /// `weights[c][j]`, one row per class slot.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRegGradient {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl LogRegModel {
    pub fn zeros(n_classes: usize, n_features: usize) -> Self {
        LogRegModel {
            weights: vec![vec![0.0; n_features]; n_classes],
            bias: vec![0.0; n_classes],
        }
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(w, b)| b + w.iter().zip(x).map(|(a, v)| a * v).sum::<f64>())
            .collect()
    }

    pub fn probabilities(&self, x: &[f64]) -> Vec<f64> {
        softmax(&self.logits(x))
    }

    /// Mean cross-entropy plus `l2/2 * ||W||^2` (bias unpenalized).
    pub fn loss(&self, rows: &[&[f64]], targets: &[usize], l2: f64) -> f64 {
        let data: f64 = rows
            .iter()
            .zip(targets)
            .map(|(x, &t)| cross_entropy(&self.logits(x), t))
            .sum::<f64>()
            / rows.len() as f64;
        let norm: f64 = self.weights.iter().flatten().map(|w| w * w).sum();
        data + 0.5 * l2 * norm
    }

    pub fn gradient(&self, rows: &[&[f64]], targets: &[usize], l2: f64) -> LogRegGradient {
        let n = rows.len() as f64;
        let mut grad = LogRegGradient {
            weights: self
                .weights
                .iter()
                .map(|row| row.iter().map(|w| l2 * w).collect())
                .collect(),
            bias: vec![0.0; self.bias.len()],
        };
        for (x, &t) in rows.iter().zip(targets) {
            let p = self.probabilities(x);
            for (c, pc) in p.iter().enumerate() {
                let err = (pc - if c == t { 1.0 } else { 0.0 }) / n;
                grad.bias[c] += err;
                for (g, v) in grad.weights[c].iter_mut().zip(x.iter()) {
                    *g += err * v;
                }
            }
        }
        grad
    }

    fn step(&mut self, grad: &LogRegGradient, lr: f64) {
        for (row, g) in self.weights.iter_mut().zip(&grad.weights) {
            for (w, d) in row.iter_mut().zip(g) {
                *w -= lr * d;
            }
        }
        for (b, d) in self.bias.iter_mut().zip(&grad.bias) {
            *b -= lr * d;
        }
    }

    /// Runs gradient descent from zero weights and returns the model with
    /// the loss recorded before each epoch's update.
    pub fn fit(
        rows: &[&[f64]],
        targets: &[usize],
        n_classes: usize,
        params: &LogRegParams,
    ) -> Result<(Self, Vec<f64>), ModelError> {
        let d = rows.first().map_or(0, |r| r.len());
        let mut model = LogRegModel::zeros(n_classes, d);
        let mut history = Vec::with_capacity(params.epochs);
        for epoch in 0..params.epochs {
            let loss = model.loss(rows, targets, params.l2);
            if !loss.is_finite() {
                return Err(ModelError::Diverged { epoch });
            }
            history.push(loss);
            let grad = model.gradient(rows, targets, params.l2);
            model.step(&grad, params.learning_rate);
        }
        Ok((model, history))
    }
}

pub fn train_logreg(
    rows: &[FeatureVector],
    labels: &[usize],
    params: &LogRegParams,
    seed: u64,
) -> Result<TrainedModel, ModelError> {
    let bad_rate = params.learning_rate.is_nan() || params.learning_rate <= 0.0;
    if bad_rate || params.l2.is_nan() || params.l2 < 0.0 {
        return Err(ModelError::InvalidParam(
            "learning rate must be positive and l2 non-negative".into(),
        ));
    }
    let data = prepare(rows, labels, true)?;
    let (model, _) = LogRegModel::fit(&data.rows, &data.slots, data.n_classes(), params)?;
    Ok(TrainedModel {
        classifier: Classifier::LogReg(model),
        label_map: data.label_map,
        feature_layout: data.layout,
        seed,
    })
}

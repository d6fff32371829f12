//! Classifier families behind one train/predict contract.
//!
//! Trainers take class indices as labels. Internally every model works on
//! dense "slots" `0..C` over the classes present at training time;
//! `TrainedModel::label_map` maps a slot back to its class index. Since
//! slots follow ascending class index, every argmax tie resolves to the
//! smallest class index.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{FeatureVector, Layout};

pub mod ffnn;
pub mod forest;
pub mod logreg;
pub mod tree;

pub use ffnn::{train_ffnn, FfnnModel, FfnnParams};
pub use forest::{train_forest, ForestParams, RandomForest};
pub use logreg::{train_logreg, LogRegModel, LogRegParams};
pub use tree::{gini, train_tree, DecisionTree, TreeNode, TreeParams};

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("no training rows")]
    Empty,
    #[error("{rows} rows but {labels} labels")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("training data has a single class; at least 2 are required")]
    SingleClass,
    #[error("non-finite feature value in row {row}")]
    NonFinite { row: usize },
    #[error("input layout {got:?} does not match the model's {expected:?}")]
    LayoutMismatch { expected: Layout, got: Layout },
    #[error("training diverged (loss became non-finite at epoch {epoch}); lower the learning rate")]
    Diverged { epoch: usize },
    #[error("invalid hyperparameter: {0}")]
    InvalidParam(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "lr")]
    LogReg,
    #[serde(rename = "dt")]
    Tree,
    #[serde(rename = "rf")]
    Forest,
    #[serde(rename = "ffnn")]
    Ffnn,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::LogReg,
        ModelKind::Tree,
        ModelKind::Forest,
        ModelKind::Ffnn,
    ];

    pub fn code(self) -> &'static str {
        match self {
            ModelKind::LogReg => "lr",
            ModelKind::Tree => "dt",
            ModelKind::Forest => "rf",
            ModelKind::Ffnn => "ffnn",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            ModelKind::LogReg => "Logistic Regression",
            ModelKind::Tree => "Decision Trees",
            ModelKind::Forest => "Random Forest",
            ModelKind::Ffnn => "FFNN",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.code() == s)
            .ok_or_else(|| format!("unknown model {s:?} (expected lr, dt, rf or ffnn)"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum Classifier {
    LogReg(LogRegModel),
    Tree(DecisionTree),
    Forest(RandomForest),
    Ffnn(FfnnModel),
}

impl Classifier {
    /// Per-slot scores: softmax probabilities, leaf histogram fractions or
    /// vote fractions depending on the family.
    pub fn scores(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Classifier::LogReg(m) => m.probabilities(x),
            Classifier::Tree(m) => m.leaf_fractions(x),
            Classifier::Forest(m) => m.vote_fractions(x),
            Classifier::Ffnn(m) => m.probabilities(x),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub classifier: Classifier,
    /// Slot -> class index.
    pub label_map: Vec<usize>,
    pub feature_layout: Layout,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    /// Predicted class index.
    pub label: usize,
    /// Score per entry of `label_map`.
    pub scores: Vec<f64>,
}

/// Index of the largest value; the first one wins ties.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        match self.classifier {
            Classifier::LogReg(_) => ModelKind::LogReg,
            Classifier::Tree(_) => ModelKind::Tree,
            Classifier::Forest(_) => ModelKind::Forest,
            Classifier::Ffnn(_) => ModelKind::Ffnn,
        }
    }

    pub fn predict(&self, x: &FeatureVector) -> Result<Prediction, ModelError> {
        if x.layout != self.feature_layout || x.values.len() != self.feature_layout.len() {
            return Err(ModelError::LayoutMismatch {
                expected: self.feature_layout,
                got: x.layout,
            });
        }
        let scores = self.classifier.scores(&x.values);
        Ok(Prediction {
            label: self.label_map[argmax(&scores)],
            scores,
        })
    }
}

/// Validated training data in slot form.
pub(crate) struct Prepared<'a> {
    pub rows: Vec<&'a [f64]>,
    pub slots: Vec<usize>,
    pub label_map: Vec<usize>,
    pub layout: Layout,
}

impl Prepared<'_> {
    pub fn n_classes(&self) -> usize {
        self.label_map.len()
    }

    pub fn n_features(&self) -> usize {
        self.layout.len()
    }
}

pub(crate) fn prepare<'a>(
    rows: &'a [FeatureVector],
    labels: &[usize],
    require_two_classes: bool,
) -> Result<Prepared<'a>, ModelError> {
    if rows.len() != labels.len() {
        return Err(ModelError::LengthMismatch {
            rows: rows.len(),
            labels: labels.len(),
        });
    }
    let first = rows.first().ok_or(ModelError::Empty)?;
    let layout = first.layout;
    for (i, r) in rows.iter().enumerate() {
        if r.layout != layout || r.values.len() != layout.len() {
            return Err(ModelError::LayoutMismatch {
                expected: layout,
                got: r.layout,
            });
        }
        if r.values.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite { row: i });
        }
    }
    let mut label_map: Vec<usize> = labels.to_vec();
    label_map.sort_unstable();
    label_map.dedup();
    if require_two_classes && label_map.len() < 2 {
        return Err(ModelError::SingleClass);
    }
    let slots = labels
        .iter()
        .map(|l| label_map.binary_search(l).expect("present"))
        .collect();
    Ok(Prepared {
        rows: rows.iter().map(|r| r.values.as_slice()).collect(),
        slots,
        label_map,
        layout,
    })
}

/// Numerically stable softmax.
pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// `-ln softmax(logits)[target]`, computed without forming the softmax.
pub(crate) fn cross_entropy(logits: &[f64], target: usize) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_sum = logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln() + max;
    log_sum - logits[target]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrong_length_input_is_a_layout_error() {
        let rows = vec![FeatureVector::linguistic(vec![0.0]), FeatureVector::linguistic(vec![1.0])];
        let model = train_tree(&rows, &[0, 1], &TreeParams::default(), 0).unwrap();
        let err = model.predict(&FeatureVector::linguistic(vec![0.0, 1.0])).unwrap_err();
        assert!(matches!(err, ModelError::LayoutMismatch { .. }));
        // Same length, different segment structure.
        let err = model.predict(&FeatureVector::topical(vec![0.5])).unwrap_err();
        assert!(matches!(err, ModelError::LayoutMismatch { .. }));
    }

    #[test]
    fn softmax_of_zeros_is_uniform() {
        assert_eq!(softmax(&[0.0; 4]), vec![0.25; 4]);
        assert!((cross_entropy(&[0.0; 3], 1) - 3f64.ln()).abs() < 1e-15);
        assert_eq!(argmax(&[0.2, 0.4, 0.4]), 1);
    }

    #[test]
    fn model_kind_codes_round_trip() {
        for k in ModelKind::ALL {
            assert_eq!(k.code().parse::<ModelKind>().unwrap(), k);
        }
        assert!("svm".parse::<ModelKind>().is_err());
    }

    #[test]
    fn prepare_rejects_bad_input() {
        let rows = vec![FeatureVector::linguistic(vec![f64::NAN])];
        assert_eq!(prepare(&rows, &[0], false).err(), Some(ModelError::NonFinite { row: 0 }));
        let rows = vec![FeatureVector::linguistic(vec![1.0])];
        assert_eq!(prepare(&rows, &[0], true).err(), Some(ModelError::SingleClass));
        assert_eq!(prepare(&rows, &[0, 1], false).err(), Some(ModelError::LengthMismatch { rows: 1, labels: 2 }));
        assert_eq!(prepare(&[], &[], false).err(), Some(ModelError::Empty));
    }
}

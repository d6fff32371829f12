//! Random forest: bagged CART trees with per-split feature subsampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{grow_tree, FeatureSampler};
use super::{prepare, Classifier, DecisionTree, ModelError, TrainedModel, TreeParams};
use crate::features::FeatureVector;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub tree: TreeParams,
    /// Fraction of features tried at each split; `None` means `sqrt(d)`.
    pub feature_fraction: Option<f64>,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            tree: TreeParams::default(),
            feature_fraction: None,
            bootstrap: true,
        }
    }
}

impl ForestParams {
    pub fn features_per_split(&self, n_features: usize) -> usize {
        let raw = match self.feature_fraction {
            Some(f) => (f * n_features as f64).ceil() as usize,
            None => (n_features as f64).sqrt().ceil() as usize,
        };
        raw.clamp(1, n_features.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub trees: Vec<DecisionTree>,
    pub n_classes: usize,
}

impl RandomForest {
    pub fn votes(&self, x: &[f64]) -> Vec<usize> {
        let mut votes = vec![0; self.n_classes];
        for t in &self.trees {
            votes[t.predict_slot(x)] += 1;
        }
        votes
    }

    pub fn vote_fractions(&self, x: &[f64]) -> Vec<f64> {
        let n = self.trees.len() as f64;
        self.votes(x).into_iter().map(|v| v as f64 / n).collect()
    }
}

/// Tree `i` draws from stream `i` of a ChaCha generator keyed by `seed`,
/// so the forest is the same however the trees are scheduled.
pub fn train_forest(
    rows: &[FeatureVector],
    labels: &[usize],
    params: &ForestParams,
    seed: u64,
) -> Result<TrainedModel, ModelError> {
    if params.n_trees == 0 {
        return Err(ModelError::InvalidParam("n_trees must be at least 1".into()));
    }
    if let Some(f) = params.feature_fraction {
        if !(f > 0.0 && f <= 1.0) {
            return Err(ModelError::InvalidParam(format!(
                "feature fraction {f} outside (0, 1]"
            )));
        }
    }
    let data = prepare(rows, labels, false)?;
    let n = data.rows.len();
    let per_split = params.features_per_split(data.n_features());
    let trees: Vec<DecisionTree> = (0..params.n_trees)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let sample: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rng.gen_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let sampler = FeatureSampler {
                rng: &mut rng,
                per_split,
            };
            grow_tree(&data, sample, params.tree, Some(sampler))
        })
        .collect();
    Ok(TrainedModel {
        classifier: Classifier::Forest(RandomForest {
            trees,
            n_classes: data.n_classes(),
        }),
        label_map: data.label_map,
        feature_layout: data.layout,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::train_tree;

    fn blobs(n: usize, seed: u64) -> (Vec<FeatureVector>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let c = i % 3;
            rows.push(FeatureVector::linguistic(
                (0..6).map(|j| if j == c { 2.0 } else { 0.0 } + rng.gen_range(-1.5..1.5)).collect(),
            ));
            labels.push(c);
        }
        (rows, labels)
    }

    #[test]
    fn single_unbagged_full_feature_tree_matches_plain_tree() {
        let (rows, labels) = blobs(60, 1);
        let tree = TreeParams { max_depth: Some(6), min_leaf: 2 };
        let params = ForestParams {
            n_trees: 1,
            tree,
            feature_fraction: Some(1.0),
            bootstrap: false,
        };
        let forest = train_forest(&rows, &labels, &params, 4).unwrap();
        let single = train_tree(&rows, &labels, &tree, 4).unwrap();
        let (probe, _) = blobs(100, 2);
        for x in &probe {
            assert_eq!(forest.predict(x).unwrap().label, single.predict(x).unwrap().label);
        }
    }

    #[test]
    fn same_seed_gives_same_votes() {
        let (rows, labels) = blobs(45, 3);
        let params = ForestParams { n_trees: 15, ..ForestParams::default() };
        let a = train_forest(&rows, &labels, &params, 9).unwrap();
        let b = train_forest(&rows, &labels, &params, 9).unwrap();
        assert_eq!(a, b);
        let (probe, _) = blobs(20, 5);
        for x in &probe {
            assert_eq!(a.predict(x).unwrap(), b.predict(x).unwrap());
        }
    }

    #[test]
    fn vote_fractions_sum_to_one() {
        let (rows, labels) = blobs(30, 4);
        let params = ForestParams { n_trees: 7, ..ForestParams::default() };
        let model = train_forest(&rows, &labels, &params, 0).unwrap();
        let p = model.predict(&rows[0]).unwrap();
        assert!((p.scores.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn features_per_split_rounding() {
        let p = ForestParams::default();
        assert_eq!(p.features_per_split(500), 23);
        assert_eq!(p.features_per_split(1), 1);
        let p = ForestParams { feature_fraction: Some(0.1), ..p };
        assert_eq!(p.features_per_split(25), 3);
    }

    #[test]
    fn rejects_zero_trees() {
        let (rows, labels) = blobs(6, 0);
        let params = ForestParams { n_trees: 0, ..ForestParams::default() };
        assert!(matches!(train_forest(&rows, &labels, &params, 0), Err(ModelError::InvalidParam(_))));
    }
}

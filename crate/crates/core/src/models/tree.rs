//! CART classification tree with Gini impurity.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{argmax, prepare, Classifier, ModelError, Prepared, TrainedModel};
use crate::features::FeatureVector;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    /// `None` grows until leaves are pure or cannot be split.
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: Some(20),
            min_leaf: 2,
        }
    }
}

/// Arena node. `left` takes rows with `x[feature] <= threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        class: usize,
        histogram: Vec<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    /// Root is node 0.
    pub nodes: Vec<TreeNode>,
    pub n_classes: usize,
}

/// `1 - sum(p_c^2)` over a class histogram; 0 for an empty one.
pub fn gini(histogram: &[usize]) -> f64 {
    let n: usize = histogram.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - histogram.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

impl DecisionTree {
    fn leaf_for(&self, x: &[f64]) -> &[usize] {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[*feature] <= *threshold { *left } else { *right },
                TreeNode::Leaf { histogram, .. } => return histogram,
            }
        }
    }

    pub fn predict_slot(&self, x: &[f64]) -> usize {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[*feature] <= *threshold { *left } else { *right },
                TreeNode::Leaf { class, .. } => return *class,
            }
        }
    }

    pub fn leaf_fractions(&self, x: &[f64]) -> Vec<f64> {
        let hist = self.leaf_for(x);
        let n: usize = hist.iter().sum();
        hist.iter().map(|&c| c as f64 / n as f64).collect()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], at: usize) -> usize {
            match &nodes[at] {
                TreeNode::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
                TreeNode::Leaf { .. } => 0,
            }
        }
        walk(&self.nodes, 0)
    }
}

/// Per-split feature sampling for forests.
pub(crate) struct FeatureSampler<'r, R: Rng> {
    pub rng: &'r mut R,
    pub per_split: usize,
}

struct Grower<'a, 'r, R: Rng> {
    rows: &'a [&'a [f64]],
    slots: &'a [usize],
    n_classes: usize,
    params: TreeParams,
    sampler: Option<FeatureSampler<'r, R>>,
    n_features: usize,
    nodes: Vec<TreeNode>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

impl<R: Rng> Grower<'_, '_, R> {
    fn histogram(&self, idx: &[usize]) -> Vec<usize> {
        let mut h = vec![0; self.n_classes];
        for &i in idx {
            h[self.slots[i]] += 1;
        }
        h
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        let all: Vec<usize> = (0..self.n_features).collect();
        match &mut self.sampler {
            Some(s) if s.per_split < self.n_features => {
                let mut chosen: Vec<usize> = all
                    .choose_multiple(s.rng, s.per_split)
                    .copied()
                    .collect();
                chosen.sort_unstable();
                chosen
            }
            _ => all,
        }
    }

    fn best_split(&mut self, idx: &[usize]) -> Option<BestSplit> {
        let min_leaf = self.params.min_leaf.max(1);
        let n = idx.len();
        let total = self.histogram(idx);
        let mut best: Option<BestSplit> = None;
        let mut sorted: Vec<(f64, usize)> = Vec::with_capacity(n);
        for f in self.candidate_features() {
            sorted.clear();
            sorted.extend(idx.iter().map(|&i| (self.rows[i][f], self.slots[i])));
            sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left = vec![0usize; self.n_classes];
            for pos in 1..n {
                left[sorted[pos - 1].1] += 1;
                let (lo, hi) = (sorted[pos - 1].0, sorted[pos].0);
                if lo == hi || pos < min_leaf || n - pos < min_leaf {
                    continue;
                }
                let right: Vec<usize> = total.iter().zip(&left).map(|(t, l)| t - l).collect();
                let impurity =
                    (pos as f64 * gini(&left) + (n - pos) as f64 * gini(&right)) / n as f64;
                if best.as_ref().is_none_or(|b| impurity < b.impurity) {
                    let mut threshold = lo + (hi - lo) / 2.0;
                    if threshold >= hi {
                        threshold = lo;
                    }
                    best = Some(BestSplit {
                        feature: f,
                        threshold,
                        impurity,
                    });
                }
            }
        }
        best
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let histogram = self.histogram(&idx);
        let at = self.nodes.len();
        self.nodes.push(TreeNode::Leaf {
            class: argmax_count(&histogram),
            histogram: histogram.clone(),
        });
        let pure = histogram.iter().filter(|&&c| c > 0).count() <= 1;
        let depth_left = self.params.max_depth.is_none_or(|d| depth < d);
        if pure || !depth_left || idx.len() < 2 * self.params.min_leaf.max(1) {
            return at;
        }
        let Some(split) = self.best_split(&idx) else {
            return at;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx
            .into_iter()
            .partition(|&i| self.rows[i][split.feature] <= split.threshold);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[at] = TreeNode::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        at
    }
}

fn argmax_count(hist: &[usize]) -> usize {
    argmax(&hist.iter().map(|&c| c as f64).collect::<Vec<_>>())
}

/// Grows a tree over `sample` (row indices, repeats allowed).
pub(crate) fn grow_tree<R: Rng>(
    data: &Prepared<'_>,
    sample: Vec<usize>,
    params: TreeParams,
    sampler: Option<FeatureSampler<'_, R>>,
) -> DecisionTree {
    let mut grower = Grower {
        rows: &data.rows,
        slots: &data.slots,
        n_classes: data.n_classes(),
        params,
        sampler,
        n_features: data.n_features(),
        nodes: Vec::new(),
    };
    grower.grow(sample, 0);
    DecisionTree {
        nodes: grower.nodes,
        n_classes: data.n_classes(),
    }
}

pub fn train_tree(
    rows: &[FeatureVector],
    labels: &[usize],
    params: &TreeParams,
    seed: u64,
) -> Result<TrainedModel, ModelError> {
    let data = prepare(rows, labels, false)?;
    let sample = (0..data.rows.len()).collect();
    let tree = grow_tree::<rand_chacha::ChaCha8Rng>(&data, sample, *params, None);
    Ok(TrainedModel {
        classifier: Classifier::Tree(tree),
        label_map: data.label_map,
        feature_layout: data.layout,
        seed,
    })
}

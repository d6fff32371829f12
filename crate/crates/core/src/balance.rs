//! SMOTE oversampling of training rows.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::FeatureVector;

#[derive(Debug, Error, PartialEq)]
pub enum BalanceError {
    #[error("class {class} has a single sample and no neighbor to interpolate with")]
    SingletonClass { class: usize },
    #[error("k must be at least 1")]
    ZeroK,
    #[error("{rows} rows but {labels} labels")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("rows have differing layouts")]
    RaggedRows,
}

/// Where a row came from. Synthetic rows record the two real rows they
/// were interpolated between.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowOrigin {
    Original,
    Synthetic { base: usize, neighbor: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledMatrix {
    pub rows: Vec<FeatureVector>,
    pub labels: Vec<usize>,
    pub origins: Vec<RowOrigin>,
}

impl LabeledMatrix {
    pub fn new(rows: Vec<FeatureVector>, labels: Vec<usize>) -> Result<Self, BalanceError> {
        if rows.len() != labels.len() {
            return Err(BalanceError::LengthMismatch {
                rows: rows.len(),
                labels: labels.len(),
            });
        }
        if let Some(first) = rows.first() {
            if rows.iter().any(|r| r.layout != first.layout) {
                return Err(BalanceError::RaggedRows);
            }
        }
        let origins = vec![RowOrigin::Original; rows.len()];
        Ok(LabeledMatrix {
            rows,
            labels,
            origins,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn synthetic_count(&self) -> usize {
        self.origins
            .iter()
            .filter(|o| matches!(o, RowOrigin::Synthetic { .. }))
            .count()
    }

    pub fn class_counts(&self) -> BTreeMap<usize, usize> {
        let mut counts = BTreeMap::new();
        for &l in &self.labels {
            *counts.entry(l).or_insert(0) += 1;
        }
        counts
    }
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Oversamples every class up to the majority count. Synthetic rows are
/// appended after the originals, class by class in ascending label order.
pub fn smote(data: &LabeledMatrix, k: usize, seed: u64) -> Result<LabeledMatrix, BalanceError> {
    if k == 0 {
        return Err(BalanceError::ZeroK);
    }
    let mut members: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in data.labels.iter().enumerate() {
        members.entry(l).or_default().push(i);
    }
    let majority = members.values().map(Vec::len).max().unwrap_or(0);
    for (&class, idx) in &members {
        if idx.len() < 2 && idx.len() < majority {
            return Err(BalanceError::SingletonClass { class });
        }
    }

    let mut out = data.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (&class, idx) in &members {
        let deficit = majority - idx.len();
        if deficit == 0 {
            continue;
        }
        let kk = k.min(idx.len() - 1);
        let neighbors: Vec<Vec<usize>> = idx
            .iter()
            .map(|&i| {
                let mut others: Vec<(f64, usize)> = idx
                    .iter()
                    .filter(|&&j| j != i)
                    .map(|&j| (squared_distance(&data.rows[i].values, &data.rows[j].values), j))
                    .collect();
                others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                others.into_iter().take(kk).map(|(_, j)| j).collect()
            })
            .collect();
        for _ in 0..deficit {
            let pick = rng.gen_range(0..idx.len());
            let base = idx[pick];
            let neighbor = neighbors[pick][rng.gen_range(0..kk)];
            let gap: f64 = rng.gen();
            let x = &data.rows[base];
            let values = x
                .values
                .iter()
                .zip(&data.rows[neighbor].values)
                .map(|(a, b)| a + gap * (b - a))
                .collect();
            out.rows.push(FeatureVector {
                values,
                layout: x.layout,
            });
            out.labels.push(class);
            out.origins.push(RowOrigin::Synthetic { base, neighbor });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(points: &[(f64, f64, usize)]) -> LabeledMatrix {
        LabeledMatrix::new(
            points.iter().map(|&(x, y, _)| FeatureVector::linguistic(vec![x, y])).collect(),
            points.iter().map(|p| p.2).collect(),
        )
        .unwrap()
    }

    #[test]
    fn balanced_input_is_unchanged() {
        let m = matrix(&[(0.0, 0.0, 0), (1.0, 1.0, 1), (2.0, 0.0, 0), (3.0, 1.0, 1)]);
        assert_eq!(smote(&m, 5, 1).unwrap(), m);
    }

    #[test]
    fn two_point_minority_interpolates_on_the_segment() {
        let m = matrix(&[(0.0, 0.0, 1), (2.0, 2.0, 1), (5.0, 5.0, 0), (6.0, 5.0, 0), (7.0, 5.0, 0)]);
        let out = smote(&m, 1, 7).unwrap();
        assert_eq!(out.len(), 6);
        let s = &out.rows[5].values;
        assert_eq!(out.labels[5], 1);
        assert_eq!(s[0], s[1]);
        assert!((0.0..=2.0).contains(&s[0]));
    }

    #[test]
    fn nine_to_three_needs_six_synthetic_rows() {
        let mut pts: Vec<(f64, f64, usize)> = (0..9).map(|i| (i as f64, 0.0, 0)).collect();
        pts.extend((0..3).map(|i| (i as f64, 10.0, 1)));
        let out = smote(&matrix(&pts), 5, 3).unwrap();
        assert_eq!(out.synthetic_count(), 6);
        assert_eq!(out.class_counts().into_iter().collect::<Vec<_>>(), vec![(0, 9), (1, 9)]);
        assert_eq!(&out.rows[..12], &matrix(&pts).rows[..]);
    }

    #[test]
    fn singleton_minority_is_an_error() {
        let m = matrix(&[(0.0, 0.0, 0), (1.0, 0.0, 0), (5.0, 5.0, 2)]);
        assert_eq!(smote(&m, 5, 0), Err(BalanceError::SingletonClass { class: 2 }));
        assert_eq!(smote(&m, 0, 0), Err(BalanceError::ZeroK));
    }
}

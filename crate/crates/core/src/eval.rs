//! Standard and graded (ordinal) precision, recall and F-measure.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("{truth} true labels but {pred} predictions")]
    LengthMismatch { truth: usize, pred: usize },
    #[error("no instances to evaluate")]
    Empty,
    #[error("label {label} outside 0..{n_classes}")]
    UnknownLabel { label: usize, n_classes: usize },
}

/// `x / y`, with 0/0 (and anything over 0) taken as 0.
fn ratio(x: f64, y: f64) -> f64 {
    if y == 0.0 {
        0.0
    } else {
        x / y
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    ratio(2.0 * p * r, p + r)
}

/// `cell[i][j]` counts instances with true class `i` predicted as `j`.
pub fn confusion_matrix(
    truth: &[usize],
    pred: &[usize],
    n_classes: usize,
) -> Result<Vec<Vec<u64>>, EvalError> {
    if truth.len() != pred.len() {
        return Err(EvalError::LengthMismatch {
            truth: truth.len(),
            pred: pred.len(),
        });
    }
    if truth.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut m = vec![vec![0u64; n_classes]; n_classes];
    for (&t, &p) in truth.iter().zip(pred) {
        for label in [t, p] {
            if label >= n_classes {
                return Err(EvalError::UnknownLabel { label, n_classes });
            }
        }
        m[t][p] += 1;
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub per_class: Vec<Prf>,
    pub support: Vec<u64>,
    /// Support-weighted means of the per-class values.
    pub weighted: Prf,
}

pub fn standard_prf(confusion: &[Vec<u64>]) -> ClassMetrics {
    let c = confusion.len();
    let support: Vec<u64> = confusion.iter().map(|row| row.iter().sum()).collect();
    let per_class: Vec<Prf> = (0..c)
        .map(|k| {
            let tp = confusion[k][k] as f64;
            let predicted: u64 = confusion.iter().map(|row| row[k]).sum();
            let precision = ratio(tp, predicted as f64);
            let recall = ratio(tp, support[k] as f64);
            Prf {
                precision,
                recall,
                f_measure: harmonic(precision, recall),
            }
        })
        .collect();
    let total: u64 = support.iter().sum();
    let weighted_mean = |get: fn(&Prf) -> f64| {
        ratio(
            per_class
                .iter()
                .zip(&support)
                .map(|(m, &s)| get(m) * s as f64)
                .sum(),
            total as f64,
        )
    };
    let weighted = Prf {
        precision: weighted_mean(|m| m.precision),
        recall: weighted_mean(|m| m.recall),
        f_measure: weighted_mean(|m| m.f_measure),
    };
    ClassMetrics {
        per_class,
        support,
        weighted,
    }
}

/// Ordinal counts where a mismatch costs its label distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradedCounts {
    pub tp: f64,
    pub fp: f64,
    #[serde(rename = "fn")]
    pub fn_: f64,
}

/// Largest label accepted by [`graded_counts`].
pub const MAX_ORDINAL: usize = 3;

pub fn graded_counts(truth: &[usize], pred: &[usize]) -> Result<GradedCounts, EvalError> {
    if truth.len() != pred.len() {
        return Err(EvalError::LengthMismatch {
            truth: truth.len(),
            pred: pred.len(),
        });
    }
    let mut c = GradedCounts {
        tp: 0.0,
        fp: 0.0,
        fn_: 0.0,
    };
    for (&t, &p) in truth.iter().zip(pred) {
        for label in [t, p] {
            if label > MAX_ORDINAL {
                return Err(EvalError::UnknownLabel {
                    label,
                    n_classes: MAX_ORDINAL + 1,
                });
            }
        }
        if p == t {
            c.tp += 1.0;
        } else if p > t {
            c.fp += (p - t) as f64;
        } else {
            c.fn_ += (t - p) as f64;
        }
    }
    Ok(c)
}

pub fn graded_prf(counts: &GradedCounts) -> Prf {
    let precision = ratio(counts.tp, counts.tp + counts.fp);
    let recall = ratio(counts.tp, counts.tp + counts.fn_);
    Prf {
        precision,
        recall,
        f_measure: harmonic(precision, recall),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradedMetrics {
    pub counts: GradedCounts,
    #[serde(flatten)]
    pub prf: Prf,
}

/// Everything measured on one evaluation set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub class_names: Vec<String>,
    pub confusion: Vec<Vec<u64>>,
    pub per_class: Vec<Prf>,
    pub support: Vec<u64>,
    pub weighted: Prf,
    /// Present for ordinal tasks only.
    pub graded: Option<GradedMetrics>,
    pub accuracy: f64,
}

impl Metrics {
    pub fn compute(
        truth: &[usize],
        pred: &[usize],
        class_names: &[&str],
        ordinal: bool,
    ) -> Result<Self, EvalError> {
        let confusion = confusion_matrix(truth, pred, class_names.len())?;
        let standard = standard_prf(&confusion);
        let graded = if ordinal {
            let counts = graded_counts(truth, pred)?;
            Some(GradedMetrics {
                counts,
                prf: graded_prf(&counts),
            })
        } else {
            None
        };
        let correct = truth.iter().zip(pred).filter(|(t, p)| t == p).count();
        Ok(Metrics {
            class_names: class_names.iter().map(|s| s.to_string()).collect(),
            confusion,
            per_class: standard.per_class,
            support: standard.support,
            weighted: standard.weighted,
            graded,
            accuracy: correct as f64 / truth.len() as f64,
        })
    }

    /// The headline triple: graded for ordinal tasks, weighted otherwise.
    pub fn headline(&self) -> Prf {
        self.graded.as_ref().map_or(self.weighted, |g| g.prf)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn confusion_from_three_instances() {
        let m = confusion_matrix(&[0, 0, 1], &[0, 1, 1], 2).unwrap();
        assert_eq!(m, vec![vec![1, 1], vec![0, 1]]);
    }

    #[test]
    fn confusion_errors() {
        assert_eq!(
            confusion_matrix(&[0], &[0, 1], 2),
            Err(EvalError::LengthMismatch { truth: 1, pred: 2 })
        );
        assert_eq!(confusion_matrix(&[], &[], 2), Err(EvalError::Empty));
        assert!(matches!(confusion_matrix(&[2], &[0], 2), Err(EvalError::UnknownLabel { label: 2, .. })));
    }

    #[test]
    fn prf_on_small_fixture() {
        let m = standard_prf(&[vec![1, 1], vec![0, 1]]);
        let a = m.per_class[0];
        let b = m.per_class[1];
        assert!(close(a.precision, 1.0) && close(a.recall, 0.5) && close(a.f_measure, 2.0 / 3.0));
        assert!(close(b.precision, 0.5) && close(b.recall, 1.0) && close(b.f_measure, 2.0 / 3.0));
        assert!(close(m.weighted.f_measure, 2.0 / 3.0));
        // (2*1 + 1*0.5) / 3 and (2*0.5 + 1*1) / 3
        assert!(close(m.weighted.precision, 2.5 / 3.0));
        assert!(close(m.weighted.recall, 2.0 / 3.0));
    }

    #[test]
    fn unpredicted_class_scores_zero() {
        let m = standard_prf(&[vec![2, 0], vec![1, 0]]);
        assert_eq!(m.per_class[1].precision, 0.0);
        assert_eq!(m.per_class[1].f_measure, 0.0);
    }

    #[test]
    fn perfect_diagonal_is_one() {
        let m = standard_prf(&[vec![3, 0, 0], vec![0, 1, 0], vec![0, 0, 2]]);
        for p in m.per_class.iter().chain([&m.weighted]) {
            assert_eq!((p.precision, p.recall, p.f_measure), (1.0, 1.0, 1.0));
        }
    }

    #[test]
    fn graded_fixture() {
        let c = graded_counts(&[2, 1, 3], &[2, 3, 1]).unwrap();
        assert_eq!((c.tp, c.fp, c.fn_), (1.0, 2.0, 2.0));
        let p = graded_prf(&c);
        assert!(close(p.precision, 1.0 / 3.0) && close(p.recall, 1.0 / 3.0) && close(p.f_measure, 1.0 / 3.0));
        let c = graded_counts(&[0], &[3]).unwrap();
        assert_eq!((c.tp, c.fp, c.fn_), (0.0, 3.0, 0.0));
    }

    #[test]
    fn graded_degenerate_cases() {
        let zero = graded_prf(&GradedCounts { tp: 0.0, fp: 0.0, fn_: 0.0 });
        assert_eq!((zero.precision, zero.recall, zero.f_measure), (0.0, 0.0, 0.0));
        let perfect = graded_prf(&GradedCounts { tp: 5.0, fp: 0.0, fn_: 0.0 });
        assert_eq!((perfect.precision, perfect.recall, perfect.f_measure), (1.0, 1.0, 1.0));
        assert!(matches!(graded_counts(&[4], &[0]), Err(EvalError::UnknownLabel { label: 4, .. })));
    }

    #[test]
    fn metrics_headline_picks_graded_for_ordinal() {
        let names = ["a", "b", "c", "d"];
        let m = Metrics::compute(&[2, 1, 3], &[2, 3, 1], &names, true).unwrap();
        assert!(close(m.headline().f_measure, 1.0 / 3.0));
        let m = Metrics::compute(&[0, 0, 1], &[0, 1, 1], &names[..2], false).unwrap();
        assert!(close(m.headline().f_measure, 2.0 / 3.0));
        assert!(m.graded.is_none());
    }

    fn pairs() -> impl Strategy<Value = (Vec<usize>, Vec<usize>)> {
        (1usize..40).prop_flat_map(|n| {
            (
                prop::collection::vec(0usize..4, n),
                prop::collection::vec(0usize..4, n),
            )
        })
    }

    proptest! {
        #[test]
        fn self_comparison_is_perfect(x in prop::collection::vec(0usize..4, 0..40)) {
            let c = graded_counts(&x, &x).unwrap();
            prop_assert_eq!((c.tp, c.fp, c.fn_), (x.len() as f64, 0.0, 0.0));
        }

        #[test]
        fn joint_permutation_invariance((t, p) in pairs(), rot in 0usize..40) {
            let k = rot % t.len();
            let mut t2 = t.clone();
            let mut p2 = p.clone();
            t2.rotate_left(k);
            p2.rotate_left(k);
            t2.reverse();
            p2.reverse();
            prop_assert_eq!(graded_counts(&t, &p).unwrap(), graded_counts(&t2, &p2).unwrap());
        }

        #[test]
        fn larger_gaps_never_raise_f(tp in 0u32..20, gap in 1u32..30, extra in 0u32..30, over in any::<bool>()) {
            let c = |g: u32| if over {
                GradedCounts { tp: tp as f64, fp: g as f64, fn_: 5.0 }
            } else {
                GradedCounts { tp: tp as f64, fp: 5.0, fn_: g as f64 }
            };
            prop_assert!(graded_prf(&c(gap + extra)).f_measure <= graded_prf(&c(gap)).f_measure);
        }

        #[test]
        fn metrics_in_unit_interval_and_rows_match_support((t, p) in pairs()) {
            let m = confusion_matrix(&t, &p, 4).unwrap();
            let s = standard_prf(&m);
            for (k, row) in m.iter().enumerate() {
                prop_assert_eq!(row.iter().sum::<u64>(), t.iter().filter(|&&x| x == k).count() as u64);
            }
            for v in s.per_class.iter().chain([&s.weighted]) {
                for x in [v.precision, v.recall, v.f_measure] {
                    prop_assert!((0.0..=1.0).contains(&x));
                }
            }
        }
    }
}

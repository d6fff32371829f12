//! Vocabulary building, chi-squared term selection, per-class n-gram
//! reports and the dense feature vectors fed to the classifiers.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::textprep::NgramBag;

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("k must be at least 1")]
    ZeroK,
    #[error("{bags} bags but {labels} labels")]
    LengthMismatch { bags: usize, labels: usize },
    #[error("label {label} outside 0..{n_classes}")]
    LabelOutOfRange { label: usize, n_classes: usize },
    #[error("vocabulary is empty")]
    EmptyVocabulary,
    #[error("cannot concatenate an empty feature block")]
    EmptyOperand,
    #[error("duplicate vocabulary term {0:?}")]
    DuplicateTerm(String),
    #[error("{values} values do not fit layout {layout:?}")]
    LayoutLength { values: usize, layout: Layout },
}

/// Ordered n-gram vocabulary; term `i` is feature column `i`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    terms: Vec<String>,
    index: HashMap<String, usize>,
}

impl TryFrom<Vec<String>> for Vocabulary {
    type Error = FeatureError;

    fn try_from(terms: Vec<String>) -> Result<Self, Self::Error> {
        Vocabulary::new(terms)
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Vec<String> {
        v.terms
    }
}

impl Vocabulary {
    pub fn new(terms: Vec<String>) -> Result<Self, FeatureError> {
        let mut index = HashMap::with_capacity(terms.len());
        for (i, t) in terms.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(FeatureError::DuplicateTerm(t.clone()));
            }
        }
        Ok(Vocabulary { terms, index })
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn position(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn term(&self, i: usize) -> Option<&str> {
        self.terms.get(i).map(String::as_str)
    }
}

/// Segment lengths of a feature vector: linguistic counts first, then
/// topic proportions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub linguistic: usize,
    pub topical: usize,
}

impl Layout {
    pub fn len(&self) -> usize {
        self.linguistic + self.topical
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub layout: Layout,
}

impl FeatureVector {
    pub fn new(values: Vec<f64>, layout: Layout) -> Result<Self, FeatureError> {
        if values.len() != layout.len() {
            return Err(FeatureError::LayoutLength {
                values: values.len(),
                layout,
            });
        }
        Ok(FeatureVector { values, layout })
    }

    pub fn linguistic(values: Vec<f64>) -> Self {
        let layout = Layout {
            linguistic: values.len(),
            topical: 0,
        };
        FeatureVector { values, layout }
    }

    pub fn topical(values: Vec<f64>) -> Self {
        let layout = Layout {
            linguistic: 0,
            topical: values.len(),
        };
        FeatureVector { values, layout }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn linguistic_part(&self) -> &[f64] {
        &self.values[..self.layout.linguistic]
    }

    pub fn topical_part(&self) -> &[f64] {
        &self.values[self.layout.linguistic..]
    }
}

/// Count encoding of `bag` over `vocab`; out-of-vocabulary terms are ignored.
pub fn vectorize(bag: &NgramBag, vocab: &Vocabulary) -> FeatureVector {
    let mut values = vec![0.0; vocab.len()];
    for (term, &count) in &bag.counts {
        if let Some(i) = vocab.position(term) {
            values[i] = f64::from(count);
        }
    }
    FeatureVector::linguistic(values)
}

pub fn concat_features(
    linguistic: &FeatureVector,
    topical: &FeatureVector,
) -> Result<FeatureVector, FeatureError> {
    if linguistic.is_empty() || topical.is_empty() {
        return Err(FeatureError::EmptyOperand);
    }
    let mut values = Vec::with_capacity(linguistic.len() + topical.len());
    values.extend_from_slice(&linguistic.values);
    values.extend_from_slice(&topical.values);
    Ok(FeatureVector {
        values,
        layout: Layout {
            linguistic: linguistic.len(),
            topical: topical.len(),
        },
    })
}

/// Pearson chi-squared statistic of a 2x2 table, without continuity
/// correction. A zero row or column total makes the score 0.
pub fn chi2_score(table: [[u64; 2]; 2]) -> f64 {
    let rows = [table[0][0] + table[0][1], table[1][0] + table[1][1]];
    let cols = [table[0][0] + table[1][0], table[0][1] + table[1][1]];
    let total = rows[0] + rows[1];
    if total == 0 || rows.contains(&0) || cols.contains(&0) {
        return 0.0;
    }
    let n = total as f64;
    let mut score = 0.0;
    for (i, row) in table.iter().enumerate() {
        for (j, &observed) in row.iter().enumerate() {
            let expected = rows[i] as f64 * cols[j] as f64 / n;
            let diff = observed as f64 - expected;
            score += diff * diff / expected;
        }
    }
    score
}

/// Per-term document frequency broken down by class.
#[derive(Debug, Clone, PartialEq)]
pub struct DocFreqTable {
    /// Lexicographically ordered terms with their per-class document counts.
    pub terms: BTreeMap<String, Vec<u64>>,
    /// Number of documents in each class.
    pub class_totals: Vec<u64>,
}

impl DocFreqTable {
    pub fn build(
        bags: &[NgramBag],
        labels: &[usize],
        n_classes: usize,
    ) -> Result<Self, FeatureError> {
        if bags.len() != labels.len() {
            return Err(FeatureError::LengthMismatch {
                bags: bags.len(),
                labels: labels.len(),
            });
        }
        let mut terms: BTreeMap<String, Vec<u64>> = BTreeMap::new();
        let mut class_totals = vec![0u64; n_classes];
        for (bag, &label) in bags.iter().zip(labels) {
            if label >= n_classes {
                return Err(FeatureError::LabelOutOfRange { label, n_classes });
            }
            class_totals[label] += 1;
            for term in bag.terms() {
                match terms.get_mut(term) {
                    Some(df) => df[label] += 1,
                    None => {
                        let mut df = vec![0; n_classes];
                        df[label] = 1;
                        terms.insert(term.to_string(), df);
                    }
                }
            }
        }
        Ok(DocFreqTable {
            terms,
            class_totals,
        })
    }

    /// Maximum one-vs-rest chi-squared over the classes.
    pub fn term_score(&self, df: &[u64]) -> f64 {
        let total: u64 = self.class_totals.iter().sum();
        let df_all: u64 = df.iter().sum();
        (0..self.class_totals.len())
            .map(|c| {
                let in_class_present = df[c];
                let rest_present = df_all - df[c];
                chi2_score([
                    [in_class_present, rest_present],
                    [
                        self.class_totals[c] - in_class_present,
                        (total - self.class_totals[c]) - rest_present,
                    ],
                ])
            })
            .fold(0.0, f64::max)
    }

    /// Every term with its score, best first; ties broken lexicographically.
    pub fn ranked(&self) -> Vec<ScoredTerm> {
        let mut scored: Vec<ScoredTerm> = self
            .terms
            .iter()
            .map(|(term, df)| ScoredTerm {
                term: term.clone(),
                chi2: self.term_score(df),
            })
            .collect();
        scored.sort_by(|a, b| b.chi2.total_cmp(&a.chi2).then_with(|| a.term.cmp(&b.term)));
        scored
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredTerm {
    pub term: String,
    pub chi2: f64,
}

/// The `k` terms most associated with the labels by presence-based
/// chi-squared. Returns every term when fewer than `k` exist.
pub fn select_top_k(
    bags: &[NgramBag],
    labels: &[usize],
    n_classes: usize,
    k: usize,
) -> Result<Vocabulary, FeatureError> {
    if k == 0 {
        return Err(FeatureError::ZeroK);
    }
    let table = DocFreqTable::build(bags, labels, n_classes)?;
    let terms = table.ranked().into_iter().take(k).map(|s| s.term).collect();
    Vocabulary::new(terms)
}

/// Terms seen in exactly one class versus terms seen in several.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    /// `exclusive[c]` holds terms whose document frequency is nonzero only in class `c`.
    pub exclusive: Vec<BTreeSet<String>>,
    pub shared: BTreeSet<String>,
}

pub fn ngram_class_report(
    bags: &[NgramBag],
    labels: &[usize],
    n_classes: usize,
) -> Result<ClassReport, FeatureError> {
    let table = DocFreqTable::build(bags, labels, n_classes)?;
    Ok(class_report_from(&table))
}

pub fn class_report_from(table: &DocFreqTable) -> ClassReport {
    let mut report = ClassReport {
        exclusive: vec![BTreeSet::new(); table.class_totals.len()],
        shared: BTreeSet::new(),
    };
    for (term, df) in &table.terms {
        let present: Vec<usize> = (0..df.len()).filter(|&c| df[c] > 0).collect();
        match present.as_slice() {
            [] => {}
            [only] => {
                report.exclusive[*only].insert(term.clone());
            }
            _ => {
                report.shared.insert(term.clone());
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textprep::{extract_ngrams, TokenList};
    use proptest::prelude::*;

    fn bag(words: &[&str]) -> NgramBag {
        let tokens: TokenList = words.iter().copied().collect();
        extract_ngrams(&tokens, 1, 1).unwrap()
    }

    #[test]
    fn chi2_fixtures() {
        assert!((chi2_score([[8, 2], [2, 8]]) - 7.2).abs() < 1e-12);
        assert_eq!(chi2_score([[5, 5], [5, 5]]), 0.0);
        assert_eq!(chi2_score([[8, 2], [2, 8]]), chi2_score([[2, 8], [8, 2]]));
        assert_eq!(chi2_score([[0, 0], [3, 4]]), 0.0);
        assert_eq!(chi2_score([[0, 0], [0, 0]]), 0.0);
    }

    #[test]
    fn class_exclusive_term_outranks_uniform_term() {
        let bags = vec![
            bag(&["chest", "pain"]),
            bag(&["chest", "pain"]),
            bag(&["home", "pain"]),
            bag(&["home", "pain"]),
        ];
        let labels = [1, 1, 0, 0];
        let vocab = select_top_k(&bags, &labels, 2, 3).unwrap();
        // chest and home are perfectly associated; pain carries nothing.
        assert_eq!(vocab.terms(), &["chest", "home", "pain"]);
        let vocab = select_top_k(&bags, &labels, 2, 10).unwrap();
        assert_eq!(vocab.len(), 3);
        assert_eq!(select_top_k(&bags, &labels, 2, 0), Err(FeatureError::ZeroK));
    }

    #[test]
    fn identical_profiles_tie_lexicographically() {
        let bags = vec![bag(&["zeta", "alpha"]), bag(&["mid"])];
        let vocab = select_top_k(&bags, &[0, 1], 2, 3).unwrap();
        assert_eq!(vocab.terms(), &["alpha", "mid", "zeta"]);
    }

    #[test]
    fn class_report_examples() {
        let bags = vec![bag(&["pain", "chest"]), bag(&["pain", "home"])];
        let report = ngram_class_report(&bags, &[1, 0], 2).unwrap();
        assert!(report.exclusive[0].contains("home"));
        assert!(report.exclusive[1].contains("chest"));
        assert!(report.shared.contains("pain"));

        let report = ngram_class_report(&bags, &[1, 1], 2).unwrap();
        assert!(report.shared.is_empty());
        assert_eq!(report.exclusive[1].len(), 3);
    }

    #[test]
    fn vectorize_examples() {
        let vocab = Vocabulary::new(vec!["pain".into(), "chest".into(), "home".into()]).unwrap();
        let mut b = NgramBag::default();
        b.counts.insert("pain".into(), 2);
        b.counts.insert("chest".into(), 1);
        b.counts.insert("xyz".into(), 4);
        assert_eq!(vectorize(&b, &vocab).values, vec![2.0, 1.0, 0.0]);
        let empty = vectorize(&NgramBag::default(), &vocab);
        assert_eq!(empty.values, vec![0.0; 3]);
        assert_eq!(empty.layout, Layout { linguistic: 3, topical: 0 });
    }

    #[test]
    fn concat_examples() {
        let a = FeatureVector::linguistic(vec![1.0, 2.0]);
        let b = FeatureVector::topical(vec![0.3, 0.7]);
        let c = concat_features(&a, &b).unwrap();
        assert_eq!(c.values, vec![1.0, 2.0, 0.3, 0.7]);
        assert_eq!(c.layout, Layout { linguistic: 2, topical: 2 });
        assert_eq!(c.linguistic_part(), a.values.as_slice());
        assert_eq!(c.topical_part(), b.values.as_slice());
        assert_eq!(
            concat_features(&a, &FeatureVector::topical(vec![])),
            Err(FeatureError::EmptyOperand)
        );
    }

    #[test]
    fn vocabulary_serializes_as_term_list() {
        let vocab = Vocabulary::new(vec!["b".into(), "a".into()]).unwrap();
        let json = serde_json::to_string(&vocab).unwrap();
        assert_eq!(json, "[\"b\",\"a\"]");
        let back: Vocabulary = serde_json::from_str(&json).unwrap();
        assert_eq!(back.position("a"), Some(1));
        assert!(serde_json::from_str::<Vocabulary>("[\"a\",\"a\"]").is_err());
    }

    fn table() -> impl Strategy<Value = [[u64; 2]; 2]> {
        [[0u64..50, 0u64..50], [0u64..50, 0u64..50]]
    }

    proptest! {
        #[test]
        fn chi2_is_nonnegative_and_zero_for_proportional_rows(t in table(), scale in 1u64..5) {
            prop_assert!(chi2_score(t) >= 0.0);
            let swapped = [[t[0][1], t[0][0]], [t[1][1], t[1][0]]];
            prop_assert!((chi2_score(t) - chi2_score(swapped)).abs() <= 1e-9 * (1.0 + chi2_score(t)));
            let proportional = [[t[0][0], t[0][1]], [t[0][0] * scale, t[0][1] * scale]];
            prop_assert!(chi2_score(proportional).abs() < 1e-9);
        }

        #[test]
        fn selection_ignores_note_order(
            docs in proptest::collection::vec((proptest::collection::vec("[a-f]", 1..5), 0usize..3), 1..20),
            rotate in 0usize..20,
        ) {
            let bags: Vec<NgramBag> = docs.iter().map(|(w, _)| {
                let t: TokenList = w.iter().cloned().collect();
                extract_ngrams(&t, 1, 2).unwrap()
            }).collect();
            let labels: Vec<usize> = docs.iter().map(|(_, l)| *l).collect();
            let a = select_top_k(&bags, &labels, 3, 5).unwrap();
            let r = rotate % bags.len();
            let mut bags2 = bags.clone();
            let mut labels2 = labels.clone();
            bags2.rotate_left(r);
            labels2.rotate_left(r);
            bags2.reverse();
            labels2.reverse();
            prop_assert_eq!(a, select_top_k(&bags2, &labels2, 3, 5).unwrap());

            let report = ngram_class_report(&bags, &labels, 3).unwrap();
            let mut seen = BTreeSet::new();
            for set in report.exclusive.iter().chain(std::iter::once(&report.shared)) {
                for t in set {
                    prop_assert!(seen.insert(t.clone()), "term {} in two sets", t);
                }
            }
            let all: BTreeSet<String> = bags.iter().flat_map(|b| b.counts.keys().cloned()).collect();
            prop_assert_eq!(seen, all);
        }
    }
}

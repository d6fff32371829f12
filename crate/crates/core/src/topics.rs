//! Latent Dirichlet allocation trained by collapsed Gibbs sampling, UMass
//! coherence, coherence-driven choice of the topic count, and per-document
//! topic inference against a fixed topic-word table.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::Vocabulary;
use crate::textprep::TokenList;

#[derive(Debug, Error, PartialEq)]
pub enum TopicError {
    #[error("corpus has no tokens to build a vocabulary from")]
    EmptyVocabulary,
    #[error("topic count must be at least 1")]
    ZeroTopics,
    #[error("iteration count must be at least 1")]
    ZeroIterations,
    #[error("{name} must be positive and finite, got {value}")]
    InvalidPrior { name: &'static str, value: f64 },
    #[error("topic {topic} out of range for a {topics}-topic model")]
    TopicOutOfRange { topic: usize, topics: usize },
    #[error("top_m must be at least 1")]
    ZeroTopWords,
    #[error("topic-count range must be non-empty and strictly ascending")]
    InvalidTopicRange,
    #[error("word {0:?} never occurs in the coherence corpus")]
    UnseenWord(String),
}

/// Symmetric document-topic prior, either fixed or scaled by `1/K`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaRule {
    Fixed(f64),
    PerTopic(f64),
}

impl AlphaRule {
    pub fn alpha(self, topics: usize) -> f64 {
        match self {
            AlphaRule::Fixed(a) => a,
            AlphaRule::PerTopic(c) => c / topics as f64,
        }
    }
}

impl Default for AlphaRule {
    fn default() -> Self {
        AlphaRule::PerTopic(1.0)
    }
}

impl fmt::Display for AlphaRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlphaRule::Fixed(a) => write!(f, "{a}"),
            AlphaRule::PerTopic(c) => write!(f, "{c}/K"),
        }
    }
}

/// Parses `"0.1"` or `"50/K"`.
impl FromStr for AlphaRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let parse = |v: &str| {
            v.trim()
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite() && *x > 0.0)
                .ok_or_else(|| format!("invalid alpha {s:?} (expected a positive number or c/K)"))
        };
        match s.strip_suffix("/K") {
            Some(c) => parse(c).map(AlphaRule::PerTopic),
            None => parse(s).map(AlphaRule::Fixed),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LdaParams {
    pub topics: usize,
    pub alpha: f64,
    pub beta: f64,
    pub iterations: usize,
}

impl LdaParams {
    fn validate(&self) -> Result<(), TopicError> {
        if self.topics == 0 {
            return Err(TopicError::ZeroTopics);
        }
        if self.iterations == 0 {
            return Err(TopicError::ZeroIterations);
        }
        for (name, value) in [("alpha", self.alpha), ("beta", self.beta)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(TopicError::InvalidPrior { name, value });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicModel {
    pub topics: usize,
    /// `phi[k][w]`: probability of vocabulary word `w` under topic `k`.
    pub phi: Vec<Vec<f64>>,
    pub alpha: f64,
    pub beta: f64,
    /// Unigram vocabulary, lexicographically ordered.
    pub vocab: Vocabulary,
    pub seed: u64,
    pub iterations: usize,
}

/// Length-K probability vector for one document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicDistribution(pub Vec<f64>);

struct Encoded {
    vocab: Vocabulary,
    docs: Vec<Vec<usize>>,
}

fn encode(docs: &[TokenList]) -> Result<Encoded, TopicError> {
    let words: BTreeSet<&str> = docs.iter().flat_map(|d| d.iter().map(String::as_str)).collect();
    if words.is_empty() {
        return Err(TopicError::EmptyVocabulary);
    }
    let vocab = Vocabulary::new(words.into_iter().map(String::from).collect())
        .expect("set elements are distinct");
    let docs = docs
        .iter()
        .map(|d| d.iter().map(|w| vocab.position(w).expect("in vocab")).collect())
        .collect();
    Ok(Encoded { vocab, docs })
}

/// Collapsed Gibbs sampler over token-topic assignments.
pub fn train_lda(docs: &[TokenList], params: &LdaParams, seed: u64) -> Result<TopicModel, TopicError> {
    params.validate()?;
    let Encoded { vocab, docs } = encode(docs)?;
    let k = params.topics;
    let v = vocab.len();
    let (alpha, beta) = (params.alpha, params.beta);
    let v_beta = v as f64 * beta;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignments: Vec<Vec<usize>> = Vec::with_capacity(docs.len());
    let mut doc_topic = vec![vec![0u32; k]; docs.len()];
    let mut topic_word = vec![0u32; k * v];
    let mut topic_total = vec![0u32; k];
    for (d, doc) in docs.iter().enumerate() {
        let z: Vec<usize> = doc.iter().map(|_| rng.gen_range(0..k)).collect();
        for (&w, &t) in doc.iter().zip(&z) {
            doc_topic[d][t] += 1;
            topic_word[t * v + w] += 1;
            topic_total[t] += 1;
        }
        assignments.push(z);
    }

    let mut weights = vec![0.0f64; k];
    for _ in 0..params.iterations {
        for (d, doc) in docs.iter().enumerate() {
            for (i, &w) in doc.iter().enumerate() {
                let old = assignments[d][i];
                doc_topic[d][old] -= 1;
                topic_word[old * v + w] -= 1;
                topic_total[old] -= 1;

                let mut total = 0.0;
                for t in 0..k {
                    total += (f64::from(doc_topic[d][t]) + alpha)
                        * (f64::from(topic_word[t * v + w]) + beta)
                        / (f64::from(topic_total[t]) + v_beta);
                    weights[t] = total;
                }
                let new = sample_cumulative(&weights, rng.gen::<f64>() * total);

                assignments[d][i] = new;
                doc_topic[d][new] += 1;
                topic_word[new * v + w] += 1;
                topic_total[new] += 1;
            }
        }
    }

    let phi = (0..k)
        .map(|t| {
            let denom = f64::from(topic_total[t]) + v_beta;
            (0..v)
                .map(|w| (f64::from(topic_word[t * v + w]) + beta) / denom)
                .collect()
        })
        .collect();
    Ok(TopicModel {
        topics: k,
        phi,
        alpha,
        beta,
        vocab,
        seed,
        iterations: params.iterations,
    })
}

fn sample_cumulative(cumulative: &[f64], target: f64) -> usize {
    cumulative
        .iter()
        .position(|&c| target < c)
        .unwrap_or(cumulative.len() - 1)
}

impl TopicModel {
    /// The `m` most probable words of `topic`, ties broken lexicographically.
    pub fn top_words(&self, topic: usize, m: usize) -> Result<Vec<String>, TopicError> {
        let row = self.phi.get(topic).ok_or(TopicError::TopicOutOfRange {
            topic,
            topics: self.topics,
        })?;
        let mut order: Vec<usize> = (0..row.len()).collect();
        // Vocabulary is lexicographic, so index order breaks ties.
        order.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
        Ok(order
            .into_iter()
            .take(m)
            .map(|w| self.vocab.terms()[w].clone())
            .collect())
    }
}

pub fn topic_top_words(model: &TopicModel, topic: usize, m: usize) -> Result<Vec<String>, TopicError> {
    model.top_words(topic, m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coherence {
    pub per_topic: Vec<f64>,
    pub mean: f64,
}

/// UMass coherence of each topic's `top_m` words against document
/// co-occurrence counts in `docs`.
pub fn coherence(model: &TopicModel, docs: &[TokenList], top_m: usize) -> Result<Coherence, TopicError> {
    if top_m == 0 {
        return Err(TopicError::ZeroTopWords);
    }
    let doc_sets: Vec<HashSet<&str>> = docs
        .iter()
        .map(|d| d.iter().map(String::as_str).collect())
        .collect();
    let mut doc_freq: HashMap<&str, usize> = HashMap::new();
    for set in &doc_sets {
        for &w in set {
            *doc_freq.entry(w).or_insert(0) += 1;
        }
    }
    let mut per_topic = Vec::with_capacity(model.topics);
    for topic in 0..model.topics {
        let words = model.top_words(topic, top_m)?;
        let mut score = 0.0;
        for j in 1..words.len() {
            let dj = doc_freq.get(words[j].as_str()).copied().unwrap_or(0);
            if dj == 0 {
                return Err(TopicError::UnseenWord(words[j].clone()));
            }
            for wi in &words[..j] {
                let co = doc_sets
                    .iter()
                    .filter(|s| s.contains(wi.as_str()) && s.contains(words[j].as_str()))
                    .count();
                score += ((co as f64 + 1.0) / dj as f64).ln();
            }
        }
        per_topic.push(score);
    }
    let mean = per_topic.iter().sum::<f64>() / per_topic.len() as f64;
    Ok(Coherence { per_topic, mean })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TopicSearch {
    pub alpha: AlphaRule,
    pub beta: f64,
    pub iterations: usize,
    pub top_m: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopicCountSelection {
    pub best: usize,
    /// `(K, mean coherence)` in ascending K.
    pub curve: Vec<(usize, f64)>,
    pub model: TopicModel,
}

/// Trains one model per candidate K (in parallel) and keeps the K with the
/// highest mean coherence; ties go to the smaller K.
pub fn select_topic_count(
    docs: &[TokenList],
    k_range: &[usize],
    search: &TopicSearch,
    seed: u64,
) -> Result<TopicCountSelection, TopicError> {
    if k_range.is_empty() || k_range.windows(2).any(|w| w[0] >= w[1]) {
        return Err(TopicError::InvalidTopicRange);
    }
    let runs: Vec<(TopicModel, f64)> = k_range
        .par_iter()
        .map(|&k| {
            let params = LdaParams {
                topics: k,
                alpha: search.alpha.alpha(k),
                beta: search.beta,
                iterations: search.iterations,
            };
            let model = train_lda(docs, &params, seed)?;
            let score = coherence(&model, docs, search.top_m)?.mean;
            Ok((model, score))
        })
        .collect::<Result<_, TopicError>>()?;
    let curve: Vec<(usize, f64)> = k_range.iter().zip(&runs).map(|(&k, r)| (k, r.1)).collect();
    let mut best = 0;
    for (i, run) in runs.iter().enumerate() {
        if run.1 > runs[best].1 {
            best = i;
        }
    }
    let model = runs.into_iter().nth(best).expect("non-empty").0;
    Ok(TopicCountSelection {
        best: k_range[best],
        curve,
        model,
    })
}

/// Gibbs-samples one document's assignments with `phi` held fixed.
/// Out-of-vocabulary tokens are skipped; a document with no known tokens
/// gets the uniform distribution.
pub fn infer_theta(
    model: &TopicModel,
    doc: &TokenList,
    iterations: usize,
    seed: u64,
) -> TopicDistribution {
    let k = model.topics;
    let words: Vec<usize> = doc.iter().filter_map(|w| model.vocab.position(w)).collect();
    if words.is_empty() {
        return TopicDistribution(vec![1.0 / k as f64; k]);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z: Vec<usize> = words.iter().map(|_| rng.gen_range(0..k)).collect();
    let mut counts = vec![0u32; k];
    for &t in &z {
        counts[t] += 1;
    }
    let mut weights = vec![0.0f64; k];
    for _ in 0..iterations {
        for (i, &w) in words.iter().enumerate() {
            counts[z[i]] -= 1;
            let mut total = 0.0;
            for t in 0..k {
                total += (f64::from(counts[t]) + model.alpha) * model.phi[t][w];
                weights[t] = total;
            }
            let new = sample_cumulative(&weights, rng.gen::<f64>() * total);
            z[i] = new;
            counts[new] += 1;
        }
    }
    let denom = words.len() as f64 + k as f64 * model.alpha;
    TopicDistribution(
        counts
            .iter()
            .map(|&c| (f64::from(c) + model.alpha) / denom)
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(text: &str) -> TokenList {
        text.split_whitespace().collect()
    }

    fn params(k: usize) -> LdaParams {
        LdaParams {
            topics: k,
            alpha: 0.1,
            beta: 0.01,
            iterations: 50,
        }
    }

    #[test]
    fn single_topic_is_smoothed_unigram_distribution() {
        let docs = vec![doc("pain pain chest"), doc("pain home")];
        let model = train_lda(&docs, &params(1), 3).unwrap();
        let beta = 0.01;
        let v = 3.0;
        let expect = |count: f64| (count + beta) / (5.0 + v * beta);
        let idx = |w: &str| model.vocab.position(w).unwrap();
        assert!((model.phi[0][idx("pain")] - expect(3.0)).abs() < 1e-15);
        assert!((model.phi[0][idx("chest")] - expect(1.0)).abs() < 1e-15);
        assert_eq!(model.top_words(0, 8).unwrap()[0], "pain");
    }

    #[test]
    fn top_words_ties_are_lexicographic_and_capped() {
        let docs = vec![doc("b a d c")];
        let model = train_lda(&docs, &params(1), 0).unwrap();
        assert_eq!(model.top_words(0, 8).unwrap(), vec!["a", "b", "c", "d"]);
        assert_eq!(model.top_words(0, 2).unwrap(), vec!["a", "b"]);
        assert!(matches!(
            model.top_words(1, 2),
            Err(TopicError::TopicOutOfRange { topic: 1, topics: 1 })
        ));
    }

    #[test]
    fn training_errors() {
        assert_eq!(train_lda(&[doc("")], &params(2), 0), Err(TopicError::EmptyVocabulary));
        assert_eq!(train_lda(&[doc("a")], &params(0), 0), Err(TopicError::ZeroTopics));
        let mut p = params(2);
        p.iterations = 0;
        assert_eq!(train_lda(&[doc("a")], &p, 0), Err(TopicError::ZeroIterations));
        p.iterations = 1;
        p.beta = 0.0;
        assert!(matches!(train_lda(&[doc("a")], &p, 0), Err(TopicError::InvalidPrior { name: "beta", .. })));
    }

    #[test]
    fn coherence_hand_examples() {
        // One-word topics have no pairs.
        let docs: Vec<TokenList> = (0..10).map(|_| doc("x y")).collect();
        let model = train_lda(&docs, &params(1), 0).unwrap();
        assert_eq!(coherence(&model, &docs, 1).unwrap().mean, 0.0);
        // Both words in all ten documents: log(11/10).
        let c = coherence(&model, &docs, 2).unwrap();
        assert!((c.mean - (11.0f64 / 10.0).ln()).abs() < 1e-12);

        // Never co-occurring; second word in 5 documents: log(1/5).
        let mut docs: Vec<TokenList> = (0..6).map(|_| doc("w1 w1")).collect();
        docs.extend((0..5).map(|_| doc("w2")));
        let model = train_lda(&docs, &params(1), 0).unwrap();
        assert_eq!(model.top_words(0, 2).unwrap(), vec!["w1", "w2"]);
        let c = coherence(&model, &docs, 2).unwrap();
        assert!((c.per_topic[0] - (1.0f64 / 5.0).ln()).abs() < 1e-12);

        assert_eq!(coherence(&model, &docs, 0), Err(TopicError::ZeroTopWords));
        assert!(matches!(coherence(&model, &[doc("w1")], 2), Err(TopicError::UnseenWord(w)) if w == "w2"));
    }

    #[test]
    fn coherence_ignores_document_order() {
        let mut docs = vec![doc("a b c"), doc("a b"), doc("c d"), doc("d a")];
        let model = train_lda(&docs, &params(2), 4).unwrap();
        let before = coherence(&model, &docs, 3).unwrap();
        docs.reverse();
        assert_eq!(coherence(&model, &docs, 3).unwrap(), before);
    }

    #[test]
    fn singleton_range_returns_its_only_k() {
        let docs = vec![doc("a b c"), doc("c d e")];
        let search = TopicSearch {
            alpha: AlphaRule::PerTopic(50.0),
            beta: 0.01,
            iterations: 20,
            top_m: 3,
        };
        let sel = select_topic_count(&docs, &[3], &search, 1).unwrap();
        assert_eq!(sel.best, 3);
        assert_eq!(sel.curve.len(), 1);
        assert_eq!(sel.model.topics, 3);
        assert_eq!(select_topic_count(&docs, &[], &search, 1).unwrap_err(), TopicError::InvalidTopicRange);
        assert_eq!(select_topic_count(&docs, &[3, 2], &search, 1).unwrap_err(), TopicError::InvalidTopicRange);
    }

    #[test]
    fn theta_for_unknown_or_empty_documents_is_uniform() {
        let docs = vec![doc("a b"), doc("c d")];
        let model = train_lda(&docs, &params(4), 0).unwrap();
        assert_eq!(infer_theta(&model, &doc(""), 10, 0).0, vec![0.25; 4]);
        assert_eq!(infer_theta(&model, &doc("zzz qqq"), 10, 0).0, vec![0.25; 4]);
        let theta = infer_theta(&model, &doc("a c zzz"), 10, 0);
        assert!((theta.0.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn alpha_rule_parsing() {
        assert_eq!("50/K".parse::<AlphaRule>().unwrap(), AlphaRule::PerTopic(50.0));
        assert_eq!("0.1".parse::<AlphaRule>().unwrap(), AlphaRule::Fixed(0.1));
        assert!("-1".parse::<AlphaRule>().is_err());
        assert!("x/K".parse::<AlphaRule>().is_err());
        assert_eq!(AlphaRule::PerTopic(50.0).alpha(4), 12.5);
        assert_eq!(AlphaRule::PerTopic(50.0).to_string(), "50/K");
    }

    const BLOCK_A: [&str; 8] = ["chest", "dose", "emar", "regimen", "toradol", "increase", "medication", "intervention"];
    const BLOCK_B: [&str; 8] = ["home", "wheelchair", "fatigue", "bedside", "parent", "discharge", "warm", "mother"];

    fn two_blocks(n_docs: usize, seed: u64) -> Vec<TokenList> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n_docs)
            .map(|d| {
                let block = if d % 2 == 0 { &BLOCK_A } else { &BLOCK_B };
                (0..10).map(|_| block[rng.gen_range(0..8)]).collect()
            })
            .collect()
    }

    fn search() -> TopicSearch {
        TopicSearch {
            alpha: AlphaRule::default(),
            beta: 0.01,
            iterations: 200,
            top_m: 8,
        }
    }

    #[test]
    fn planted_blocks_give_pure_topics_and_two_topics() {
        let docs = two_blocks(60, 5);
        let sel = select_topic_count(&docs, &[2, 3, 4, 5, 6], &search(), 11).unwrap();
        assert_eq!(sel.best, 2, "curve {:?}", sel.curve);
        let model = sel.model;
        for row in &model.phi {
            let mass_a: f64 = BLOCK_A.iter().map(|w| row[model.vocab.position(w).unwrap()]).sum();
            assert!(mass_a.max(1.0 - mass_a) >= 0.9, "topic mixes blocks: {mass_a}");
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        let a_topic = (0..2)
            .max_by(|&x, &y| {
                let m = |t: usize| BLOCK_A.iter().map(|w| model.phi[t][model.vocab.position(w).unwrap()]).sum::<f64>();
                m(x).total_cmp(&m(y))
            })
            .unwrap();
        let theta = infer_theta(&model, &doc("chest dose emar toradol regimen dose"), 100, 3);
        assert!(theta.0[a_topic] > 0.8, "{:?}", theta.0);
    }

    #[test]
    fn training_and_inference_are_bit_reproducible() {
        let docs = two_blocks(20, 1);
        let p = LdaParams { topics: 3, alpha: 0.1, beta: 0.01, iterations: 30 };
        let a = train_lda(&docs, &p, 9).unwrap();
        let b = train_lda(&docs, &p, 9).unwrap();
        assert_eq!(a, b);
        let d = doc("chest home dose");
        assert_eq!(infer_theta(&a, &d, 20, 4), infer_theta(&b, &d, 20, 4));
        assert_ne!(train_lda(&docs, &p, 10).unwrap().phi, a.phi);
    }
}

//! Flat `key = value` pipeline configuration.
//!
//! Every key, its default and its accepted range:
//!
//! | key | default | meaning |
//! |-----|---------|---------|
//! | `corpus` | (none) | labeled corpus path |
//! | `corpus_format` | `auto` | `jsonl`, `csv`, or `auto` (by extension) |
//! | `task` | `relevance` | `relevance` or `change` |
//! | `features` | `combined` | `linguistic`, `topical` or `combined` |
//! | `model` | `dt` | `lr`, `dt`, `rf` or `ffnn` |
//! | `seed` | `42` | master seed |
//! | `test_fraction` | `0.2` | held-out share per class, in (0, 1) |
//! | `stopwords` | (bundled) | stopword list path |
//! | `stem_rules` | (bundled) | stemming rule table path |
//! | `ngram_min`, `ngram_max` | `1`, `2` | n-gram arity range, within 1..=3 |
//! | `chi2_k` | `500` | n-grams kept by chi-squared selection, >= 1 |
//! | `lda_k` | `auto` | fixed topic count, or `auto` to search the range |
//! | `lda_k_min`, `lda_k_max` | `2`, `10` | topic-count search range (inclusive) |
//! | `lda_alpha` | `1/K` | document-topic prior: a number or `c/K` |
//! | `lda_beta` | `0.01` | topic-word prior, > 0 |
//! | `lda_iterations` | `1000` | Gibbs sweeps for training, >= 1 |
//! | `lda_infer_iterations` | `100` | Gibbs sweeps per inferred note, >= 1 |
//! | `lda_top_words` | `8` | words per topic for coherence and reports |
//! | `lda_full_corpus` | `false` | fit LDA on train and test text |
//! | `smote` | `on` | `on` or `off` |
//! | `smote_k` | `5` | SMOTE neighbours, >= 1 |
//! | `lr_learning_rate`, `lr_epochs`, `lr_l2` | `0.1`, `300`, `0.0001` | logistic regression |
//! | `dt_max_depth`, `dt_min_leaf` | `20`, `2` | decision tree (`none` = unlimited depth) |
//! | `rf_trees` | `100` | forest size |
//! | `rf_max_depth`, `rf_min_leaf` | `none`, `1` | forest tree limits |
//! | `rf_feature_fraction` | `sqrt` | features per split: fraction in (0, 1] or `sqrt` |
//! | `rf_bootstrap` | `true` | resample rows per tree |
//! | `ffnn_hidden`, `ffnn_learning_rate`, `ffnn_epochs`, `ffnn_batch_size` | `64`, `0.05`, `200`, `16` | feed-forward network |
//! | `report_top_terms` | `10` | terms per column in the n-gram report |

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CorpusFormat, Task};
use crate::models::{FfnnParams, ForestParams, LogRegParams, ModelKind, TreeParams};
use crate::textprep::NgramRange;
use crate::topics::{AlphaRule, TopicSearch};

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("{path}:{line}: {message}")]
    Syntax {
        path: String,
        line: usize,
        message: String,
    },
    #[error("unknown config key {0:?}")]
    UnknownKey(String),
    #[error("key {key}: {message}")]
    InvalidValue { key: String, message: String },
    #[error("cannot read config {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureSet {
    Linguistic,
    Topical,
    Combined,
}

impl FeatureSet {
    pub const ALL: [FeatureSet; 3] = [
        FeatureSet::Linguistic,
        FeatureSet::Topical,
        FeatureSet::Combined,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureSet::Linguistic => "linguistic",
            FeatureSet::Topical => "topical",
            FeatureSet::Combined => "combined",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            FeatureSet::Linguistic => "Linguistic",
            FeatureSet::Topical => "Topical",
            FeatureSet::Combined => "Linguistic + Topical",
        }
    }

    pub fn uses_linguistic(self) -> bool {
        self != FeatureSet::Topical
    }

    pub fn uses_topical(self) -> bool {
        self != FeatureSet::Linguistic
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureSet {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FeatureSet::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| format!("unknown feature set {s:?} (expected linguistic, topical or combined)"))
    }
}

/// Per-stage seeds, each the master seed plus a fixed offset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StageSeeds {
    pub split: u64,
    pub lda: u64,
    pub infer: u64,
    pub smote: u64,
    pub model: u64,
}

impl StageSeeds {
    pub fn from_master(seed: u64) -> Self {
        StageSeeds {
            split: seed.wrapping_add(1),
            lda: seed.wrapping_add(2),
            infer: seed.wrapping_add(3),
            smote: seed.wrapping_add(4),
            model: seed.wrapping_add(5),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub corpus: Option<PathBuf>,
    pub corpus_format: Option<CorpusFormat>,
    pub task: Task,
    pub features: FeatureSet,
    pub model: ModelKind,
    pub seed: u64,
    pub test_fraction: f64,
    pub stopwords: Option<PathBuf>,
    pub stem_rules: Option<PathBuf>,
    pub ngram_min: usize,
    pub ngram_max: usize,
    pub chi2_k: usize,
    pub lda_k: Option<usize>,
    pub lda_k_min: usize,
    pub lda_k_max: usize,
    pub lda_alpha: AlphaRule,
    pub lda_beta: f64,
    pub lda_iterations: usize,
    pub lda_infer_iterations: usize,
    pub lda_top_words: usize,
    pub lda_full_corpus: bool,
    pub smote: bool,
    pub smote_k: usize,
    pub lr: LogRegParams,
    pub dt: TreeParams,
    pub rf: ForestParams,
    pub ffnn: FfnnParams,
    pub report_top_terms: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            corpus: None,
            corpus_format: None,
            task: Task::Relevance,
            features: FeatureSet::Combined,
            model: ModelKind::Tree,
            seed: 42,
            test_fraction: 0.2,
            stopwords: None,
            stem_rules: None,
            ngram_min: 1,
            ngram_max: 2,
            chi2_k: 500,
            lda_k: None,
            lda_k_min: 2,
            lda_k_max: 10,
            lda_alpha: AlphaRule::default(),
            lda_beta: 0.01,
            lda_iterations: 1000,
            lda_infer_iterations: 100,
            lda_top_words: 8,
            lda_full_corpus: false,
            smote: true,
            smote_k: 5,
            lr: LogRegParams::default(),
            dt: TreeParams::default(),
            rf: ForestParams {
                tree: TreeParams {
                    max_depth: None,
                    min_leaf: 1,
                },
                ..ForestParams::default()
            },
            ffnn: FfnnParams::default(),
            report_top_terms: 10,
        }
    }
}

fn invalid(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::InvalidValue {
        key: key.to_string(),
        message: message.into(),
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value
        .parse()
        .map_err(|_| invalid(key, format!("cannot parse {value:?}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value {
        "true" | "on" | "yes" | "1" => Ok(true),
        "false" | "off" | "no" | "0" => Ok(false),
        _ => Err(invalid(key, format!("expected on/off or true/false, got {value:?}"))),
    }
}

fn parse_path(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

fn show_path(p: &Option<PathBuf>) -> String {
    p.as_ref().map_or(String::new(), |p| p.display().to_string())
}

fn show_opt<T: ToString>(v: Option<T>, none: &str) -> String {
    v.map_or(none.to_string(), |v| v.to_string())
}

fn parse_opt<T: FromStr>(key: &str, value: &str, none: &str) -> Result<Option<T>, ConfigError> {
    if value == none {
        Ok(None)
    } else {
        parse_num(key, value).map(Some)
    }
}

impl PipelineConfig {
    pub const KEYS: [&'static str; 38] = [
        "corpus",
        "corpus_format",
        "task",
        "features",
        "model",
        "seed",
        "test_fraction",
        "stopwords",
        "stem_rules",
        "ngram_min",
        "ngram_max",
        "chi2_k",
        "lda_k",
        "lda_k_min",
        "lda_k_max",
        "lda_alpha",
        "lda_beta",
        "lda_iterations",
        "lda_infer_iterations",
        "lda_top_words",
        "lda_full_corpus",
        "smote",
        "smote_k",
        "lr_learning_rate",
        "lr_epochs",
        "lr_l2",
        "dt_max_depth",
        "dt_min_leaf",
        "rf_trees",
        "rf_max_depth",
        "rf_min_leaf",
        "rf_feature_fraction",
        "rf_bootstrap",
        "ffnn_hidden",
        "ffnn_learning_rate",
        "ffnn_epochs",
        "ffnn_batch_size",
        "report_top_terms",
    ];

    /// Sets one key from its text form. Ranges are checked by [`validate`].
    ///
    /// [`validate`]: PipelineConfig::validate
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let v = value.trim();
        match key {
            "corpus" => self.corpus = parse_path(v),
            "corpus_format" => {
                self.corpus_format = match v {
                    "auto" => None,
                    other => Some(other.parse().map_err(|e: crate::corpus::CorpusError| invalid(key, e.to_string()))?),
                }
            }
            "task" => self.task = v.parse().map_err(|e: String| invalid(key, e))?,
            "features" => self.features = v.parse().map_err(|e: String| invalid(key, e))?,
            "model" => self.model = v.parse().map_err(|e: String| invalid(key, e))?,
            "seed" => self.seed = parse_num(key, v)?,
            "test_fraction" => self.test_fraction = parse_num(key, v)?,
            "stopwords" => self.stopwords = parse_path(v),
            "stem_rules" => self.stem_rules = parse_path(v),
            "ngram_min" => self.ngram_min = parse_num(key, v)?,
            "ngram_max" => self.ngram_max = parse_num(key, v)?,
            "chi2_k" => self.chi2_k = parse_num(key, v)?,
            "lda_k" => self.lda_k = parse_opt(key, v, "auto")?,
            "lda_k_min" => self.lda_k_min = parse_num(key, v)?,
            "lda_k_max" => self.lda_k_max = parse_num(key, v)?,
            "lda_alpha" => self.lda_alpha = v.parse().map_err(|e: String| invalid(key, e))?,
            "lda_beta" => self.lda_beta = parse_num(key, v)?,
            "lda_iterations" => self.lda_iterations = parse_num(key, v)?,
            "lda_infer_iterations" => self.lda_infer_iterations = parse_num(key, v)?,
            "lda_top_words" => self.lda_top_words = parse_num(key, v)?,
            "lda_full_corpus" => self.lda_full_corpus = parse_bool(key, v)?,
            "smote" => self.smote = parse_bool(key, v)?,
            "smote_k" => self.smote_k = parse_num(key, v)?,
            "lr_learning_rate" => self.lr.learning_rate = parse_num(key, v)?,
            "lr_epochs" => self.lr.epochs = parse_num(key, v)?,
            "lr_l2" => self.lr.l2 = parse_num(key, v)?,
            "dt_max_depth" => self.dt.max_depth = parse_opt(key, v, "none")?,
            "dt_min_leaf" => self.dt.min_leaf = parse_num(key, v)?,
            "rf_trees" => self.rf.n_trees = parse_num(key, v)?,
            "rf_max_depth" => self.rf.tree.max_depth = parse_opt(key, v, "none")?,
            "rf_min_leaf" => self.rf.tree.min_leaf = parse_num(key, v)?,
            "rf_feature_fraction" => self.rf.feature_fraction = parse_opt(key, v, "sqrt")?,
            "rf_bootstrap" => self.rf.bootstrap = parse_bool(key, v)?,
            "ffnn_hidden" => self.ffnn.hidden = parse_num(key, v)?,
            "ffnn_learning_rate" => self.ffnn.learning_rate = parse_num(key, v)?,
            "ffnn_epochs" => self.ffnn.epochs = parse_num(key, v)?,
            "ffnn_batch_size" => self.ffnn.batch_size = parse_num(key, v)?,
            "report_top_terms" => self.report_top_terms = parse_num(key, v)?,
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    /// Every key with its current value in text form, in [`KEYS`] order.
    ///
    /// [`KEYS`]: PipelineConfig::KEYS
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("corpus", show_path(&self.corpus)),
            (
                "corpus_format",
                self.corpus_format.map_or("auto".into(), |f| match f {
                    CorpusFormat::Jsonl => "jsonl".into(),
                    CorpusFormat::Csv => "csv".into(),
                }),
            ),
            ("task", self.task.to_string()),
            ("features", self.features.to_string()),
            ("model", self.model.to_string()),
            ("seed", self.seed.to_string()),
            ("test_fraction", self.test_fraction.to_string()),
            ("stopwords", show_path(&self.stopwords)),
            ("stem_rules", show_path(&self.stem_rules)),
            ("ngram_min", self.ngram_min.to_string()),
            ("ngram_max", self.ngram_max.to_string()),
            ("chi2_k", self.chi2_k.to_string()),
            ("lda_k", show_opt(self.lda_k, "auto")),
            ("lda_k_min", self.lda_k_min.to_string()),
            ("lda_k_max", self.lda_k_max.to_string()),
            ("lda_alpha", self.lda_alpha.to_string()),
            ("lda_beta", self.lda_beta.to_string()),
            ("lda_iterations", self.lda_iterations.to_string()),
            ("lda_infer_iterations", self.lda_infer_iterations.to_string()),
            ("lda_top_words", self.lda_top_words.to_string()),
            ("lda_full_corpus", self.lda_full_corpus.to_string()),
            ("smote", if self.smote { "on" } else { "off" }.to_string()),
            ("smote_k", self.smote_k.to_string()),
            ("lr_learning_rate", self.lr.learning_rate.to_string()),
            ("lr_epochs", self.lr.epochs.to_string()),
            ("lr_l2", self.lr.l2.to_string()),
            ("dt_max_depth", show_opt(self.dt.max_depth, "none")),
            ("dt_min_leaf", self.dt.min_leaf.to_string()),
            ("rf_trees", self.rf.n_trees.to_string()),
            ("rf_max_depth", show_opt(self.rf.tree.max_depth, "none")),
            ("rf_min_leaf", self.rf.tree.min_leaf.to_string()),
            ("rf_feature_fraction", show_opt(self.rf.feature_fraction, "sqrt")),
            ("rf_bootstrap", self.rf.bootstrap.to_string()),
            ("ffnn_hidden", self.ffnn.hidden.to_string()),
            ("ffnn_learning_rate", self.ffnn.learning_rate.to_string()),
            ("ffnn_epochs", self.ffnn.epochs.to_string()),
            ("ffnn_batch_size", self.ffnn.batch_size.to_string()),
            ("report_top_terms", self.report_top_terms.to_string()),
        ]
    }

    /// Parses `key = value` lines on top of the defaults. `#` starts a
    /// comment; blank lines are ignored; a key may appear once.
    pub fn parse(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let mut config = PipelineConfig::default();
        let mut seen = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let syntax = |message: String| ConfigError::Syntax {
                path: origin.to_string(),
                line: i + 1,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| syntax(format!("expected key = value, got {line:?}")))?;
            let key = key.trim();
            if let Some(prev) = seen.insert(key.to_string(), i + 1) {
                return Err(syntax(format!("key {key:?} already set on line {prev}")));
            }
            config.set(key, value).map_err(|e| match e {
                ConfigError::UnknownKey(k) => syntax(format!("unknown key {k:?}")),
                other => syntax(other.to_string()),
            })?;
        }
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        PipelineConfig::parse(&text, &path.display().to_string())
    }

    /// Renders the config in the file format accepted by [`parse`].
    ///
    /// [`parse`]: PipelineConfig::parse
    pub fn to_text(&self) -> String {
        self.entries()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    pub fn seeds(&self) -> StageSeeds {
        StageSeeds::from_master(self.seed)
    }

    pub fn ngram_range(&self) -> NgramRange {
        NgramRange {
            min: self.ngram_min,
            max: self.ngram_max,
        }
    }

    /// Candidate topic counts: the fixed `lda_k` or the search range.
    pub fn topic_counts(&self) -> Vec<usize> {
        match self.lda_k {
            Some(k) => vec![k],
            None => (self.lda_k_min..=self.lda_k_max).collect(),
        }
    }

    pub fn topic_search(&self) -> TopicSearch {
        TopicSearch {
            alpha: self.lda_alpha,
            beta: self.lda_beta,
            iterations: self.lda_iterations,
            top_m: self.lda_top_words,
        }
    }

    /// Range checks for every key. Topic settings are only checked when
    /// `needs_topics` is set.
    pub fn validate_for(&self, needs_topics: bool) -> Result<(), ConfigError> {
        let check = |ok: bool, key: &str, message: &str| if ok { Ok(()) } else { Err(invalid(key, message)) };
        check(
            self.test_fraction > 0.0 && self.test_fraction < 1.0,
            "test_fraction",
            "must lie strictly between 0 and 1",
        )?;
        NgramRange::new(self.ngram_min, self.ngram_max)
            .map_err(|e| invalid("ngram_min", e.to_string()))?;
        check(self.chi2_k >= 1, "chi2_k", "must be at least 1")?;
        check(self.smote_k >= 1, "smote_k", "must be at least 1")?;
        check(self.report_top_terms >= 1, "report_top_terms", "must be at least 1")?;
        check(
            self.lr.learning_rate > 0.0 && self.lr.learning_rate.is_finite(),
            "lr_learning_rate",
            "must be positive",
        )?;
        check(self.lr.l2 >= 0.0 && self.lr.l2.is_finite(), "lr_l2", "must be non-negative")?;
        check(self.dt.max_depth != Some(0), "dt_max_depth", "must be at least 1 or none")?;
        check(self.dt.min_leaf >= 1, "dt_min_leaf", "must be at least 1")?;
        check(self.rf.n_trees >= 1, "rf_trees", "must be at least 1")?;
        check(self.rf.tree.max_depth != Some(0), "rf_max_depth", "must be at least 1 or none")?;
        check(self.rf.tree.min_leaf >= 1, "rf_min_leaf", "must be at least 1")?;
        check(
            self.rf.feature_fraction.is_none_or(|f| f > 0.0 && f <= 1.0),
            "rf_feature_fraction",
            "must lie in (0, 1] or be sqrt",
        )?;
        check(self.ffnn.hidden >= 1, "ffnn_hidden", "must be at least 1")?;
        check(
            self.ffnn.learning_rate > 0.0 && self.ffnn.learning_rate.is_finite(),
            "ffnn_learning_rate",
            "must be positive",
        )?;
        check(self.ffnn.batch_size >= 1, "ffnn_batch_size", "must be at least 1")?;
        if needs_topics {
            check(self.lda_k != Some(0), "lda_k", "must be at least 1 or auto")?;
            check(
                self.lda_k.is_some() || (self.lda_k_min >= 1 && self.lda_k_min <= self.lda_k_max),
                "lda_k_min",
                "topic-count range lda_k_min..=lda_k_max is empty",
            )?;
            check(
                self.lda_beta > 0.0 && self.lda_beta.is_finite(),
                "lda_beta",
                "must be positive",
            )?;
            check(self.lda_iterations >= 1, "lda_iterations", "must be at least 1")?;
            check(self.lda_infer_iterations >= 1, "lda_infer_iterations", "must be at least 1")?;
            check(self.lda_top_words >= 1, "lda_top_words", "must be at least 1")?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.validate_for(self.features.uses_topical())
    }
}

impl Serialize for PipelineConfig {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let map: BTreeMap<&str, String> = self.entries().into_iter().collect();
        map.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for PipelineConfig {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let map = BTreeMap::<String, String>::deserialize(deserializer)?;
        let mut config = PipelineConfig::default();
        for (k, v) in &map {
            config.set(k, v).map_err(serde::de::Error::custom)?;
        }
        Ok(config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_text() {
        let c = PipelineConfig::default();
        assert_eq!(PipelineConfig::parse(&c.to_text(), "t").unwrap(), c);
        let keys: Vec<&str> = c.entries().iter().map(|e| e.0).collect();
        assert_eq!(keys, PipelineConfig::KEYS);
    }

    #[test]
    fn non_default_values_round_trip() {
        let text = "
            # comment
            task = change
            features = topical   # trailing comment
            model = rf
            seed = 7
            lda_k = 3
            lda_alpha = 0.1
            dt_max_depth = none
            rf_feature_fraction = 0.5
            smote = off
            corpus = data/notes.csv
            corpus_format = csv
        ";
        let c = PipelineConfig::parse(text, "t").unwrap();
        assert_eq!(c.task, Task::Change);
        assert_eq!(c.features, FeatureSet::Topical);
        assert_eq!(c.model, ModelKind::Forest);
        assert_eq!(c.lda_k, Some(3));
        assert_eq!(c.lda_alpha, AlphaRule::Fixed(0.1));
        assert_eq!(c.dt.max_depth, None);
        assert_eq!(c.rf.feature_fraction, Some(0.5));
        assert!(!c.smote);
        assert_eq!(PipelineConfig::parse(&c.to_text(), "t").unwrap(), c);
        let json = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<PipelineConfig>(&json).unwrap(), c);
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        let err = PipelineConfig::parse("seed = 1\nbogus = 2\n", "f.conf").unwrap_err();
        assert!(matches!(err, ConfigError::Syntax { line: 2, .. }), "{err}");
        let err = PipelineConfig::parse("seed 1\n", "f.conf").unwrap_err();
        assert!(matches!(err, ConfigError::Syntax { line: 1, .. }));
        let err = PipelineConfig::parse("seed = 1\nseed = 2\n", "f.conf").unwrap_err();
        assert!(matches!(err, ConfigError::Syntax { line: 2, .. }));
        let err = PipelineConfig::parse("seed = x\n", "f.conf").unwrap_err();
        assert!(matches!(err, ConfigError::Syntax { line: 1, .. }));
    }

    #[test]
    fn empty_topic_range_fails_validation_only_when_topics_are_used() {
        let mut c = PipelineConfig {
            lda_k_min: 5,
            lda_k_max: 4,
            features: FeatureSet::Topical,
            ..PipelineConfig::default()
        };
        assert!(matches!(c.validate(), Err(ConfigError::InvalidValue { .. })));
        c.features = FeatureSet::Linguistic;
        assert!(c.validate().is_ok());
        c.features = FeatureSet::Combined;
        c.lda_k = Some(3);
        assert!(c.validate().is_ok());
        assert_eq!(c.topic_counts(), vec![3]);
    }

    #[test]
    fn out_of_range_values_are_rejected() {
        for (k, v) in [
            ("test_fraction", "1.0"),
            ("ngram_max", "4"),
            ("chi2_k", "0"),
            ("rf_feature_fraction", "1.5"),
            ("dt_max_depth", "0"),
            ("ffnn_learning_rate", "-1"),
        ] {
            let mut c = PipelineConfig::default();
            c.set(k, v).unwrap();
            assert!(c.validate().is_err(), "{k} = {v} accepted");
        }
    }

    #[test]
    fn stage_seeds_use_fixed_offsets() {
        let s = StageSeeds::from_master(100);
        assert_eq!((s.split, s.lda, s.infer, s.smote, s.model), (101, 102, 103, 104, 105));
        let s = StageSeeds::from_master(u64::MAX);
        assert_eq!(s.split, 0);
    }
}

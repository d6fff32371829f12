//! End-to-end orchestration: split, preprocess, select n-grams, fit topics,
//! rebalance, train, evaluate, and persist a self-contained model artifact.
//!
//! Everything except the split and LDA fitting only ever sees the training
//! split. With `lda_full_corpus` the topic model is fit on the test text as
//! well; nothing else changes.

pub mod config;
pub mod report;

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::balance::{smote, BalanceError, LabeledMatrix};
use crate::corpus::{
    load_corpus, stratified_split, ClinicalNote, Corpus, CorpusError, CorpusFormat, Task,
};
use crate::eval::{EvalError, Metrics};
use crate::features::{concat_features, select_top_k, vectorize, FeatureError, FeatureVector, Vocabulary};
use crate::models::{
    train_ffnn, train_forest, train_logreg, train_tree, ModelError, ModelKind, TrainedModel,
};
use crate::textprep::{ngrams_in_range, NgramBag, NgramRange, Preprocessor, TextprepError, TokenList};
use crate::topics::{infer_theta, select_topic_count, train_lda, LdaParams, TopicError, TopicModel};

pub use config::{ConfigError, FeatureSet, PipelineConfig, StageSeeds};

pub const ARTIFACT_FORMAT: &str = "painsift-model-v1";
pub const REPORT_FORMAT: &str = "painsift-report-v1";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("corpus: {0}")]
    Corpus(#[from] CorpusError),
    #[error("preprocessing: {0}")]
    Textprep(#[from] TextprepError),
    #[error("feature selection: {0}")]
    Features(#[from] FeatureError),
    #[error("topic modeling: {0}")]
    Topics(#[from] TopicError),
    #[error("smote: {0}")]
    Balance(#[from] BalanceError),
    #[error("training: {0}")]
    Model(#[from] ModelError),
    #[error("evaluation: {0}")]
    Eval(#[from] EvalError),
    #[error("artifact {path}: {message}")]
    Artifact { path: String, message: String },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

impl PipelineError {
    /// 1 for configuration problems, 2 for bad input data, 3 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) | PipelineError::Textprep(_) => 1,
            PipelineError::Corpus(_) | PipelineError::Artifact { .. } | PipelineError::Io { .. } => 2,
            PipelineError::Balance(BalanceError::SingletonClass { .. }) => 2,
            PipelineError::Model(ModelError::SingleClass | ModelError::Empty) => 2,
            PipelineError::Features(FeatureError::EmptyVocabulary) => 2,
            PipelineError::Topics(TopicError::EmptyVocabulary) => 2,
            _ => 3,
        }
    }
}

fn io_error(path: &Path, e: impl ToString) -> PipelineError {
    PipelineError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

/// Stored text-to-vector transformation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Featurizer {
    pub features: FeatureSet,
    pub preprocessor: Preprocessor,
    pub ngram_range: NgramRange,
    /// Selected n-grams, present when linguistic features are used.
    pub vocabulary: Option<Vocabulary>,
    /// Present when topical features are used.
    pub topic_model: Option<TopicModel>,
    pub infer_iterations: usize,
    /// Every note is inferred with this same seed.
    pub infer_seed: u64,
}

impl Featurizer {
    pub fn featurize_tokens(&self, tokens: &TokenList) -> Result<FeatureVector, FeatureError> {
        let linguistic = self
            .vocabulary
            .as_ref()
            .map(|v| vectorize(&ngrams_in_range(tokens, self.ngram_range), v));
        let topical = self.topic_model.as_ref().map(|m| {
            FeatureVector::topical(infer_theta(m, tokens, self.infer_iterations, self.infer_seed).0)
        });
        match (linguistic, topical) {
            (Some(l), Some(t)) => concat_features(&l, &t),
            (Some(l), None) => Ok(l),
            (None, Some(t)) => Ok(t),
            (None, None) => Err(FeatureError::EmptyOperand),
        }
    }

    pub fn featurize(&self, text: &str) -> Result<FeatureVector, FeatureError> {
        self.featurize_tokens(&self.preprocessor.tokenize(text))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub format: String,
    pub config: PipelineConfig,
    pub task: Task,
    pub class_names: Vec<String>,
    pub featurizer: Featurizer,
    pub model: TrainedModel,
}

impl ModelArtifact {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("artifact serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str, origin: &str) -> Result<Self, PipelineError> {
        let bad = |message: String| PipelineError::Artifact {
            path: origin.to_string(),
            message,
        };
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
        match value.get("format").and_then(|f| f.as_str()) {
            Some(ARTIFACT_FORMAT) => {}
            Some(other) => {
                return Err(bad(format!(
                    "unsupported format {other:?} (this build reads {ARTIFACT_FORMAT:?})"
                )))
            }
            None => return Err(bad("missing format tag".into())),
        }
        serde_json::from_value(value).map_err(|e| bad(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<(), PipelineError> {
        fs::write(path, self.to_json()).map_err(|e| io_error(path, e))
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path).map_err(|e| PipelineError::Artifact {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        ModelArtifact::from_json(&text, &path.display().to_string())
    }

    pub fn predict_text(&self, text: &str) -> Result<NotePrediction, PipelineError> {
        let x = self.featurizer.featurize(text)?;
        let p = self.model.predict(&x)?;
        let mut scores = vec![0.0; self.class_names.len()];
        for (&class, &s) in self.model.label_map.iter().zip(&p.scores) {
            scores[class] = s;
        }
        Ok(NotePrediction {
            id: String::new(),
            class_index: p.label,
            label: self.class_names[p.label].clone(),
            scores,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NotePrediction {
    pub id: String,
    pub class_index: usize,
    pub label: String,
    /// One score per task class, in class-index order.
    pub scores: Vec<f64>,
}

/// Applies a stored artifact to notes, in input order.
pub fn run_predict(
    artifact: &ModelArtifact,
    notes: &[ClinicalNote],
) -> Result<Vec<NotePrediction>, PipelineError> {
    notes
        .par_iter()
        .map(|n| {
            let mut p = artifact.predict_text(&n.text)?;
            p.id = n.id.clone();
            Ok(p)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub format: String,
    pub seed: u64,
    pub config: PipelineConfig,
    pub task: Task,
    pub model: ModelKind,
    pub features: FeatureSet,
    pub smote: bool,
    /// How the summary precision/recall/F are averaged over classes.
    pub averaging: String,
    /// `weighted` or `graded`: which triple [`EvalReport::headline`] returns.
    pub headline_metric: String,
    pub train_notes: usize,
    pub test_notes: usize,
    pub train_class_counts: Vec<usize>,
    pub synthetic_rows: usize,
    pub linguistic_features: usize,
    pub topic_count: Option<usize>,
    /// `(K, mean coherence)` for every candidate topic count.
    pub coherence_curve: Vec<(usize, f64)>,
    pub train_accuracy: f64,
    pub test: Metrics,
}

impl EvalReport {
    pub fn headline(&self) -> crate::eval::Prf {
        self.test.headline()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub artifact: ModelArtifact,
    pub report: EvalReport,
}

/// Loads the corpus named by `config.corpus` for `config.task`.
pub fn load_configured_corpus(config: &PipelineConfig) -> Result<Corpus, PipelineError> {
    let path = config.corpus.as_ref().ok_or_else(|| {
        ConfigError::InvalidValue {
            key: "corpus".into(),
            message: "no corpus path given".into(),
        }
    })?;
    let format = config.corpus_format.unwrap_or_else(|| CorpusFormat::from_path(path));
    Ok(load_corpus(path, format, config.task)?)
}

fn preprocessor_for(config: &PipelineConfig) -> Result<Preprocessor, PipelineError> {
    Ok(Preprocessor::from_files(
        config.stopwords.as_deref(),
        config.stem_rules.as_deref(),
    )?)
}

/// Topic model chosen for one task, with the search that picked it.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicFit {
    pub model: TopicModel,
    pub curve: Vec<(usize, f64)>,
}

/// Fits LDA for `lda_k`, or searches `lda_k_min..=lda_k_max` by coherence.
pub fn fit_topics(
    config: &PipelineConfig,
    docs: &[TokenList],
    seed: u64,
) -> Result<TopicFit, PipelineError> {
    let search = config.topic_search();
    match config.lda_k {
        Some(k) => {
            let params = LdaParams {
                topics: k,
                alpha: search.alpha.alpha(k),
                beta: search.beta,
                iterations: search.iterations,
            };
            let model = train_lda(docs, &params, seed)?;
            let score = crate::topics::coherence(&model, docs, search.top_m)?.mean;
            Ok(TopicFit {
                model,
                curve: vec![(k, score)],
            })
        }
        None => {
            let sel = select_topic_count(docs, &config.topic_counts(), &search, seed)?;
            Ok(TopicFit {
                model: sel.model,
                curve: sel.curve,
            })
        }
    }
}

/// Split and fitted stages shared by every (model, feature set) cell.
pub struct FittedStages {
    config: PipelineConfig,
    train: Corpus,
    test: Corpus,
    preprocessor: Preprocessor,
    train_tokens: Vec<TokenList>,
    test_tokens: Vec<TokenList>,
    vocabulary: Option<Vocabulary>,
    topics: Option<TopicFit>,
}

impl FittedStages {
    /// Splits `corpus` and fits the vocabulary and topic model as needed by
    /// `feature_sets`.
    pub fn fit(
        config: &PipelineConfig,
        corpus: &Corpus,
        feature_sets: &[FeatureSet],
    ) -> Result<Self, PipelineError> {
        let needs_topics = feature_sets.iter().any(|f| f.uses_topical());
        let needs_linguistic = feature_sets.iter().any(|f| f.uses_linguistic());
        config.validate_for(needs_topics)?;
        if corpus.task() != config.task {
            return Err(ConfigError::InvalidValue {
                key: "task".into(),
                message: format!("corpus was loaded for the {} task", corpus.task()),
            }
            .into());
        }
        let seeds = config.seeds();
        let (train, test) = stratified_split(corpus, config.test_fraction, seeds.split)?;
        let preprocessor = preprocessor_for(config)?;
        let tokenize = |c: &Corpus| -> Vec<TokenList> {
            c.notes().par_iter().map(|n| preprocessor.tokenize(&n.text)).collect()
        };
        let train_tokens = tokenize(&train);
        let test_tokens = tokenize(&test);

        let vocabulary = if needs_linguistic {
            let bags: Vec<NgramBag> = train_tokens
                .iter()
                .map(|t| ngrams_in_range(t, config.ngram_range()))
                .collect();
            Some(select_top_k(&bags, &train.labels(), config.task.n_classes(), config.chi2_k)?)
        } else {
            None
        };
        let topics = if needs_topics {
            let docs: Vec<TokenList> = if config.lda_full_corpus {
                train_tokens.iter().chain(&test_tokens).cloned().collect()
            } else {
                train_tokens.clone()
            };
            Some(fit_topics(config, &docs, seeds.lda)?)
        } else {
            None
        };
        Ok(FittedStages {
            config: config.clone(),
            train,
            test,
            preprocessor,
            train_tokens,
            test_tokens,
            vocabulary,
            topics,
        })
    }

    pub fn train_split(&self) -> &Corpus {
        &self.train
    }

    pub fn test_split(&self) -> &Corpus {
        &self.test
    }

    fn featurizer(&self, features: FeatureSet) -> Featurizer {
        Featurizer {
            features,
            preprocessor: self.preprocessor.clone(),
            ngram_range: self.config.ngram_range(),
            vocabulary: features
                .uses_linguistic()
                .then(|| self.vocabulary.clone().expect("fitted")),
            topic_model: features
                .uses_topical()
                .then(|| self.topics.as_ref().expect("fitted").model.clone()),
            infer_iterations: self.config.lda_infer_iterations,
            infer_seed: self.config.seeds().infer,
        }
    }

    /// Trains and evaluates one (model, feature set) combination.
    pub fn train_cell(
        &self,
        model: ModelKind,
        features: FeatureSet,
    ) -> Result<TrainOutcome, PipelineError> {
        let mut config = self.config.clone();
        config.model = model;
        config.features = features;
        let seeds = config.seeds();
        let task = config.task;
        let featurizer = self.featurizer(features);
        let featurize_all = |tokens: &[TokenList]| -> Result<Vec<FeatureVector>, FeatureError> {
            tokens.par_iter().map(|t| featurizer.featurize_tokens(t)).collect()
        };
        let train_rows = featurize_all(&self.train_tokens)?;
        let train_labels = self.train.labels();
        let original = LabeledMatrix::new(train_rows, train_labels.clone())?;
        let fit_data = if config.smote {
            smote(&original, config.smote_k, seeds.smote)?
        } else {
            original.clone()
        };
        let trained = match model {
            ModelKind::LogReg => train_logreg(&fit_data.rows, &fit_data.labels, &config.lr, seeds.model),
            ModelKind::Tree => train_tree(&fit_data.rows, &fit_data.labels, &config.dt, seeds.model),
            ModelKind::Forest => train_forest(&fit_data.rows, &fit_data.labels, &config.rf, seeds.model),
            ModelKind::Ffnn => train_ffnn(&fit_data.rows, &fit_data.labels, &config.ffnn, seeds.model),
        }?;

        let predict_all = |rows: &[FeatureVector]| -> Result<Vec<usize>, ModelError> {
            rows.iter().map(|x| trained.predict(x).map(|p| p.label)).collect()
        };
        let train_pred = predict_all(&original.rows)?;
        let train_accuracy = train_pred
            .iter()
            .zip(&train_labels)
            .filter(|(p, t)| p == t)
            .count() as f64
            / train_labels.len() as f64;
        let test_rows = featurize_all(&self.test_tokens)?;
        let test_pred = predict_all(&test_rows)?;
        let class_names = task.class_names();
        let metrics = Metrics::compute(&self.test.labels(), &test_pred, &class_names, task.is_ordinal())?;

        let report = EvalReport {
            format: REPORT_FORMAT.into(),
            seed: config.seed,
            config: config.clone(),
            task,
            model,
            features,
            smote: config.smote,
            averaging: "support-weighted".into(),
            headline_metric: if task.is_ordinal() { "graded" } else { "weighted" }.into(),
            train_notes: self.train.len(),
            test_notes: self.test.len(),
            train_class_counts: self.train.class_counts(),
            synthetic_rows: fit_data.synthetic_count(),
            linguistic_features: featurizer.vocabulary.as_ref().map_or(0, Vocabulary::len),
            topic_count: featurizer.topic_model.as_ref().map(|m| m.topics),
            coherence_curve: if features.uses_topical() {
                self.topics.as_ref().map(|t| t.curve.clone()).unwrap_or_default()
            } else {
                Vec::new()
            },
            train_accuracy,
            test: metrics,
        };
        let artifact = ModelArtifact {
            format: ARTIFACT_FORMAT.into(),
            config,
            task,
            class_names: class_names.iter().map(|s| s.to_string()).collect(),
            featurizer,
            model: trained,
        };
        Ok(TrainOutcome { artifact, report })
    }
}

/// Trains the configured model and feature set on an in-memory corpus.
pub fn train_on_corpus(config: &PipelineConfig, corpus: &Corpus) -> Result<TrainOutcome, PipelineError> {
    config.validate()?;
    let stages = FittedStages::fit(config, corpus, &[config.features])?;
    stages.train_cell(config.model, config.features)
}

/// Loads the configured corpus and trains on it.
pub fn run_train(config: &PipelineConfig) -> Result<TrainOutcome, PipelineError> {
    config.validate()?;
    let corpus = load_configured_corpus(config)?;
    train_on_corpus(config, &corpus)
}

/// One report per (model, feature set), feature sets outermost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub format: String,
    pub seed: u64,
    pub config: PipelineConfig,
    pub cells: Vec<EvalReport>,
}

impl GridReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

pub fn run_grid(
    config: &PipelineConfig,
    corpus: &Corpus,
    models: &[ModelKind],
    feature_sets: &[FeatureSet],
) -> Result<GridReport, PipelineError> {
    let stages = FittedStages::fit(config, corpus, feature_sets)?;
    let mut cells = Vec::with_capacity(models.len() * feature_sets.len());
    for &features in feature_sets {
        for &model in models {
            cells.push(stages.train_cell(model, features)?.report);
        }
    }
    Ok(GridReport {
        format: REPORT_FORMAT.into(),
        seed: config.seed,
        config: config.clone(),
        cells,
    })
}

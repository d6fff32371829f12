//! Labeled note collections: loading, label encodings, stratified
//! splitting and a seeded synthetic-corpus generator.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: unknown {field} label {value:?}")]
    UnknownLabel {
        line: usize,
        field: &'static str,
        value: String,
    },
    #[error("line {line}: note {id:?} has a pain-change label, which requires relevance \"yes\"")]
    ChangeImpliesRelevance { line: usize, id: String },
    #[error("line {line}: note {id:?} has no {field} label")]
    MissingLabel {
        line: usize,
        id: String,
        field: &'static str,
    },
    #[error("duplicate note id {0:?}")]
    DuplicateId(String),
    #[error("corpus is empty")]
    Empty,
    #[error("class {class:?} has {count} note(s); stratified splitting needs at least 2")]
    ClassTooSmall { class: String, count: usize },
    #[error("test fraction {0} must lie strictly between 0 and 1")]
    InvalidFraction(f64),
    #[error("invalid synthetic corpus spec: {0}")]
    InvalidSynthSpec(String),
    #[error("unknown corpus format {0:?} (expected jsonl or csv)")]
    UnknownFormat(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn unknown_label(field: &'static str, value: &str) -> CorpusError {
    CorpusError::UnknownLabel {
        line: 0,
        field,
        value: value.to_string(),
    }
}

/// Binary pain relevance. Encoded Irrelevant = 0, Relevant = 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PainRelevance {
    #[serde(rename = "no")]
    Irrelevant = 0,
    #[serde(rename = "yes")]
    Relevant = 1,
}

impl PainRelevance {
    pub const ALL: [PainRelevance; 2] = [PainRelevance::Irrelevant, PainRelevance::Relevant];

    pub fn as_str(self) -> &'static str {
        match self {
            PainRelevance::Irrelevant => "no",
            PainRelevance::Relevant => "yes",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl FromStr for PainRelevance {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "yes" => Ok(PainRelevance::Relevant),
            "no" => Ok(PainRelevance::Irrelevant),
            other => Err(unknown_label("relevance", other)),
        }
    }
}

/// Ordinal pain change, ordered by severity. The numeric encoding is what
/// the graded metrics measure distances on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PainChange {
    #[serde(rename = "pain decrease")]
    Decrease = 0,
    #[serde(rename = "pain unchanged")]
    Unchanged = 1,
    #[serde(rename = "pain uncertain")]
    Uncertain = 2,
    #[serde(rename = "pain increase")]
    Increase = 3,
}

impl PainChange {
    pub const ALL: [PainChange; 4] = [
        PainChange::Decrease,
        PainChange::Unchanged,
        PainChange::Uncertain,
        PainChange::Increase,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PainChange::Decrease => "pain decrease",
            PainChange::Unchanged => "pain unchanged",
            PainChange::Uncertain => "pain uncertain",
            PainChange::Increase => "pain increase",
        }
    }

    pub fn encoding(self) -> usize {
        self as usize
    }

    pub fn from_encoding(code: usize) -> Option<Self> {
        PainChange::ALL.get(code).copied()
    }
}

impl FromStr for PainChange {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PainChange::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| unknown_label("change", s))
    }
}

impl fmt::Display for PainRelevance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Display for PainChange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which label a corpus is classified by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Relevance,
    Change,
}

impl Task {
    pub fn class_names(self) -> Vec<&'static str> {
        match self {
            Task::Relevance => PainRelevance::ALL.iter().map(|r| r.as_str()).collect(),
            Task::Change => PainChange::ALL.iter().map(|c| c.as_str()).collect(),
        }
    }

    pub fn n_classes(self) -> usize {
        match self {
            Task::Relevance => 2,
            Task::Change => 4,
        }
    }

    pub fn class_name(self, index: usize) -> Option<&'static str> {
        self.class_names().get(index).copied()
    }

    /// Class index for a label spelling of this task.
    pub fn parse_label(self, label: &str) -> Result<usize, CorpusError> {
        match self {
            Task::Relevance => label.parse::<PainRelevance>().map(PainRelevance::index),
            Task::Change => label.parse::<PainChange>().map(PainChange::encoding),
        }
    }

    pub fn is_ordinal(self) -> bool {
        matches!(self, Task::Change)
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Relevance => "relevance",
            Task::Change => "change",
        })
    }
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "relevance" => Ok(Task::Relevance),
            "change" => Ok(Task::Change),
            other => Err(format!("unknown task {other:?} (expected relevance or change)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClinicalNote {
    pub id: String,
    pub patient_id: String,
    pub text: String,
    pub relevance: Option<PainRelevance>,
    pub change: Option<PainChange>,
}

impl ClinicalNote {
    /// Class index under `task`, if the note carries that label.
    pub fn class_index(&self, task: Task) -> Option<usize> {
        match task {
            Task::Relevance => self.relevance.map(PainRelevance::index),
            Task::Change => self.change.map(PainChange::encoding),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Corpus {
    notes: Vec<ClinicalNote>,
    task: Task,
}

impl Corpus {
    /// Validates ids, label presence for the task and the change-implies-
    /// relevance invariant.
    pub fn new(notes: Vec<ClinicalNote>, task: Task) -> Result<Self, CorpusError> {
        if notes.is_empty() {
            return Err(CorpusError::Empty);
        }
        let mut seen = HashSet::new();
        for (i, note) in notes.iter().enumerate() {
            if !seen.insert(note.id.as_str()) {
                return Err(CorpusError::DuplicateId(note.id.clone()));
            }
            check_note(note, task, i + 1)?;
        }
        Ok(Corpus { notes, task })
    }

    pub fn notes(&self) -> &[ClinicalNote] {
        &self.notes
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn len(&self) -> usize {
        self.notes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.notes.is_empty()
    }

    /// Class index of every note, in corpus order.
    pub fn labels(&self) -> Vec<usize> {
        self.notes
            .iter()
            .map(|n| n.class_index(self.task).expect("validated on construction"))
            .collect()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.task.n_classes()];
        for l in self.labels() {
            counts[l] += 1;
        }
        counts
    }

    pub fn texts(&self) -> impl Iterator<Item = &str> {
        self.notes.iter().map(|n| n.text.as_str())
    }

    pub fn into_notes(self) -> Vec<ClinicalNote> {
        self.notes
    }
}

fn check_note(note: &ClinicalNote, task: Task, line: usize) -> Result<(), CorpusError> {
    if note.change.is_some() && note.relevance != Some(PainRelevance::Relevant) {
        return Err(CorpusError::ChangeImpliesRelevance {
            line,
            id: note.id.clone(),
        });
    }
    if note.class_index(task).is_none() {
        return Err(CorpusError::MissingLabel {
            line,
            id: note.id.clone(),
            field: match task {
                Task::Relevance => "relevance",
                Task::Change => "change",
            },
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormat {
    Jsonl,
    Csv,
}

impl CorpusFormat {
    /// `.csv` means CSV; anything else is read as JSON lines.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => CorpusFormat::Csv,
            _ => CorpusFormat::Jsonl,
        }
    }
}

impl FromStr for CorpusFormat {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "jsonl" => Ok(CorpusFormat::Jsonl),
            "csv" => Ok(CorpusFormat::Csv),
            other => Err(CorpusError::UnknownFormat(other.to_string())),
        }
    }
}

/// On-disk record shape shared by the JSONL and CSV formats.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawRecord {
    id: String,
    #[serde(default)]
    patient_id: String,
    text: String,
    #[serde(default)]
    relevance: Option<String>,
    #[serde(default)]
    change: Option<String>,
}

fn parse_record(raw: RawRecord, line: usize) -> Result<ClinicalNote, CorpusError> {
    let with_line = |e: CorpusError| match e {
        CorpusError::UnknownLabel { field, value, .. } => {
            CorpusError::UnknownLabel { line, field, value }
        }
        other => other,
    };
    let nonempty = |v: Option<String>| v.filter(|s| !s.trim().is_empty());
    let relevance = nonempty(raw.relevance)
        .map(|s| s.trim().parse::<PainRelevance>())
        .transpose()
        .map_err(with_line)?;
    let change = nonempty(raw.change)
        .map(|s| s.trim().parse::<PainChange>())
        .transpose()
        .map_err(with_line)?;
    Ok(ClinicalNote {
        id: raw.id,
        patient_id: raw.patient_id,
        text: raw.text,
        relevance,
        change,
    })
}

fn read_records(path: &Path, format: CorpusFormat) -> Result<Vec<(usize, RawRecord)>, CorpusError> {
    let io_err = |source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = File::open(path).map_err(io_err)?;
    let mut records = Vec::new();
    match format {
        CorpusFormat::Jsonl => {
            for (i, line) in BufReader::new(file).lines().enumerate() {
                let line = line.map_err(io_err)?;
                if line.trim().is_empty() {
                    continue;
                }
                let raw: RawRecord = serde_json::from_str(&line).map_err(|e| CorpusError::Parse {
                    line: i + 1,
                    message: e.to_string(),
                })?;
                records.push((i + 1, raw));
            }
        }
        CorpusFormat::Csv => {
            let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
            for result in reader.deserialize::<RawRecord>() {
                let raw = result.map_err(|e| CorpusError::Parse {
                    line: e.position().map_or(0, |p| p.line() as usize),
                    message: e.to_string(),
                })?;
                // Header is line 1.
                records.push((records.len() + 2, raw));
            }
        }
    }
    Ok(records)
}

/// Reads and validates a corpus. For the change task, notes labeled
/// relevance "no" are skipped since they carry no pain-change label.
pub fn load_corpus(path: &Path, format: CorpusFormat, task: Task) -> Result<Corpus, CorpusError> {
    let mut notes = Vec::new();
    let mut seen = HashSet::new();
    for (line, raw) in read_records(path, format)? {
        let note = parse_record(raw, line)?;
        if !seen.insert(note.id.clone()) {
            return Err(CorpusError::DuplicateId(note.id));
        }
        if task == Task::Change
            && note.change.is_none()
            && note.relevance == Some(PainRelevance::Irrelevant)
        {
            continue;
        }
        check_note(&note, task, line)?;
        notes.push(note);
    }
    Corpus::new(notes, task)
}

/// Reads notes without requiring any labels (for prediction input).
pub fn load_unlabeled(path: &Path, format: CorpusFormat) -> Result<Vec<ClinicalNote>, CorpusError> {
    read_records(path, format)?
        .into_iter()
        .map(|(line, raw)| parse_record(raw, line))
        .collect()
}

pub fn write_corpus(corpus: &Corpus, path: &Path, format: CorpusFormat) -> Result<(), CorpusError> {
    let io_err = |source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    };
    let records = corpus.notes().iter().map(|n| RawRecord {
        id: n.id.clone(),
        patient_id: n.patient_id.clone(),
        text: n.text.clone(),
        relevance: n.relevance.map(|r| r.as_str().to_string()),
        change: n.change.map(|c| c.as_str().to_string()),
    });
    let file = File::create(path).map_err(io_err)?;
    match format {
        CorpusFormat::Jsonl => {
            let mut out = BufWriter::new(file);
            for rec in records {
                let line = serde_json::to_string(&rec).expect("record serializes");
                writeln!(out, "{line}").map_err(io_err)?;
            }
            out.flush().map_err(io_err)?;
        }
        CorpusFormat::Csv => {
            let mut writer = csv::Writer::from_writer(file);
            for rec in records {
                writer.serialize(rec).map_err(|e| CorpusError::Parse {
                    line: 0,
                    message: e.to_string(),
                })?;
            }
            writer.flush().map_err(io_err)?;
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Splitting
// ---------------------------------------------------------------------------

/// Per-class test-set size: round half up, then keep at least one note on
/// each side.
pub fn test_count(class_count: usize, test_fraction: f64) -> usize {
    let rounded = (class_count as f64 * test_fraction + 0.5).floor() as usize;
    rounded.clamp(1, class_count.saturating_sub(1).max(1))
}

/// Splits per class, shuffling members with a seeded RNG. Both outputs
/// keep the original corpus order.
pub fn stratified_split(
    corpus: &Corpus,
    test_fraction: f64,
    seed: u64,
) -> Result<(Corpus, Corpus), CorpusError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(CorpusError::InvalidFraction(test_fraction));
    }
    let task = corpus.task();
    let labels = corpus.labels();
    let mut members: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        members.entry(l).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_test = vec![false; corpus.len()];
    for (&class, idx) in members.iter_mut() {
        if idx.len() < 2 {
            return Err(CorpusError::ClassTooSmall {
                class: task.class_name(class).unwrap_or("?").to_string(),
                count: idx.len(),
            });
        }
        idx.shuffle(&mut rng);
        for &i in &idx[..test_count(idx.len(), test_fraction)] {
            in_test[i] = true;
        }
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (note, &t) in corpus.notes().iter().zip(&in_test) {
        if t {
            test.push(note.clone());
        } else {
            train.push(note.clone());
        }
    }
    Ok((Corpus { notes: train, task }, Corpus { notes: test, task }))
}

// ---------------------------------------------------------------------------
// Synthetic corpora
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthClass {
    /// Label spelling for the target task, e.g. "yes" or "pain decrease".
    pub label: String,
    pub count: usize,
    pub keywords: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub classes: Vec<SynthClass>,
    pub noise_pool: Vec<String>,
    /// Probability that a token is drawn from the noise pool.
    pub noise_rate: f64,
    pub min_tokens: usize,
    pub max_tokens: usize,
    pub patients: usize,
}

const RELEVANT_POOL: &[&str] = &[
    "emar", "intervention", "increase", "dose", "expression", "chest", "regimen",
    "alteration", "toradol", "medication",
];
const IRRELEVANT_POOL: &[&str] = &[
    "home", "wheelchair", "chc", "fatigue", "bedside", "parent", "discharge", "warm",
    "relief", "mother",
];
const RELEVANCE_NOISE: &[&str] = &[
    "pain", "pca", "plan", "develop", "control", "patient", "level", "comfort", "manage",
    "note",
];
const CHANGE_POOLS: [&[&str]; 4] = [
    // pain decrease
    &["satisfy", "alter", "relief", "decrease", "ability", "resolve", "better", "comfort"],
    // pain unchanged
    &["level", "control", "remain", "stable", "demand", "persist", "steady", "baseline"],
    // pain uncertain
    &["goal", "continue", "improve", "outcome", "problem", "knowledge", "deficit", "method"],
    // pain increase
    &["medication", "management", "schedule", "intervention", "button", "dose", "give", "worse"],
];
const CHANGE_NOISE: &[&str] = &[
    "pain", "patient", "progress", "plan", "regimen", "develop", "chart", "pca", "note",
    "assess",
];

fn words(pool: &[&str]) -> Vec<String> {
    pool.iter().map(|w| w.to_string()).collect()
}

fn split_counts(total: usize, weights: &[usize]) -> Vec<usize> {
    let sum: usize = weights.iter().sum();
    let mut counts: Vec<usize> = weights.iter().map(|w| total * w / sum).collect();
    let mut i = 0;
    while counts.iter().sum::<usize>() < total {
        let n = counts.len();
        counts[i % n] += 1;
        i += 1;
    }
    counts
}

impl SynthSpec {
    /// Planted-keyword corpus with class-exclusive keyword pools and a
    /// shared noise pool. Class sizes are imbalanced (relevant notes and
    /// pain-decrease notes dominate).
    pub fn planted(task: Task, notes: usize, noise_rate: f64) -> Self {
        let classes = match task {
            Task::Relevance => {
                let counts = split_counts(notes, &[3, 1]);
                vec![
                    SynthClass {
                        label: "yes".into(),
                        count: counts[0],
                        keywords: words(RELEVANT_POOL),
                    },
                    SynthClass {
                        label: "no".into(),
                        count: counts[1],
                        keywords: words(IRRELEVANT_POOL),
                    },
                ]
            }
            Task::Change => {
                let counts = split_counts(notes, &[2, 1, 1, 1]);
                PainChange::ALL
                    .iter()
                    .zip(CHANGE_POOLS)
                    .zip(counts)
                    .map(|((c, pool), count)| SynthClass {
                        label: c.as_str().to_string(),
                        count,
                        keywords: words(pool),
                    })
                    .collect()
            }
        };
        SynthSpec {
            classes,
            noise_pool: words(match task {
                Task::Relevance => RELEVANCE_NOISE,
                Task::Change => CHANGE_NOISE,
            }),
            noise_rate,
            min_tokens: 6,
            max_tokens: 14,
            patients: 40,
        }
    }

    fn validate(&self, task: Task) -> Result<Vec<usize>, CorpusError> {
        let bad = |m: String| Err(CorpusError::InvalidSynthSpec(m));
        if self.classes.is_empty() {
            return bad("no classes".into());
        }
        if !(0.0..=1.0).contains(&self.noise_rate) {
            return bad(format!("noise rate {} outside [0, 1]", self.noise_rate));
        }
        if self.min_tokens == 0 || self.min_tokens > self.max_tokens {
            return bad(format!(
                "token range {}..={} is empty",
                self.min_tokens, self.max_tokens
            ));
        }
        if self.noise_pool.is_empty() {
            return bad("noise pool is empty".into());
        }
        let mut owner: BTreeMap<&str, &str> = BTreeMap::new();
        let mut labels = Vec::new();
        let mut distinct = BTreeSet::new();
        for class in &self.classes {
            let label = task.parse_label(&class.label).map_err(|_| {
                CorpusError::InvalidSynthSpec(format!(
                    "label {:?} is not a {task} label",
                    class.label
                ))
            })?;
            if !distinct.insert(label) {
                return bad(format!("label {:?} listed twice", class.label));
            }
            if class.keywords.is_empty() {
                return bad(format!("keyword pool for {:?} is empty", class.label));
            }
            for w in &class.keywords {
                if let Some(prev) = owner.insert(w.as_str(), class.label.as_str()) {
                    if prev != class.label {
                        return bad(format!(
                            "keyword {w:?} appears in the pools of both {prev:?} and {:?}",
                            class.label
                        ));
                    }
                }
            }
            labels.push(label);
        }
        Ok(labels)
    }
}

/// Generates a labeled corpus. Each token comes from the noise pool with
/// probability `noise_rate`, otherwise from the note's class pool.
pub fn generate_synthetic_corpus(
    spec: &SynthSpec,
    task: Task,
    seed: u64,
) -> Result<Corpus, CorpusError> {
    let labels = spec.validate(task)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut drafts = Vec::new();
    for (class, &label) in spec.classes.iter().zip(&labels) {
        for _ in 0..class.count {
            let len = rng.gen_range(spec.min_tokens..=spec.max_tokens);
            let tokens: Vec<&str> = (0..len)
                .map(|_| {
                    let pool = if rng.gen::<f64>() < spec.noise_rate {
                        &spec.noise_pool
                    } else {
                        &class.keywords
                    };
                    pool[rng.gen_range(0..pool.len())].as_str()
                })
                .collect();
            drafts.push((label, tokens.join(" ")));
        }
    }
    drafts.shuffle(&mut rng);
    let patients = spec.patients.max(1);
    let notes = drafts
        .into_iter()
        .enumerate()
        .map(|(i, (label, text))| {
            let (relevance, change) = match task {
                Task::Relevance => (
                    Some(PainRelevance::ALL[label]),
                    None,
                ),
                Task::Change => (
                    Some(PainRelevance::Relevant),
                    PainChange::from_encoding(label),
                ),
            };
            ClinicalNote {
                id: format!("note-{:04}", i + 1),
                patient_id: format!("patient-{:02}", i % patients + 1),
                text,
                relevance,
                change,
            }
        })
        .collect();
    Corpus::new(notes, task)
}

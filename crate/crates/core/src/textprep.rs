//! Text normalization: tokenizing, stopword removal, stemming and n-grams.
//!
//! Tokens are maximal ASCII alphanumeric runs, lowercased. A run of digits
//! followed by `/` and another run of digits (a pain score such as `8/10`)
//! is kept as one token. Stopwords are dropped before and after stemming,
//! so no emitted token is ever a stopword.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

const DEFAULT_STOPWORDS: &str = include_str!("../data/stopwords.txt");
const DEFAULT_STEM_RULES: &str = include_str!("../data/stem_rules.txt");

/// Passes over the rule table before giving up on reaching a fixed point.
const MAX_STEM_PASSES: usize = 16;

#[derive(Debug, Error)]
pub enum TextprepError {
    #[error("invalid n-gram range {min}..={max} (need 1 <= min <= max <= 3)")]
    InvalidNgramRange { min: usize, max: usize },
    #[error("stem rule line {line}: {message}")]
    RuleSyntax { line: usize, message: String },
    #[error("stopword list contains \"pain\", which must stay in the vocabulary")]
    PainIsStopword,
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Normalized tokens of one note, in text order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenList(pub Vec<String>);

impl TokenList {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, String> {
        self.0.iter()
    }

    pub fn as_slice(&self) -> &[String] {
        &self.0
    }
}

impl<S: Into<String>> FromIterator<S> for TokenList {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        TokenList(iter.into_iter().map(Into::into).collect())
    }
}

/// N-gram counts for one note. Keys are tokens joined by a single space.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NgramBag {
    pub counts: BTreeMap<String, u32>,
}

impl NgramBag {
    pub fn get(&self, term: &str) -> u32 {
        self.counts.get(term).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.counts.values().map(|&c| u64::from(c)).sum()
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.counts.keys().map(String::as_str)
    }
}

/// Inclusive n-gram arity range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NgramRange {
    pub min: usize,
    pub max: usize,
}

impl NgramRange {
    pub fn new(min: usize, max: usize) -> Result<Self, TextprepError> {
        if min < 1 || min > max || max > 3 {
            return Err(TextprepError::InvalidNgramRange { min, max });
        }
        Ok(NgramRange { min, max })
    }
}

impl Default for NgramRange {
    fn default() -> Self {
        NgramRange { min: 1, max: 2 }
    }
}

pub fn extract_ngrams(
    tokens: &TokenList,
    n_min: usize,
    n_max: usize,
) -> Result<NgramBag, TextprepError> {
    let range = NgramRange::new(n_min, n_max)?;
    Ok(ngrams_in_range(tokens, range))
}

pub fn ngrams_in_range(tokens: &TokenList, range: NgramRange) -> NgramBag {
    let mut counts = BTreeMap::new();
    for n in range.min..=range.max {
        for window in tokens.0.windows(n) {
            *counts.entry(window.join(" ")).or_insert(0) += 1;
        }
    }
    NgramBag { counts }
}

// ---------------------------------------------------------------------------
// Stemmer
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum Atom {
    Always,
    MeasureAbove(usize),
    MeasureEquals(usize),
    HasVowel,
    EndsVowel,
    Double,
    Cvc,
    EndsWith(u8),
}

#[derive(Debug, Clone, PartialEq)]
struct Literal {
    negated: bool,
    atom: Atom,
}

/// Disjunction of conjunctions.
#[derive(Debug, Clone, PartialEq)]
struct Condition(Vec<Vec<Literal>>);

#[derive(Debug, Clone, PartialEq)]
struct Rule {
    suffix: String,
    replacement: String,
    condition: Condition,
    cleanup: bool,
}

#[derive(Debug, Clone, PartialEq)]
struct Step {
    name: String,
    rules: Vec<Rule>,
}

/// Table-driven suffix stripper. Serializes as its rule-table source text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Stemmer {
    steps: Vec<Step>,
    source: String,
}

impl TryFrom<String> for Stemmer {
    type Error = TextprepError;

    fn try_from(source: String) -> Result<Self, Self::Error> {
        Stemmer::parse(&source)
    }
}

impl From<Stemmer> for String {
    fn from(s: Stemmer) -> String {
        s.source
    }
}

impl Default for Stemmer {
    fn default() -> Self {
        Stemmer::parse(DEFAULT_STEM_RULES).expect("bundled stem rules parse")
    }
}

fn parse_condition(text: &str, line: usize) -> Result<Condition, TextprepError> {
    let err = |message: String| TextprepError::RuleSyntax { line, message };
    if text == "-" {
        return Ok(Condition(vec![vec![Literal {
            negated: false,
            atom: Atom::Always,
        }]]));
    }
    let mut alternatives = Vec::new();
    for conj in text.split('|') {
        let mut literals = Vec::new();
        for raw in conj.split('&') {
            let (negated, name) = match raw.strip_prefix('!') {
                Some(rest) => (true, rest),
                None => (false, raw),
            };
            let atom = if let Some(n) = name.strip_prefix("m>") {
                Atom::MeasureAbove(n.parse().map_err(|_| err(format!("bad measure in {raw:?}")))?)
            } else if let Some(n) = name.strip_prefix("m=") {
                Atom::MeasureEquals(n.parse().map_err(|_| err(format!("bad measure in {raw:?}")))?)
            } else if let Some(letter) = name.strip_prefix("ends:") {
                match letter.as_bytes() {
                    [b] if b.is_ascii_lowercase() => Atom::EndsWith(*b),
                    _ => return Err(err(format!("ends: takes one lowercase letter, got {raw:?}"))),
                }
            } else {
                match name {
                    "hasvowel" => Atom::HasVowel,
                    "endsvowel" => Atom::EndsVowel,
                    "double" => Atom::Double,
                    "cvc" => Atom::Cvc,
                    _ => return Err(err(format!("unknown condition {raw:?}"))),
                }
            };
            literals.push(Literal { negated, atom });
        }
        alternatives.push(literals);
    }
    Ok(Condition(alternatives))
}

impl Stemmer {
    pub fn parse(source: &str) -> Result<Self, TextprepError> {
        let mut steps: Vec<Step> = Vec::new();
        for (i, raw) in source.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let fields: Vec<&str> = content.split_whitespace().collect();
            let cleanup = match fields.get(4) {
                None => false,
                Some(&"+cleanup") => true,
                Some(other) => {
                    return Err(TextprepError::RuleSyntax {
                        line,
                        message: format!("unexpected flag {other:?}"),
                    })
                }
            };
            if fields.len() < 4 || fields.len() > 5 {
                return Err(TextprepError::RuleSyntax {
                    line,
                    message: "expected: step suffix replacement condition [+cleanup]".into(),
                });
            }
            let suffix = fields[1].to_string();
            if !suffix.bytes().all(|b| b.is_ascii_lowercase()) {
                return Err(TextprepError::RuleSyntax {
                    line,
                    message: format!("suffix {suffix:?} must be lowercase letters"),
                });
            }
            let replacement = match fields[2] {
                "-" => String::new(),
                r if r.bytes().all(|b| b.is_ascii_lowercase()) => r.to_string(),
                r => {
                    return Err(TextprepError::RuleSyntax {
                        line,
                        message: format!("replacement {r:?} must be lowercase letters or -"),
                    })
                }
            };
            let rule = Rule {
                suffix,
                replacement,
                condition: parse_condition(fields[3], line)?,
                cleanup,
            };
            match steps.iter_mut().find(|s| s.name == fields[0]) {
                Some(step) => step.rules.push(rule),
                None => steps.push(Step {
                    name: fields[0].to_string(),
                    rules: vec![rule],
                }),
            }
        }
        Ok(Stemmer {
            steps,
            source: source.to_string(),
        })
    }

    pub fn from_file(path: &Path) -> Result<Self, TextprepError> {
        let text = fs::read_to_string(path).map_err(|source| TextprepError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Stemmer::parse(&text)
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Stems a lowercase token. Tokens that are not purely alphabetic, and
    /// tokens of two letters or fewer, are returned unchanged.
    pub fn stem(&self, token: &str) -> String {
        if token.len() <= 2 || !token.bytes().all(|b| b.is_ascii_lowercase()) {
            return token.to_string();
        }
        let mut word = token.as_bytes().to_vec();
        for _ in 0..MAX_STEM_PASSES {
            let next = self.pass(&word);
            if next == word {
                break;
            }
            word = next;
        }
        String::from_utf8(word).expect("ascii stays ascii")
    }

    fn pass(&self, word: &[u8]) -> Vec<u8> {
        let mut word = word.to_vec();
        for step in &self.steps {
            let Some(rule) = step
                .rules
                .iter()
                .filter(|r| word.len() > r.suffix.len() && word.ends_with(r.suffix.as_bytes()))
                .max_by_key(|r| r.suffix.len())
            else {
                continue;
            };
            let stem = &word[..word.len() - rule.suffix.len()];
            if !rule.condition.holds(stem) {
                continue;
            }
            let mut next = stem.to_vec();
            next.extend_from_slice(rule.replacement.as_bytes());
            if rule.cleanup {
                cleanup(&mut next);
            }
            if !next.is_empty() {
                word = next;
            }
        }
        word
    }
}

impl Condition {
    fn holds(&self, stem: &[u8]) -> bool {
        self.0
            .iter()
            .any(|conj| conj.iter().all(|lit| lit.atom.holds(stem) != lit.negated))
    }
}

impl Atom {
    fn holds(&self, stem: &[u8]) -> bool {
        match *self {
            Atom::Always => true,
            Atom::MeasureAbove(n) => measure(stem) > n,
            Atom::MeasureEquals(n) => measure(stem) == n,
            Atom::HasVowel => (0..stem.len()).any(|i| !is_consonant(stem, i)),
            Atom::EndsVowel => !stem.is_empty() && !is_consonant(stem, stem.len() - 1),
            Atom::Double => ends_double(stem),
            Atom::Cvc => ends_cvc(stem),
            Atom::EndsWith(b) => stem.last() == Some(&b),
        }
    }
}

fn cleanup(word: &mut Vec<u8>) {
    if word.ends_with(b"at") || word.ends_with(b"bl") || word.ends_with(b"iz") {
        word.push(b'e');
    } else if ends_double(word) && !matches!(word.last(), Some(b'l' | b's' | b'z')) {
        word.pop();
    } else if measure(word) == 1 && ends_cvc(word) {
        word.push(b'e');
    }
}

fn is_consonant(w: &[u8], i: usize) -> bool {
    match w[i] {
        b'a' | b'e' | b'i' | b'o' | b'u' => false,
        b'y' => i == 0 || !is_consonant(w, i - 1),
        _ => true,
    }
}

/// Number of VC sequences in `[C](VC)^m[V]`.
fn measure(w: &[u8]) -> usize {
    let mut m = 0;
    let mut prev_vowel = false;
    for i in 0..w.len() {
        let cons = is_consonant(w, i);
        if cons && prev_vowel {
            m += 1;
        }
        prev_vowel = !cons;
    }
    m
}

fn ends_double(w: &[u8]) -> bool {
    let n = w.len();
    n >= 2 && w[n - 1] == w[n - 2] && is_consonant(w, n - 1)
}

fn ends_cvc(w: &[u8]) -> bool {
    let n = w.len();
    n >= 3
        && is_consonant(w, n - 3)
        && !is_consonant(w, n - 2)
        && is_consonant(w, n - 1)
        && !matches!(w[n - 1], b'w' | b'x' | b'y')
}

// ---------------------------------------------------------------------------
// Preprocessor
// ---------------------------------------------------------------------------

/// Stopword list plus stemmer; everything needed to turn raw text into
/// tokens. Stored inside model artifacts so prediction is self-contained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocessor {
    stopwords: BTreeSet<String>,
    stemmer: Stemmer,
}

impl Default for Preprocessor {
    fn default() -> Self {
        Preprocessor {
            stopwords: parse_stopwords(DEFAULT_STOPWORDS),
            stemmer: Stemmer::default(),
        }
    }
}

fn parse_stopwords(text: &str) -> BTreeSet<String> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim().to_ascii_lowercase())
        .filter(|l| !l.is_empty())
        .collect()
}

impl Preprocessor {
    pub fn new(stopwords: BTreeSet<String>, stemmer: Stemmer) -> Result<Self, TextprepError> {
        if stopwords.contains("pain") {
            return Err(TextprepError::PainIsStopword);
        }
        Ok(Preprocessor { stopwords, stemmer })
    }

    /// Loads overrides; `None` keeps the bundled list or rule table.
    pub fn from_files(
        stopwords: Option<&Path>,
        stem_rules: Option<&Path>,
    ) -> Result<Self, TextprepError> {
        let words = match stopwords {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|source| TextprepError::Io {
                    path: path.display().to_string(),
                    source,
                })?;
                parse_stopwords(&text)
            }
            None => parse_stopwords(DEFAULT_STOPWORDS),
        };
        let stemmer = match stem_rules {
            Some(path) => Stemmer::from_file(path)?,
            None => Stemmer::default(),
        };
        Preprocessor::new(words, stemmer)
    }

    pub fn is_stopword(&self, token: &str) -> bool {
        self.stopwords.contains(token)
    }

    pub fn stopwords(&self) -> impl Iterator<Item = &str> {
        self.stopwords.iter().map(String::as_str)
    }

    pub fn stem(&self, token: &str) -> String {
        self.stemmer.stem(token)
    }

    pub fn tokenize(&self, text: &str) -> TokenList {
        raw_tokens(text)
            .into_iter()
            .filter(|t| !self.is_stopword(t))
            .map(|t| self.stemmer.stem(&t))
            .filter(|t| !self.is_stopword(t))
            .collect()
    }
}

impl fmt::Display for TokenList {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0.join(" "))
    }
}

/// Lowercased alphanumeric runs with `digits/digits` kept whole.
fn raw_tokens(text: &str) -> Vec<String> {
    let bytes = text.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        if !bytes[i].is_ascii_alphanumeric() {
            i += 1;
            continue;
        }
        let start = i;
        while i < bytes.len() && bytes[i].is_ascii_alphanumeric() {
            i += 1;
        }
        let run = &bytes[start..i];
        if run.iter().all(u8::is_ascii_digit)
            && i + 1 < bytes.len()
            && bytes[i] == b'/'
            && bytes[i + 1].is_ascii_digit()
        {
            let mut j = i + 1;
            while j < bytes.len() && bytes[j].is_ascii_digit() {
                j += 1;
            }
            // "8/10x" is not a score; fall back to plain runs.
            if j >= bytes.len() || !bytes[j].is_ascii_alphanumeric() {
                tokens.push(String::from_utf8_lossy(&bytes[start..j]).into_owned());
                i = j;
                continue;
            }
        }
        tokens.push(String::from_utf8_lossy(run).to_ascii_lowercase());
    }
    tokens
}

fn default_preprocessor() -> &'static Preprocessor {
    static DEFAULT: OnceLock<Preprocessor> = OnceLock::new();
    DEFAULT.get_or_init(Preprocessor::default)
}

/// Tokenizes with the bundled stopword list and rule table.
pub fn tokenize(text: &str) -> TokenList {
    default_preprocessor().tokenize(text)
}

/// Stems with the bundled rule table.
pub fn stem(token: &str) -> String {
    default_preprocessor().stem(token)
}

//! Tab-separated corpus reports and the aligned evaluation table.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::str::FromStr;

use super::{fit_topics, preprocessor_for, GridReport, PipelineConfig, PipelineError};
use crate::corpus::Corpus;
use crate::features::{class_report_from, DocFreqTable};
use crate::textprep::{ngrams_in_range, NgramBag, TokenList};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportKind {
    Ngrams,
    Topics,
    Coherence,
}

impl FromStr for ReportKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ngrams" | "ngram" => Ok(ReportKind::Ngrams),
            "topics" => Ok(ReportKind::Topics),
            "coherence" => Ok(ReportKind::Coherence),
            other => Err(format!("unknown report {other:?} (expected ngrams, topics or coherence)")),
        }
    }
}

fn header(kind: &str, config: &PipelineConfig) -> String {
    let mut out = format!("# painsift report: {kind}\n# seed = {}\n", config.seed);
    for (k, v) in config.entries() {
        let _ = writeln!(out, "# config {k} = {v}");
    }
    out
}

fn tokenize_corpus(config: &PipelineConfig, corpus: &Corpus) -> Result<Vec<TokenList>, PipelineError> {
    let pre = preprocessor_for(config)?;
    Ok(corpus.notes().iter().map(|n| pre.tokenize(&n.text)).collect())
}

pub fn run_report(
    config: &PipelineConfig,
    corpus: &Corpus,
    kind: ReportKind,
) -> Result<String, PipelineError> {
    match kind {
        ReportKind::Ngrams => {
            config.validate_for(false)?;
            ngram_report(config, corpus)
        }
        ReportKind::Topics => {
            config.validate_for(true)?;
            topic_report(config, corpus)
        }
        ReportKind::Coherence => {
            config.validate_for(true)?;
            coherence_report(config, corpus)
        }
    }
}

/// Per class, the top chi-squared terms seen only in that class, then the
/// top terms seen in several classes.
pub fn ngram_report(config: &PipelineConfig, corpus: &Corpus) -> Result<String, PipelineError> {
    let task = corpus.task();
    let names = task.class_names();
    let bags: Vec<NgramBag> = tokenize_corpus(config, corpus)?
        .iter()
        .map(|t| ngrams_in_range(t, config.ngram_range()))
        .collect();
    let table = DocFreqTable::build(&bags, &corpus.labels(), task.n_classes())?;
    let classes = class_report_from(&table);
    let ranked = table.ranked();

    let mut out = header("ngrams", config);
    out.push_str("term\tclass_profile\tchi2");
    for name in &names {
        let _ = write!(out, "\tdf:{name}");
    }
    out.push('\n');
    let mut emit = |profile: String, members: &BTreeSet<String>| {
        for scored in ranked
            .iter()
            .filter(|s| members.contains(&s.term))
            .take(config.report_top_terms)
        {
            let _ = write!(out, "{}\t{profile}\t{:.6}", scored.term, scored.chi2);
            for df in &table.terms[&scored.term] {
                let _ = write!(out, "\t{df}");
            }
            out.push('\n');
        }
    };
    for (c, members) in classes.exclusive.iter().enumerate() {
        emit(format!("exclusive:{}", names[c]), members);
    }
    emit("shared".into(), &classes.shared);
    Ok(out)
}

type ClassTopics = (usize, Vec<Vec<String>>, Vec<(usize, f64)>);

/// Fits topics separately within each class and lists every topic's top
/// words. A word is flagged exclusive when no other class's topics list it.
pub fn topic_report(config: &PipelineConfig, corpus: &Corpus) -> Result<String, PipelineError> {
    let task = corpus.task();
    let names = task.class_names();
    let tokens = tokenize_corpus(config, corpus)?;
    let labels = corpus.labels();
    let seed = config.seeds().lda;

    // (class, top words per topic, coherence curve)
    let mut per_class: Vec<ClassTopics> = Vec::new();
    for class in 0..task.n_classes() {
        let docs: Vec<TokenList> = tokens
            .iter()
            .zip(&labels)
            .filter(|(_, &l)| l == class)
            .map(|(t, _)| t.clone())
            .collect();
        if docs.iter().all(TokenList::is_empty) {
            continue;
        }
        let fit = fit_topics(config, &docs, seed)?;
        let words = (0..fit.model.topics)
            .map(|k| fit.model.top_words(k, config.lda_top_words))
            .collect::<Result<_, _>>()?;
        per_class.push((class, words, fit.curve));
    }

    let mut out = header("topics", config);
    for (class, words, curve) in &per_class {
        let _ = writeln!(
            out,
            "# class {} topics = {} coherence = {}",
            names[*class],
            words.len(),
            curve
                .iter()
                .map(|(k, c)| format!("{k}:{c:.6}"))
                .collect::<Vec<_>>()
                .join(",")
        );
    }
    out.push_str("class\ttopic\trank\tword\texclusive\n");
    for (class, words, _) in &per_class {
        let elsewhere: BTreeSet<&str> = per_class
            .iter()
            .filter(|(c, _, _)| c != class)
            .flat_map(|(_, w, _)| w.iter().flatten().map(String::as_str))
            .collect();
        for (k, topic) in words.iter().enumerate() {
            for (rank, w) in topic.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{}\t{}\t{}\t{w}\t{}",
                    names[*class],
                    k + 1,
                    rank + 1,
                    if elsewhere.contains(w.as_str()) { "no" } else { "yes" }
                );
            }
        }
    }
    Ok(out)
}

/// Mean UMass coherence for every candidate topic count over the corpus.
pub fn coherence_report(config: &PipelineConfig, corpus: &Corpus) -> Result<String, PipelineError> {
    let tokens = tokenize_corpus(config, corpus)?;
    let fit = fit_topics(config, &tokens, config.seeds().lda)?;
    let mut out = header("coherence", config);
    let _ = writeln!(out, "# selected k = {}", fit.model.topics);
    out.push_str("k\tcoherence\n");
    for (k, c) in &fit.curve {
        let _ = writeln!(out, "{k}\t{c:.6}");
    }
    Ok(out)
}

/// Aligned text table with one row per (model, feature set).
pub fn render_table(grid: &GridReport) -> String {
    let graded = grid.cells.first().is_some_and(|c| c.headline_metric == "graded");
    let mut rows = vec![vec![
        "Model".to_string(),
        "Features".to_string(),
        "Precision".to_string(),
        "Recall".to_string(),
        "F-measure".to_string(),
    ]];
    for cell in &grid.cells {
        let h = cell.headline();
        rows.push(vec![
            cell.model.display_name().to_string(),
            cell.features.display_name().to_string(),
            format!("{:.2}", h.precision),
            format!("{:.2}", h.recall),
            format!("{:.2}", h.f_measure),
        ]);
    }
    let widths: Vec<usize> = (0..5)
        .map(|j| rows.iter().map(|r| r[j].len()).max().unwrap_or(0))
        .collect();
    let mut out = format!(
        "task = {}  seed = {}  metrics = {}  smote = {}\n",
        grid.config.task,
        grid.seed,
        if graded { "graded" } else { "support-weighted" },
        if grid.config.smote { "on" } else { "off" },
    );
    for (i, row) in rows.iter().enumerate() {
        let line: Vec<String> = row
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(j, (cell, &w))| if j < 2 { format!("{cell:<w$}") } else { format!("{cell:>w$}") })
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
        if i == 0 {
            out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
            out.push('\n');
        }
    }
    out
}

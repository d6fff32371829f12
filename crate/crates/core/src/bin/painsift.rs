//! `painsift` command-line interface.
//!
//! Exit codes: 0 success, 1 usage or config error, 2 data error, 3 internal error.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use painsift::corpus::{
    generate_synthetic_corpus, load_unlabeled, write_corpus, ClinicalNote, CorpusFormat, SynthSpec,
    Task,
};
use painsift::models::ModelKind;
use painsift::pipeline::report::{render_table, run_report, ReportKind};
use painsift::pipeline::{
    load_configured_corpus, run_grid, run_predict, run_train, ConfigError, FeatureSet,
    ModelArtifact, PipelineConfig, PipelineError,
};

#[derive(Parser)]
#[command(name = "painsift", version, about = "Classify clinical notes for pain relevance and pain change")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Flat key = value config file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_parser = ["relevance", "change"])]
    task: Option<String>,
    #[arg(long, global = true, value_parser = ["linguistic", "topical", "combined"])]
    features: Option<String>,
    #[arg(long, global = true, value_parser = ["lr", "dt", "rf", "ffnn"])]
    model: Option<String>,
    #[arg(long, global = true, value_enum)]
    smote: Option<OnOff>,
    #[arg(long = "smote-k", global = true)]
    smote_k: Option<usize>,
    /// Labeled corpus (JSONL or CSV)
    #[arg(long, global = true)]
    corpus: Option<PathBuf>,
    /// Fit LDA on the whole corpus instead of the training split
    #[arg(long = "lda-on-full-corpus", global = true)]
    lda_on_full_corpus: bool,
    /// Override any config key, e.g. --set chi2_k=200 (repeatable)
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output path
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum OnOff {
    On,
    Off,
}

#[derive(Subcommand)]
enum Command {
    /// Train one model and write the artifact (--out) and its evaluation report
    Train {
        /// Report path; defaults to the artifact path with a .report.json suffix
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Train and evaluate a grid of models and feature sets
    Evaluate {
        /// Comma-separated models (default: all four)
        #[arg(long, value_delimiter = ',', value_parser = ["lr", "dt", "rf", "ffnn"])]
        models: Vec<String>,
        /// Comma-separated feature sets (default: all three)
        #[arg(long = "feature-sets", value_delimiter = ',', value_parser = ["linguistic", "topical", "combined"])]
        feature_sets: Vec<String>,
    },
    /// Label notes with a trained artifact
    Predict {
        #[arg(long)]
        artifact: PathBuf,
        /// Notes file (JSONL or CSV); labels are not required
        #[arg(long, conflicts_with = "text")]
        input: Option<PathBuf>,
        /// Note text given directly (repeatable)
        #[arg(long)]
        text: Vec<String>,
    },
    /// Corpus reports as TSV
    Report {
        #[arg(value_parser = ["ngrams", "topics", "coherence"])]
        kind: String,
    },
    /// Write a planted-keyword synthetic corpus
    Synth {
        #[arg(long, default_value_t = 200)]
        notes: usize,
        /// Share of tokens drawn from the shared noise pool
        #[arg(long, default_value_t = 0.3)]
        noise: f64,
        #[arg(long, value_parser = ["jsonl", "csv"])]
        format: Option<String>,
    },
}

fn build_config(g: &Global) -> Result<PipelineConfig, PipelineError> {
    let mut config = match &g.config {
        Some(path) => PipelineConfig::from_file(path)?,
        None => PipelineConfig::default(),
    };
    for kv in &g.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| ConfigError::InvalidValue {
            key: kv.clone(),
            message: "expected KEY=VALUE".into(),
        })?;
        config.set(k.trim(), v)?;
    }
    let flags: [(&str, Option<String>); 8] = [
        ("seed", g.seed.map(|s| s.to_string())),
        ("task", g.task.clone()),
        ("features", g.features.clone()),
        ("model", g.model.clone()),
        ("smote", g.smote.map(|s| match s {
            OnOff::On => "on".to_string(),
            OnOff::Off => "off".to_string(),
        })),
        ("smote_k", g.smote_k.map(|k| k.to_string())),
        ("corpus", g.corpus.as_ref().map(|p| p.display().to_string())),
        ("lda_full_corpus", g.lda_on_full_corpus.then(|| "true".to_string())),
    ];
    for (k, v) in flags {
        if let Some(v) = v {
            config.set(k, &v)?;
        }
    }
    Ok(config)
}

fn write_output(path: Option<&Path>, text: &str) -> Result<(), PipelineError> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| PipelineError::Io {
            path: p.display().to_string(),
            message: e.to_string(),
        }),
        None => io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| PipelineError::Io {
                path: "<stdout>".into(),
                message: e.to_string(),
            }),
    }
}

fn report_path_for(artifact: &Path) -> PathBuf {
    let stem = artifact.file_stem().and_then(|s| s.to_str()).unwrap_or("model");
    artifact.with_file_name(format!("{stem}.report.json"))
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    let config = build_config(&cli.global)?;
    let out = cli.global.out.as_deref();
    match cli.command {
        Command::Train { report } => {
            let outcome = run_train(&config)?;
            let artifact_path = out.map_or_else(|| PathBuf::from("model.json"), Path::to_path_buf);
            let report_path = report.unwrap_or_else(|| report_path_for(&artifact_path));
            outcome.artifact.save(&artifact_path)?;
            write_output(Some(&report_path), &outcome.report.to_json())?;
            let h = outcome.report.headline();
            println!(
                "{} / {}: precision {:.4}  recall {:.4}  F {:.4} ({} metrics, {} test notes)",
                config.model.display_name(),
                config.features.display_name(),
                h.precision,
                h.recall,
                h.f_measure,
                outcome.report.headline_metric,
                outcome.report.test_notes,
            );
            println!("artifact: {}", artifact_path.display());
            println!("report:   {}", report_path.display());
        }
        Command::Evaluate { models, feature_sets } => {
            let models: Vec<ModelKind> = if models.is_empty() {
                ModelKind::ALL.to_vec()
            } else {
                models.iter().map(|m| m.parse().expect("validated by clap")).collect()
            };
            let sets: Vec<FeatureSet> = if feature_sets.is_empty() {
                FeatureSet::ALL.to_vec()
            } else {
                feature_sets.iter().map(|f| f.parse().expect("validated by clap")).collect()
            };
            let corpus = load_configured_corpus(&config)?;
            let grid = run_grid(&config, &corpus, &models, &sets)?;
            print!("{}", render_table(&grid));
            if let Some(p) = out {
                write_output(Some(p), &grid.to_json())?;
            }
        }
        Command::Predict { artifact, input, text } => {
            let artifact = ModelArtifact::load(&artifact)?;
            let notes: Vec<ClinicalNote> = match input {
                Some(path) => load_unlabeled(&path, CorpusFormat::from_path(&path))?,
                None => text
                    .into_iter()
                    .enumerate()
                    .map(|(i, t)| ClinicalNote {
                        id: format!("text-{}", i + 1),
                        patient_id: String::new(),
                        text: t,
                        relevance: None,
                        change: None,
                    })
                    .collect(),
            };
            let predictions = run_predict(&artifact, &notes)?;
            let mut tsv = String::from("id\tlabel");
            for name in &artifact.class_names {
                tsv.push_str(&format!("\tscore:{name}"));
            }
            tsv.push('\n');
            for p in predictions {
                tsv.push_str(&format!("{}\t{}", p.id, p.label));
                for s in p.scores {
                    tsv.push_str(&format!("\t{s:.6}"));
                }
                tsv.push('\n');
            }
            write_output(out, &tsv)?;
        }
        Command::Report { kind } => {
            let kind: ReportKind = kind.parse().expect("validated by clap");
            let corpus = load_configured_corpus(&config)?;
            write_output(out, &run_report(&config, &corpus, kind)?)?;
        }
        Command::Synth { notes, noise, format } => {
            let path = out.ok_or_else(|| ConfigError::InvalidValue {
                key: "out".into(),
                message: "synth needs --out".into(),
            })?;
            let format = match format {
                Some(f) => f.parse()?,
                None => CorpusFormat::from_path(path),
            };
            let task: Task = config.task;
            let corpus = generate_synthetic_corpus(&SynthSpec::planted(task, notes, noise), task, config.seed)?;
            write_corpus(&corpus, path, format)?;
            eprintln!("wrote {} {task} notes to {}", corpus.len(), path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
        Err(_) => ExitCode::from(3),
    }
}

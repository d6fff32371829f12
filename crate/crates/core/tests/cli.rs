use std::path::Path;
use std::process::{Command, Output};

const FAST: [&str; 4] = ["--set", "lda_iterations=200", "--set", "lda_k_max=4"];

fn painsift(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_painsift"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = painsift(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    painsift(args).status.code().expect("exited normally")
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).display().to_string()
}

fn synth(dir: &Path, name: &str, task: &str) -> String {
    let p = path(dir, name);
    ok(&["synth", "--task", task, "--seed", "3", "--out", &p]);
    p
}

#[test]
fn train_then_predict_from_text_and_file() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth(dir.path(), "notes.jsonl", "relevance");
    let model = path(dir.path(), "m.json");
    let mut args = vec!["train", "--corpus", &corpus, "--model", "lr", "--out", &model];
    args.extend(FAST);
    let summary = ok(&args);
    assert!(summary.contains("Logistic Regression"), "{summary}");
    assert!(dir.path().join("m.report.json").exists());

    let tsv = ok(&[
        "predict", "--artifact", &model,
        "--text", "toradol dose increase chest",
        "--text", "home wheelchair mother",
    ]);
    let lines: Vec<&str> = tsv.lines().collect();
    assert_eq!(lines[0], "id\tlabel\tscore:no\tscore:yes");
    assert!(lines[1].starts_with("text-1\tyes\t"), "{tsv}");
    assert!(lines[2].starts_with("text-2\tno\t"), "{tsv}");

    let from_file = ok(&["predict", "--artifact", &model, "--input", &corpus]);
    assert_eq!(from_file.lines().count(), 201);
}

#[test]
fn evaluate_prints_one_row_per_cell_and_writes_grid() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth(dir.path(), "notes.csv", "change");
    let grid = path(dir.path(), "grid.json");
    let mut args = vec![
        "evaluate", "--corpus", &corpus, "--task", "change",
        "--models", "dt,lr", "--feature-sets", "linguistic,combined", "--out", &grid,
    ];
    args.extend(FAST);
    let table = ok(&args);
    let lines: Vec<&str> = table.lines().collect();
    assert!(lines[0].contains("metrics = graded"), "{table}");
    assert_eq!(lines.len(), 3 + 4, "{table}");
    assert!(lines[3].starts_with("Decision Trees       Linguistic"), "{table}");
    assert!(lines[4].starts_with("Logistic Regression  Linguistic"), "{table}");
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&grid).unwrap()).unwrap();
    assert_eq!(json["cells"].as_array().unwrap().len(), 4);
}

#[test]
fn reports_are_tab_separated_with_provenance_header() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth(dir.path(), "notes.jsonl", "relevance");
    let ngrams = ok(&["report", "ngrams", "--corpus", &corpus, "--seed", "5"]);
    assert!(ngrams.starts_with("# painsift report: ngrams\n# seed = 5\n"));
    assert!(ngrams.lines().any(|l| l.starts_with("term\tclass_profile\tchi2\tdf:no\tdf:yes")));

    let mut args = vec!["report", "coherence", "--corpus", &corpus];
    args.extend(FAST);
    let coherence = ok(&args);
    let rows = coherence.lines().filter(|l| !l.starts_with('#')).count();
    assert_eq!(rows, 1 + 3, "{coherence}");
}

#[test]
fn config_file_and_flags_combine() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth(dir.path(), "notes.jsonl", "relevance");
    let config = path(dir.path(), "run.conf");
    std::fs::write(&config, "# quick run\nmodel = rf\nrf_trees = 5\nlda_iterations = 200\nlda_k_max = 3\n").unwrap();
    let model = path(dir.path(), "m.json");
    let summary = ok(&["train", "--config", &config, "--corpus", &corpus, "--features", "topical", "--out", &model]);
    assert!(summary.contains("Random Forest / Topical"), "{summary}");
    let artifact: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&model).unwrap()).unwrap();
    assert_eq!(artifact["config"]["rf_trees"], "5");
    assert_eq!(artifact["config"]["features"], "topical");
}

#[test]
fn usage_and_config_errors_exit_1() {
    assert_eq!(code(&["train", "--no-such-flag"]), 1);
    assert_eq!(code(&["train", "--model", "svm"]), 1);
    assert_eq!(code(&["train", "--set", "bogus_key=1"]), 1);
    assert_eq!(code(&["train", "--set", "chi2_k=zero"]), 1);
    let dir = tempfile::tempdir().unwrap();
    let config = path(dir.path(), "bad.conf");
    std::fs::write(&config, "seed = 1\nunknown = 2\n").unwrap();
    let out = painsift(&["train", "--config", &config]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown"));
}

#[test]
fn data_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let missing = path(dir.path(), "missing.jsonl");
    assert_eq!(code(&["train", "--corpus", &missing]), 2);
    let garbage = path(dir.path(), "garbage.json");
    std::fs::write(&garbage, "not json").unwrap();
    assert_eq!(code(&["predict", "--artifact", &garbage, "--text", "pain"]), 2);
}

#[test]
fn synth_requires_an_output_path() {
    assert_eq!(code(&["synth"]), 1);
}

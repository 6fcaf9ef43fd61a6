//! End-to-end subcommand chain: each command runs on the previous ones' file
//! outputs, as the tool is meant to be used.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn aedetect(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aedetect"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn ok(output: &Output) {
    assert!(
        output.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
}

#[test]
fn subcommands_chain_on_each_others_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();

    fs::write(
        root.join("gen.json"),
        serde_json::json!({
            "spec": {
                "note_type": "radiology",
                "no_dislocation": 90,
                "current_dislocation": 30,
                "evidence_previous_dislocation": 30,
                "negation_fraction": 0.3,
                "outlier_fraction": 0.01,
                "seed": 5
            },
            "code_plan": {
                "uncoded_telephone_only": 0,
                "uncoded_radiology_only": 4,
                "uncoded_both": 0
            }
        })
        .to_string(),
    )
    .unwrap();
    ok(&aedetect(&["gen-corpus", "--config", "gen.json", "--out", "corpus"], root));
    assert!(root.join("corpus/notes.jsonl").exists());
    assert!(root.join("corpus/codes.jsonl").exists());

    ok(&aedetect(
        &["prefilter", "--notes", "corpus/notes.jsonl", "--out", "filtered.jsonl"],
        root,
    ));
    ok(&aedetect(
        &["split", "--notes", "filtered.jsonl", "--out", "split.json", "--seed", "7"],
        root,
    ));

    fs::write(
        root.join("train.json"),
        serde_json::json!({
            "notes": "filtered.jsonl",
            "note_type": "radiology",
            "model": {"classical": {"kind": "GeneralizedLinear", "ngram_order": 1}},
            "profile": "desk",
            "split": "split.json",
            "seed": 7,
            "train": {"epochs": 5, "batch_size": 16, "learning_rate": 0.001, "patience": 3, "seed": 7}
        })
        .to_string(),
    )
    .unwrap();
    ok(&aedetect(&["train", "--config", "train.json", "--out", "model"], root));
    assert!(root.join("model/classical.json").exists());

    let eval = aedetect(
        &[
            "eval",
            "--model",
            "model",
            "--notes",
            "filtered.jsonl",
            "--split",
            "split.json",
            "--format",
            "csv",
        ],
        root,
    );
    ok(&eval);
    let report = String::from_utf8(eval.stdout).unwrap();
    assert!(report.starts_with("model,variant,class,recall_pct,precision_pct,kappa"));

    fs::write(root.join("probe.txt"), "The left hip prosthesis is dislocated.").unwrap();
    let predict = aedetect(&["predict", "--model", "model", "--note", "probe.txt"], root);
    ok(&predict);
    let line: serde_json::Value =
        serde_json::from_slice(&predict.stdout).expect("single JSON object on stdout");
    assert!(line.get("label").is_some());
    assert!(line.get("probabilities").is_some());
    assert_eq!(String::from_utf8_lossy(&predict.stdout).lines().count(), 1);

    let capture = aedetect(
        &["compare-codes", "--notes", "corpus/notes.jsonl", "--codes", "corpus/codes.jsonl"],
        root,
    );
    ok(&capture);
    let value: serde_json::Value = serde_json::from_slice(&capture.stdout).unwrap();
    assert_eq!(value["uncoded_radiology_only"], 4);
}

#[test]
fn run_experiment_writes_report_and_fails_cleanly_on_bad_config() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    fs::write(
        root.join("exp.json"),
        serde_json::json!({
            "source": {"synthetic": {"spec": {
                "note_type": "radiology",
                "no_dislocation": 90,
                "current_dislocation": 30,
                "evidence_previous_dislocation": 30,
                "negation_fraction": 0.3,
                "outlier_fraction": 0.01,
                "seed": 5
            }, "code_plan": null}},
            "note_type": "radiology",
            "prefilter_keywords": null,
            "classical_kinds": ["GeneralizedLinear"],
            "ngram_orders": [1],
            "deep_architectures": [],
            "profile": "desk",
            "split": {"train": 0.8, "validation": 0.1, "test": 0.1},
            "stratified": true,
            "train": {"epochs": 5, "batch_size": 16, "learning_rate": 0.001, "patience": 3, "seed": 7},
            "format": "markdown",
            "output_dir": "run",
            "overwrite": false,
            "seed": 7
        })
        .to_string(),
    )
    .unwrap();
    ok(&aedetect(&["run-experiment", "--config", "exp.json"], root));
    assert!(root.join("run/report.md").exists());
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(root.join("run/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["completed"], true);

    // Rerun without --overwrite must fail with a nonzero exit.
    let rerun = aedetect(&["run-experiment", "--config", "exp.json"], root);
    assert!(!rerun.status.success());
    // And succeed with it.
    ok(&aedetect(&["run-experiment", "--config", "exp.json", "--overwrite"], root));
}

#[test]
fn grad_check_passes() {
    let dir = tempfile::tempdir().unwrap();
    let output = aedetect(&["grad-check"], dir.path());
    ok(&output);
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert_eq!(stdout.matches("PASS").count(), 3);
    assert!(!stdout.contains("FAIL"));
}

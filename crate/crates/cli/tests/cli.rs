use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const SUBCOMMANDS: &[&str] = &[
    "gen-corpus", "ingest", "split", "label", "train", "predict", "eval", "heldout", "select",
    "fine-tune", "round", "bench", "serve",
];

fn rules(name: &str) -> String {
    format!("{}/../../rules/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn silverloop(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_silverloop"))
        .env_remove("SILVERLOOP_DATA")
        .arg("--data-dir")
        .arg(dir)
        .args(args)
        .output()
        .unwrap()
}

/// Runs and expects success; returns the last stdout line as JSON.
fn ok(dir: &Path, args: &[&str]) -> Value {
    let out = silverloop(dir, args);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(
        out.status.success(),
        "{args:?} failed: {}\n{stdout}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_str(stdout.lines().last().unwrap_or("null")).unwrap_or(Value::Null)
}

fn error_line(out: &Output) -> Value {
    let stderr = String::from_utf8_lossy(&out.stderr);
    let lines: Vec<&str> = stderr.lines().collect();
    assert_eq!(lines.len(), 1, "{stderr}");
    serde_json::from_str(lines[0]).unwrap()
}

#[test]
fn every_subcommand_has_help() {
    let dir = tempfile::tempdir().unwrap();
    for sub in SUBCOMMANDS {
        let out = silverloop(dir.path(), &[sub, "--help"]);
        assert!(out.status.success(), "{sub}");
        assert!(String::from_utf8_lossy(&out.stdout).contains("Usage"), "{sub}");
    }
    for sub in ["parity", "f1", "gold", "agreement", "bench", "discrepancies", "adjudication"] {
        assert!(silverloop(dir.path(), &["eval", sub, "--help"]).status.success(), "{sub}");
    }
}

#[test]
fn usage_errors_exit_two_and_runtime_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = silverloop(dir.path(), &["label", "--corpus", "c.jsonl", "--out", "l.jsonl", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(silverloop(dir.path(), &["frobnicate"]).status.code(), Some(2));
    assert_eq!(
        silverloop(dir.path(), &["select", "--corpus", "c", "--probs", "p", "--measure", "vibes", "--out", "o"])
            .status
            .code(),
        Some(2)
    );

    let out = silverloop(dir.path(), &["label", "--corpus", "missing.jsonl", "--out", "l.jsonl"]);
    assert_eq!(out.status.code(), Some(1));
    let err = error_line(&out);
    assert_eq!(err["kind"], "io");
    assert!(err["error"].as_str().unwrap().contains("missing.jsonl"));
}

#[test]
fn failed_runs_leave_no_output_file() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("c.jsonl"),
        "{\"report_id\":\"r\",\"sentence_index\":0,\"text\":\"No edema.\"}\n{\"report_id\":\n",
    )
    .unwrap();
    let out = silverloop(dir.path(), &["label", "--corpus", "c.jsonl", "--out", "l.jsonl"]);
    assert_eq!(out.status.code(), Some(1));
    let err = error_line(&out);
    assert_eq!(err["kind"], "parse");
    assert!(err["error"].as_str().unwrap().contains("line 2"));
    assert!(!dir.path().join("l.jsonl").exists());
}

#[test]
fn label_with_fixture_rules_and_self_parity() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("c.jsonl"),
        concat!(
            "{\"report_id\":\"r1\",\"sentence_index\":0,\"text\":\"No pleural effusion.\"}\n",
            "{\"report_id\":\"r1\",\"sentence_index\":1,\"text\":\"Possible pneumonia.\"}\n",
        ),
    )
    .unwrap();
    let fixture = rules("fixture.json");
    ok(dir.path(), &["label", "--rules", &fixture, "--corpus", "c.jsonl", "--out", "l.jsonl", "--parallelism", "2"]);
    let labels: Vec<Value> = std::fs::read_to_string(dir.path().join("l.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(labels[0]["labels"]["pleural_effusion"], "negative");
    assert_eq!(labels[0]["labels"]["no_finding"], "positive");
    assert_eq!(labels[1]["labels"]["pneumonia"], "uncertain");
    assert_eq!(labels[1]["labels"]["no_finding"], "negative");

    let out = silverloop(dir.path(), &["eval", "parity", "--ref", "l.jsonl", "--pred", "l.jsonl"]);
    assert!(out.status.success());
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["parity"]["overall_match"], 1.0);
    assert_eq!(report["parity"]["n_pairs"], 28);
}

#[test]
fn data_dir_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_silverloop"))
        .env("SILVERLOOP_DATA", dir.path())
        .args(["--seed", "4", "gen-corpus", "--reports", "5", "--out", "c.jsonl", "--gold-out", "g.jsonl"])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("c.jsonl").exists());
    assert!(dir.path().join("g.jsonl").exists());
}

#[test]
fn generation_and_training_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for name in ["a", "b"] {
        let (c, g, m) = (format!("{name}.jsonl"), format!("{name}.gold.jsonl"), format!("{name}.json"));
        ok(d, &["--seed", "9", "gen-corpus", "--reports", "40", "--out", &c, "--gold-out", &g]);
        ok(d, &["--seed", "9", "train", "--corpus", &c, "--labels", &g, "--epochs", "1", "--buckets", "4096",
            "--embed-dim", "8", "--hidden-dim", "8", "--out", &m]);
    }
    let read = |n: &str| std::fs::read(d.join(n)).unwrap();
    assert_eq!(read("a.jsonl"), read("b.jsonl"));
    assert_eq!(read("a.gold.jsonl"), read("b.gold.jsonl"));
    assert_eq!(read("a.json"), read("b.json"));
    ok(d, &["--seed", "10", "gen-corpus", "--reports", "40", "--out", "c.jsonl", "--gold-out", "g.jsonl"]);
    assert_ne!(read("a.jsonl"), read("c.jsonl"));
}

#[test]
fn pipeline_reaches_parity_on_unseen_test_sentences() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let default_rules = rules("default.json");
    ok(d, &["--seed", "7", "gen-corpus", "--reports", "5000", "--out", "corpus.jsonl", "--gold-out", "gold.jsonl"]);
    let s = ok(d, &["--seed", "7", "split", "--corpus", "corpus.jsonl", "--out", "manifest.json", "--subsets-dir", "split"]);
    assert!(s["unseen_test"].as_u64().unwrap() > 0);
    ok(d, &["label", "--rules", &default_rules, "--corpus", "split/train.jsonl", "--out", "train.labels.jsonl"]);
    ok(d, &["label", "--rules", &default_rules, "--corpus", "split/test.jsonl", "--out", "test.labels.jsonl"]);
    let t = ok(d, &["--seed", "7", "train", "--corpus", "split/train.jsonl", "--labels", "train.labels.jsonl",
        "--out", "student.json"]);
    assert_eq!(t["log"].as_array().unwrap().len(), 5);
    ok(d, &["predict", "--checkpoint", "student.json", "--corpus", "split/test.jsonl", "--out", "test.pred.jsonl",
        "--probs-out", "test.probs.jsonl"]);
    let out = silverloop(d, &["eval", "parity", "--ref", "test.labels.jsonl", "--pred", "test.pred.jsonl",
        "--unseen", "manifest.json", "--corpus", "corpus.jsonl", "--baseline"]);
    assert!(out.status.success());
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    let overall = report["parity"]["overall_match"].as_f64().unwrap();
    assert!(overall >= 0.99, "unseen parity {overall}");
    assert_eq!(report["parity"]["n_sentences"].as_u64(), s["unseen_test"].as_u64());

    let text = silverloop(d, &["eval", "parity", "--ref", "test.labels.jsonl", "--pred", "test.pred.jsonl",
        "--text", "--confusion", "edema"]);
    let text = String::from_utf8_lossy(&text.stdout);
    assert!(text.contains("Edema") || text.contains("edema"), "{text}");
    ok(d, &["eval", "f1", "--ref", "test.labels.jsonl", "--pred", "test.pred.jsonl", "--out", "f1.json"]);
    assert!(d.join("f1.json").exists());
    let b = silverloop(d, &["bench", "--corpus", "split/test.jsonl", "--rules", &default_rules,
        "--checkpoint", "student.json", "--limit", "500"]);
    let b: Value = serde_json::from_slice(&b.stdout).unwrap();
    assert_eq!(b["n_sentences"], 500);
    assert!(b["student_speedup"].as_f64().unwrap() > 0.0);
}

#[test]
fn heldout_select_round_and_adjudication() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["--seed", "2", "gen-corpus", "--reports", "400", "--cue-typo-rate", "0.5", "--out", "corpus.jsonl",
        "--gold-out", "gold.jsonl"]);
    ok(d, &["--seed", "2", "split", "--corpus", "corpus.jsonl", "--out", "manifest.json", "--subsets-dir", "split"]);
    ok(d, &["label", "--corpus", "corpus.jsonl", "--out", "teacher.jsonl", "--drop-phrase", "pneumonia=infection"]);
    let bad = silverloop(d, &["label", "--corpus", "corpus.jsonl", "--out", "x.jsonl", "--drop-phrase", "edema=zzz"]);
    assert_eq!(bad.status.code(), Some(1));
    ok(d, &["--seed", "2", "train", "--corpus", "split/train.jsonl", "--labels", "teacher.jsonl", "--epochs", "2",
        "--out", "student.json"]);

    let h = ok(d, &["--seed", "2", "heldout", "--corpus", "split/test.jsonl", "--labels", "teacher.jsonl",
        "--per-cell", "2", "--out", "heldout.json", "--gold", "gold.jsonl", "--annotations", "annotations.jsonl"]);
    let n_heldout = h["items"].as_u64().unwrap();
    assert_eq!(h["gold_annotations_written"].as_u64(), Some(n_heldout));

    ok(d, &["predict", "--checkpoint", "student.json", "--corpus", "split/val.jsonl", "--out", "val.pred.jsonl",
        "--probs-out", "val.probs.jsonl"]);
    let sel = ok(d, &["select", "--corpus", "split/val.jsonl", "--probs", "val.probs.jsonl", "--k", "5",
        "--heldout", "heldout.json", "--out", "selection.json"]);
    assert!(sel["requests"].as_u64().unwrap() >= 5);

    // a round needs active_round annotations
    let out = silverloop(d, &["round", "--corpus", "corpus.jsonl", "--teacher", "teacher.jsonl", "--checkpoint",
        "student.json", "--annotations", "annotations.jsonl", "--out", "r.json", "--report-out", "r.report.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_line(&out)["kind"], "precondition");

    let r = ok(d, &["--seed", "2", "round", "--corpus", "corpus.jsonl", "--teacher", "teacher.jsonl",
        "--checkpoint", "student.json", "--annotations", "annotations.jsonl", "--rounds", "2", "--gold",
        "gold.jsonl", "--pool", "split/val.jsonl", "--k", "5", "--out", "student.r2.json", "--report-out",
        "rounds.json"]);
    let rows = r["rounds"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows[1]["sentences"].as_u64() > rows[0]["sentences"].as_u64());
    assert!(d.join("student.r2.json").exists());

    let ft = ok(d, &["fine-tune", "--checkpoint", "student.json", "--corpus", "corpus.jsonl", "--annotations",
        "annotations.jsonl", "--mix-teacher", "1.0", "--teacher", "teacher.jsonl", "--out", "student.ft.json"]);
    assert_eq!(ft["log"].as_array().unwrap().len(), 1);
    assert_eq!(ft["teacher_examples"], ft["annotated_sentences"]);

    let gold = silverloop(d, &["eval", "gold", "--annotations", "annotations.jsonl", "--teacher", "teacher.jsonl",
        "--system", "student=val.pred.jsonl"]);
    // val predictions do not cover the held-out sentences drawn from test
    assert_eq!(gold.status.code(), Some(1));
    assert_eq!(error_line(&gold)["kind"], "misaligned");

    ok(d, &["--seed", "2", "eval", "discrepancies", "--corpus", "corpus.jsonl", "--ref", "teacher.jsonl",
        "--pred", "gold.jsonl", "--per-task-cap", "3", "--out", "queue.json"]);
    let queue: Value = serde_json::from_str(&std::fs::read_to_string(d.join("queue.json")).unwrap()).unwrap();
    let first = &queue["items"][0];
    let verdict = serde_json::json!({
        "dedup_key": first["dedup_key"], "task": first["task"], "verdict": "prefer_b",
        "annotator_id": "j", "blinding_id": first["blinding_id"],
    });
    std::fs::write(d.join("verdicts.jsonl"), format!("{verdict}\n")).unwrap();
    let out = silverloop(d, &["eval", "adjudication", "--queue", "queue.json", "--verdicts", "verdicts.jsonl"]);
    assert!(out.status.success());
    let tally: Value = serde_json::from_slice(&out.stdout).unwrap();
    let t = &tally[first["task"].as_str().unwrap()];
    let side = queue["unblinding"][first["blinding_id"].as_str().unwrap()].as_str().unwrap();
    let (pref_ref, pref_pred) = if side == "reference" { (0, 1) } else { (1, 0) };
    assert_eq!(t["prefer_reference"], pref_ref);
    assert_eq!(t["prefer_prediction"], pref_pred);
}

use std::path::Path;
use std::process::{Command, Output};

fn rsg(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rsg"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = rsg(dir, args);
    assert!(out.status.success(), "rsg {args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn err(dir: &Path, args: &[&str]) -> String {
    let out = rsg(dir, args);
    assert!(!out.status.success(), "rsg {args:?} should fail");
    String::from_utf8(out.stderr).unwrap()
}

/// Synthetic corpus indexed and embedded in `dir`.
fn indexed() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["synth", "--kind", "link", "--train", "20", "--eval", "10", "--seed", "4", "-o", "c"]);
    ok(d, &["index", "c/repo", "-o", "g.rsg"]);
    ok(d, &["embed", "g.rsg", "-o", "e.tbl"]);
    dir
}

#[test]
fn index_writes_manifest_and_diagnostics() {
    let dir = indexed();
    let d = dir.path();
    assert!(d.join("g.rsg.manifest.json").exists());
    assert!(d.join("g.rsg.diagnostics.jsonl").exists());
    let manifest = std::fs::read_to_string(d.join("e.tbl.manifest.json")).unwrap();
    assert!(manifest.contains("\"graph\""));
}

#[test]
fn edited_artifact_is_rejected() {
    let dir = indexed();
    let d = dir.path();
    let mut text = std::fs::read_to_string(d.join("e.tbl")).unwrap();
    text.push('\n');
    std::fs::write(d.join("e.tbl"), text).unwrap();
    let msg = err(d, &["eval", "c/eval.jsonl", "--task", "retrieval", "--graph", "g.rsg", "--emb", "e.tbl"]);
    assert!(msg.contains("e.tbl") || msg.contains("hash"), "{msg}");
}

#[test]
fn embeddings_from_another_graph_are_rejected() {
    let dir = indexed();
    let d = dir.path();
    ok(d, &["synth", "--kind", "link", "--train", "5", "--eval", "5", "--seed", "9", "-o", "other"]);
    ok(d, &["index", "other/repo", "-o", "other.rsg"]);
    err(d, &["eval", "c/eval.jsonl", "--task", "retrieval", "--graph", "other.rsg", "--emb", "e.tbl"]);
}

#[test]
fn records_naming_another_graph_are_rejected() {
    let dir = indexed();
    let d = dir.path();
    std::fs::copy(d.join("g.rsg"), d.join("copy.rsg")).unwrap();
    std::fs::write(
        d.join("q.jsonl"),
        "{\"id\":\"a\",\"graph\":\"copy.rsg\",\"query\":\"x = 1\\n\",\"query_file\":\"app/q_0.py\",\"gold_node\":1}\n",
    )
    .unwrap();
    let msg = err(d, &["eval", "q.jsonl", "--task", "retrieval", "--graph", "g.rsg", "--emb", "e.tbl"]);
    assert!(msg.contains("refers to graph"), "{msg}");
}

#[test]
fn retrieve_emits_one_line_per_record() {
    let dir = indexed();
    let d = dir.path();
    let out = ok(d, &["retrieve", "c/eval.jsonl", "--graph", "g.rsg", "--emb", "e.tbl", "--top", "2"]);
    let lines: Vec<serde_json::Value> = out.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 10);
    for v in &lines {
        assert!(v["contexts"].as_array().unwrap().len() <= 2);
    }
}

#[test]
fn in_file_baseline_needs_the_repository() {
    let dir = indexed();
    let d = dir.path();
    let args = ["eval", "c/eval.jsonl", "--task", "completion", "--graph", "g.rsg", "--emb", "e.tbl", "--context", "in-file-only"];
    let msg = err(d, &args);
    assert!(msg.contains("--repo"), "{msg}");
    let table = ok(d, &[&args[..], &["--repo", "c/repo"]].concat());
    assert!(table.contains("context\tin-file-only"));
}

#[test]
fn top_and_budget_conflict() {
    let dir = indexed();
    err(dir.path(), &["retrieve", "c/eval.jsonl", "--graph", "g.rsg", "--emb", "e.tbl", "--top", "2", "--budget", "100"]);
}

//! End-to-end runs of the `fbrank` binary in a scratch directory.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const CONFIG: &str = r#"
corpus = "corpus.jsonl"
max_feedback_per_doc = 6

[simulation]
iterations = 3
queries_per_iteration = 12
new_per_iteration = 6
repeated_per_iteration = 6

[benchmark]
variants = ["baseline", "feedback:0.75"]

[benchmark.corpus_generator]
documents = 20
"#;

struct Workspace {
    dir: TempDir,
}

impl Workspace {
    fn new() -> Self {
        let ws = Self { dir: TempDir::new().unwrap() };
        fs::write(ws.path("config.toml"), CONFIG).unwrap();
        let out = ws.run(&["synth-corpus", "--out", "corpus.jsonl", "--documents", "10", "--seed", "3"]);
        assert!(out.status.success(), "{}", stderr(&out));
        ws
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_fbrank"))
            .current_dir(self.dir.path())
            .arg("--config")
            .arg(self.path("config.toml"))
            .args(args)
            .output()
            .unwrap()
    }

    fn ok(&self, args: &[&str]) -> Vec<Value> {
        let out = self.run(args);
        assert!(out.status.success(), "{args:?}: {}", stderr(&out));
        lines(&out)
    }

    fn docs(&self) -> Vec<Value> {
        read_jsonl(&self.path("corpus.jsonl"))
    }
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn lines(out: &Output) -> Vec<Value> {
    String::from_utf8(out.stdout.clone())
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn read_jsonl(path: &Path) -> Vec<Value> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn feedback_for(store: &[Value], doc: &str) -> Vec<String> {
    store
        .iter()
        .filter(|i| i["source"] == "feedback" && i["scope"]["id"].as_str().unwrap().starts_with(doc))
        .map(|i| i["query"].as_str().unwrap().to_string())
        .collect()
}

#[test]
fn index_is_deterministic_and_counts_indicators() {
    let ws = Workspace::new();
    let first = ws.ok(&["index"]);
    let summary = &first[0];
    let chunks = summary["chunks"].as_u64().unwrap();
    assert!(chunks >= 10);
    assert_eq!(summary["synthetic_indicators"].as_u64().unwrap(), 5 * chunks);
    assert_eq!(summary["feedback_indicators"], 0);
    let files = ["chunks.jsonl", "indicators.jsonl", "field_stats.json"];
    let before: Vec<Vec<u8>> = files.iter().map(|f| fs::read(ws.path("index").join(f)).unwrap()).collect();
    ws.ok(&["index"]);
    let after: Vec<Vec<u8>> = files.iter().map(|f| fs::read(ws.path("index").join(f)).unwrap()).collect();
    assert!(before == after, "rebuilding the index changed its bytes");
}

#[test]
fn five_star_feedback_promotes_cited_document() {
    let ws = Workspace::new();
    let docs = ws.docs();
    let target = docs.last().unwrap()["doc_id"].as_str().unwrap().to_string();
    let query = "which settings control replica failover";
    ws.ok(&["feedback", query, "--stars", "5", "--doc", &target, "--timestamp", "2024-01-01T00:00:00Z"]);
    let summary = ws.ok(&["index"]);
    assert_eq!(summary[0]["feedback_indicators"], 1);

    let out = ws.ok(&["query", query, "--k", "3"]);
    assert_eq!(out[0]["doc_id"], target.as_str());
    assert!(out[0]["vote"].as_f64().unwrap() > 0.0);
    let tail = out.last().unwrap();
    assert_eq!(tail["summary"]["results"].as_u64().unwrap() as usize, out.len() - 1);
    assert!(out.len() - 1 <= 3);
    assert_eq!(read_jsonl(&ws.path("feedback.jsonl")).len(), 1);
}

#[test]
fn feedback_cap_drops_oldest_per_document() {
    let ws = Workspace::new();
    let doc = ws.docs()[0]["doc_id"].as_str().unwrap().to_string();
    for i in 0..7 {
        let ts = format!("2024-01-01T00:00:{i:02}Z");
        ws.ok(&["feedback", &format!("question number {i}"), "--stars", "5", "--doc", &doc, "--timestamp", &ts]);
    }
    let store = read_jsonl(&ws.path("indicators.jsonl"));
    let kept = feedback_for(&store, &doc);
    assert_eq!(kept.len(), 6);
    assert!(!kept.iter().any(|q| q == "question number 0"));
    assert!(kept.iter().any(|q| q == "question number 6"));
}

#[test]
fn version_bump_evicts_stale_feedback() {
    let ws = Workspace::new();
    let mut docs = ws.docs();
    let doc = docs[2]["doc_id"].as_str().unwrap().to_string();
    ws.ok(&["feedback", "stale answer check", "--stars", "4", "--doc", &doc]);
    assert_eq!(ws.ok(&["index"])[0]["evicted"], 0);

    let v = docs[2]["version"].as_u64().unwrap();
    docs[2]["version"] = (v + 1).into();
    let body: String = docs.iter().map(|d| format!("{d}\n")).collect();
    fs::write(ws.path("corpus.jsonl"), body).unwrap();
    let summary = ws.ok(&["index"]);
    assert_eq!(summary[0]["evicted"], 1);
    assert_eq!(summary[0]["feedback_indicators"], 0);
}

#[test]
fn unknown_documents_warn_without_failing() {
    let ws = Workspace::new();
    let out = ws.run(&["feedback", "anything", "--stars", "5", "--doc", "no-such-doc"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stderr(&out).contains("no-such-doc"));
    assert_eq!(lines(&out)[0]["written"], 0);
}

#[test]
fn invalid_arguments_exit_with_usage_error() {
    let ws = Workspace::new();
    ws.ok(&["index"]);
    assert_eq!(ws.run(&["query", "x", "--k", "0"]).status.code(), Some(1));
    assert_eq!(ws.run(&["feedback", "x", "--stars", "7", "--doc", "a"]).status.code(), Some(1));
    assert_eq!(ws.run(&["feedback", "x", "--stars", "3"]).status.code(), Some(1));
    assert_eq!(ws.run(&["query", "x", "--threshold", "1.5"]).status.code(), Some(1));
}

#[test]
fn missing_files_exit_with_io_error() {
    let ws = Workspace::new();
    let out = ws.run(&["scenarios", "--history", "missing.jsonl"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("missing.jsonl"));
    assert_eq!(ws.run(&["query", "before any index"]).status.code(), Some(2));
}

#[test]
fn concurrent_index_build_is_rejected() {
    let ws = Workspace::new();
    fs::create_dir_all(ws.path("index")).unwrap();
    fs::write(ws.path("index/.lock"), "").unwrap();
    let out = ws.run(&["index"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("lock"));
    fs::remove_file(ws.path("index/.lock")).unwrap();
    ws.ok(&["index"]);
    assert!(!ws.path("index/.lock").exists());
}

#[test]
fn simulate_is_reproducible() {
    let ws = Workspace::new();
    ws.ok(&["simulate", "--run-id", "a"]);
    ws.ok(&["simulate", "--run-id", "b"]);
    let a = fs::read(ws.path("results/a/metrics.csv")).unwrap();
    let b = fs::read(ws.path("results/b/metrics.csv")).unwrap();
    assert!(!a.is_empty());
    assert!(a == b);

    let mut reader = csv::Reader::from_reader(a.as_slice());
    let configs: std::collections::BTreeSet<String> =
        reader.records().map(|r| r.unwrap()[0].to_string()).collect();
    assert_eq!(configs.into_iter().collect::<Vec<_>>(), ["Baseline", "Feedback(0.75)"]);
    let manifest: Value = serde_json::from_slice(&fs::read(ws.path("results/a/manifest.json")).unwrap()).unwrap();
    assert!(manifest.is_object());
}

#[test]
fn simulate_with_single_variant_reports_one_config() {
    let ws = Workspace::new();
    let out = ws.ok(&["simulate", "--variant", "baseline", "--iterations", "2", "--seed", "9"]);
    assert_eq!(out.len(), 2);
    assert_eq!(out[1]["summary"]["run_id"], "seed9-it2");
    let csv = fs::read_to_string(ws.path("results/seed9-it2/metrics.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.starts_with("Baseline,")));
}

#[test]
fn scenarios_write_csv() {
    let ws = Workspace::new();
    let doc = ws.docs()[1]["doc_id"].as_str().unwrap().to_string();
    let event = serde_json::json!({
        "query": "replica failover settings",
        "rewritten_intent": null,
        "star_rating": 5,
        "referenced_docs": [doc],
        "timestamp": "2024-01-01T00:00:00Z",
    });
    fs::write(ws.path("history.jsonl"), format!("{event}\n")).unwrap();
    let out = ws.ok(&["scenarios", "--history", "history.jsonl", "--variant", "feedback:0.75", "--out", "s.csv"]);
    assert!(!out.is_empty());
    let csv = fs::read_to_string(ws.path("s.csv")).unwrap();
    assert!(csv.starts_with("scenario,config,metric,k,value,queries"));
}

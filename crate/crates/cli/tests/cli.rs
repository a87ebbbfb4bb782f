//! End-to-end runs of the `a2rag` binary on the shipped fixtures.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn demo_config() -> PathBuf {
    fixture("demo").join("config.json")
}

fn a2rag(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_a2rag")).args(args).output().unwrap()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

/// Copy of the demo fixture that review runs may write next to.
fn scratch_demo() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    for f in ["config.json", "corpus.jsonl", "summaries.jsonl", "graph.jsonl", "qa.jsonl"] {
        std::fs::copy(fixture("demo").join(f), dir.path().join(f)).unwrap();
    }
    dir
}

#[test]
fn query_answered_exits_zero() {
    let cfg = demo_config();
    let o = a2rag(&["query", "--json", "-c", cfg.to_str().unwrap(), "Who was Xeno Labs founded by?"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_eq!(v["status"], "answered");
    assert!(v["answer"].as_str().unwrap().contains("Yara Quinn"));
    assert_eq!(v["evidence"][0], "xeno_founder");
    assert_eq!(v["terminated_at"], "local");
    assert!(v["cost"]["oracle_calls"]["generator"].as_u64().unwrap() >= 1);
}

#[test]
fn query_text_output() {
    let cfg = demo_config();
    let o = a2rag(&["query", "-c", cfg.to_str().unwrap(), "Who was Orbit Labs founded by?"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("status: ANSWERED\n"), "{text}");
    assert!(text.contains("evidence: orbit_founder"));
    assert!(text.contains("iteration 0: rel=1 grd=1 ans=1"));
}

#[test]
fn query_abstain_exits_three() {
    let cfg = demo_config();
    let o = a2rag(&["query", "--json", "-c", cfg.to_str().unwrap(), "What is the boiling point of mercury?"]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(json(&o)["status"], "abstain");
}

#[test]
fn query_fail_exits_four() {
    let dir = scratch_demo();
    let cfg = dir.path().join("config.json");
    let mut v: Value = serde_json::from_str(&std::fs::read_to_string(&cfg).unwrap()).unwrap();
    v["oracles"]["validator_ans"] = serde_json::json!({"kind": "reject"});
    std::fs::write(&cfg, v.to_string()).unwrap();
    let o = a2rag(&["query", "--json", "-c", cfg.to_str().unwrap(), "Who was Xeno Labs founded by?"]);
    assert_eq!(o.status.code(), Some(4));
    let v = json(&o);
    assert_eq!(v["status"], "fail");
    assert_eq!(v["trace"].as_array().unwrap().len(), 3);
}

#[test]
fn missing_config_exits_one() {
    let o = a2rag(&["query", "-c", "/nonexistent/config.json", "q"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error:"));
}

#[test]
fn validate_config_reports_counts() {
    let cfg = demo_config();
    let o = a2rag(&["validate-config", "--json", "-c", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_eq!(v["valid"], true);
    assert_eq!((v["chunks"].as_u64(), v["nodes"].as_u64(), v["edges"].as_u64()), (Some(10), Some(9), Some(9)));
    assert_eq!(v["oracles"]["generator"], "mock-extractive-generator");
}

#[test]
fn bench_summary_matches_report() {
    let cfg = demo_config();
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let o = a2rag(&["bench", "-c", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let a = &v["report"]["aggregates"];
    let row = |name: &str| {
        text.lines().find(|l| l.split_whitespace().next() == Some(name)).unwrap().split_whitespace().nth(1).unwrap().to_string()
    };
    assert_eq!(row("instances"), "4");
    assert_eq!(row("recall@2"), format!("{:.4}", a["recall_at_2"].as_f64().unwrap()));
    assert_eq!(row("stage_local"), format!("{:.4}", a["stage_fractions"]["local"].as_f64().unwrap()));
    assert!(v["stress"].is_null());
    assert_eq!(v["report"]["simulated_timing"], true);
    let records = v["report"]["records"].as_array().unwrap();
    assert_eq!(records.len(), 4);
    assert!(records.iter().enumerate().all(|(i, r)| r["index"] == i));
}

#[test]
fn ablation_lowers_recall_at_two() {
    let cfg = demo_config();
    let full = json(&a2rag(&["bench", "--json", "-c", cfg.to_str().unwrap()]));
    let ablated = json(&a2rag(&["bench", "--json", "--ablate-relations", "-c", cfg.to_str().unwrap()]));
    assert_eq!(ablated["report"]["options"]["ablate_relation_seeds"], true);
    let r = |v: &Value| v["report"]["aggregates"]["recall_at_2"].as_f64().unwrap();
    assert!(r(&full) > r(&ablated));
}

#[test]
fn zero_deletion_stress_row_matches_plain_bench() {
    let cfg = fixture("stress").join("config.json");
    let v = json(&a2rag(&["bench", "--json", "--stress", "0", "-c", cfg.to_str().unwrap()]));
    let row = &v["stress"]["rows"][0];
    assert_eq!(row["fraction"], 0.0);
    assert!(row["removed_nodes"].as_array().unwrap().is_empty());
    let records = v["report"]["records"].as_array().unwrap();
    let mean_r5 = records.iter().map(|r| r["recall_at_5"].as_f64().unwrap()).sum::<f64>() / records.len() as f64;
    assert!((row["a2rag"].as_f64().unwrap() - mean_r5).abs() < 1e-12);
}

#[test]
fn stress_subcommand_uses_default_sweep() {
    let cfg = fixture("stress").join("config.json");
    let v = json(&a2rag(&["stress", "--json", "--seed", "5", "-c", cfg.to_str().unwrap()]));
    let fractions: Vec<f64> = v["stress"]["rows"].as_array().unwrap().iter().map(|r| r["fraction"].as_f64().unwrap()).collect();
    assert_eq!(fractions, vec![0.0, 0.1, 0.2, 0.4]);
    assert_eq!(v["stress"]["spec"]["rng_seed"], 5);
    let removed = v["stress"]["rows"][3]["removed_nodes"].as_array().unwrap().len();
    assert_eq!(removed, 16);
}

#[test]
fn bad_stress_fraction_is_an_error() {
    let cfg = demo_config();
    let o = a2rag(&["bench", "--stress", "0,1.5", "-c", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

fn propose(dir: &Path) -> PathBuf {
    let cfg = dir.join("config.json");
    let props = dir.join("proposals.jsonl");
    let o = a2rag(&[
        "query",
        "-c",
        cfg.to_str().unwrap(),
        "--propose",
        props.to_str().unwrap(),
        "Who was Xeno Labs founded by?",
    ]);
    assert_eq!(o.status.code(), Some(0));
    props
}

#[test]
fn proposals_cite_verified_evidence() {
    let dir = scratch_demo();
    let props = propose(dir.path());
    let items: Vec<Value> =
        std::fs::read_to_string(&props).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert!(!items.is_empty());
    for it in &items {
        assert_eq!(it["source_chunk"], "xeno_founder");
        assert_eq!(it["decision"], "pending");
        assert_eq!(it["query"], "Who was Xeno Labs founded by?");
    }
}

#[test]
fn review_reject_all_keeps_graph() {
    let dir = scratch_demo();
    let props = propose(dir.path());
    let cfg = dir.path().join("config.json");
    let o = a2rag(&["review", "--reject-all", "--json", "-c", cfg.to_str().unwrap(), props.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_eq!(v["approved"], 0);
    assert!(v["new_graph"].is_null());
    assert!(!dir.path().join("graph.rev1.jsonl").exists());
    assert!(dir.path().join("proposals.reviewed.jsonl").exists());
}

#[test]
fn review_interactive_reads_stdin() {
    let dir = scratch_demo();
    let props = dir.path().join("proposals.jsonl");
    let item = |s: &str, o: &str| {
        serde_json::json!({
            "subject": s, "relation": "sponsors", "object": o,
            "source_chunk": "xeno_s3", "query": "q", "decision": "pending"
        })
        .to_string()
    };
    std::fs::write(&props, format!("{}\n{}\n", item("Helio Corp", "Xeno Labs"), item("Helio Corp", "Beta Cup"))).unwrap();
    let cfg = dir.path().join("config.json");
    let mut child = Command::new(env!("CARGO_BIN_EXE_a2rag"))
        .args(["review", "--json", "-c", cfg.to_str().unwrap(), props.to_str().unwrap()])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(b"what\nyes\nn\n").unwrap();
    let o = child.wait_with_output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&o);
    assert_eq!((v["approved"].as_u64(), v["rejected"].as_u64()), (Some(1), Some(1)));
    assert!(String::from_utf8_lossy(&o.stderr).contains("approve? [y/n]"));
    let new = std::fs::read_to_string(dir.path().join("graph.rev1.jsonl")).unwrap();
    assert!(new.contains(r#""source":"helio_corp","relation":"sponsors","target":"xeno_labs""#), "{new}");
    assert!(!new.contains(r#""source":"helio_corp","relation":"sponsors","target":"e_beta_cup""#));
}

#[test]
fn review_with_truncated_input_fails() {
    let dir = scratch_demo();
    let props = propose(dir.path());
    let cfg = dir.path().join("config.json");
    let o = Command::new(env!("CARGO_BIN_EXE_a2rag"))
        .args(["review", "-c", cfg.to_str().unwrap(), props.to_str().unwrap()])
        .stdin(Stdio::null())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(!dir.path().join("graph.rev1.jsonl").exists());
}

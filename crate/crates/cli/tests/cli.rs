use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn openrule(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_openrule")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A scratch directory holding a copy of the fixture config and its models,
/// so relative paths and run directories resolve inside it.
fn workspace() -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir(dir.path().join("golden")).unwrap();
    for f in ["config.json", "premises.txt", "gold.jsonl", "golden/instantiation.jsonl", "golden/applicability.jsonl"] {
        std::fs::copy(fixtures().join(f), dir.path().join(f)).unwrap();
    }
    dir
}

#[test]
fn build_corpus_matches_golden_files() {
    let out = tempfile::tempdir().unwrap();
    let run = openrule(&[
        "build-corpus",
        "--input",
        path(&fixtures().join("documents.txt")),
        "--input",
        path(&fixtures().join("documents.jsonl")),
        "--gazetteer",
        path(&fixtures().join("gazetteer.tsv")),
        "--output-dir",
        path(out.path()),
    ]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    for name in ["instantiation.jsonl", "applicability.jsonl"] {
        let got = std::fs::read(out.path().join(name)).unwrap();
        let want = std::fs::read(fixtures().join("golden").join(name)).unwrap();
        assert!(got == want, "{name} differs from golden");
    }
    let stats: serde_json::Value = serde_json::from_str(&stdout(&run)).unwrap();
    assert_eq!(stats["emitted"], 18);
}

#[test]
fn build_corpus_on_empty_input_writes_empty_files() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("empty.txt");
    std::fs::write(&input, "").unwrap();
    let run = openrule(&["build-corpus", "--input", path(&input), "--output-dir", path(&dir.path().join("out"))]);
    assert!(run.status.success());
    assert_eq!(std::fs::read_to_string(dir.path().join("out/instantiation.jsonl")).unwrap(), "");
}

#[test]
fn build_corpus_reports_missing_input() {
    let dir = tempfile::tempdir().unwrap();
    let run = openrule(&["build-corpus", "--input", "/nonexistent/docs.txt", "--output-dir", path(dir.path())]);
    assert_eq!(run.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&run.stderr).contains("/nonexistent/docs.txt"));
}

#[test]
fn induce_is_deterministic() {
    let ws = workspace();
    let config = ws.path().join("config.json");
    let premises = ws.path().join("premises.txt");
    let mut outputs = Vec::new();
    for jobs in ["1", "4"] {
        let run = openrule(&["induce", "--config", path(&config), "--premises", path(&premises), "--jobs", jobs]);
        assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
        let dir = PathBuf::from(stdout(&run).trim());
        let rules = std::fs::read(dir.join("rules.jsonl")).unwrap();
        let manifest = std::fs::read_to_string(dir.join("manifest.json")).unwrap();
        assert!(manifest.contains("\"status\": \"complete\""));
        assert!(dir.join("timings.json").exists());
        outputs.push((dir, rules, manifest));
    }
    assert_eq!(outputs[0].0, outputs[1].0);
    assert!(!outputs[0].1.is_empty());
    assert!(outputs[0].1 == outputs[1].1);
    assert!(outputs[0].2 == outputs[1].2);
}

#[test]
fn induce_writes_metrics_when_gold_is_given() {
    let ws = workspace();
    let run = openrule(&[
        "induce",
        "--config",
        path(&ws.path().join("config.json")),
        "--premises",
        path(&ws.path().join("premises.txt")),
        "--gold",
        path(&ws.path().join("gold.jsonl")),
        "--run-id",
        "with-gold",
    ]);
    assert!(run.status.success());
    let metrics: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(ws.path().join("runs/with-gold/metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics["premises"], 1);
    assert!(metrics["bleu1"].as_f64().unwrap() > 0.0);
}

#[test]
fn unreachable_scorer_fails_every_premise() {
    let ws = workspace();
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let remote = format!(r#"{{"remote": {{"base_url": "http://127.0.0.1:{port}", "timeout_ms": 500, "retries": 0}}}}"#);
    let config = format!(
        r#"{{"instantiation_scorer": {remote}, "applicability_scorer": {remote}, "sbs": {{"k": 4, "beam_groups": 2}}}}"#
    );
    std::fs::write(ws.path().join("remote.json"), config).unwrap();
    let run = openrule(&[
        "induce",
        "--config",
        path(&ws.path().join("remote.json")),
        "--premises",
        path(&ws.path().join("premises.txt")),
        "--run-id",
        "down",
    ]);
    assert_eq!(run.status.code(), Some(1));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(ws.path().join("runs/down/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["status"], "failed");
    assert_eq!(manifest["counts"]["failed"], 2);
    assert!(manifest["outcomes"][0]["error"].as_str().unwrap().contains("transport error"));
    assert_eq!(std::fs::read_to_string(ws.path().join("runs/down/rules.jsonl")).unwrap(), "");
}

#[test]
fn instantiate_prints_weighted_pairs() {
    let ws = workspace();
    let run = openrule(&["instantiate", "--config", path(&ws.path().join("config.json")), "--premise", "[X] is in [Y]."]);
    assert!(run.status.success());
    let lines: Vec<serde_json::Value> = stdout(&run).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 2);
    let total: f64 = lines.iter().map(|l| l["log_weight"].as_f64().unwrap().exp()).sum();
    assert!((total - 1.0).abs() < 1e-9);
}

fn write_rules(dir: &Path, hypotheses: &[&str]) -> PathBuf {
    let rules: String = hypotheses
        .iter()
        .map(|h| {
            serde_json::json!({"premise": "[X] founded [Y].", "hypothesis": h, "log_score": -1.0, "instantiations": []})
                .to_string()
                + "\n"
        })
        .collect();
    let path = dir.join("rules.jsonl");
    std::fs::write(&path, rules).unwrap();
    path
}

#[test]
fn evaluate_identity_and_modes() {
    let dir = tempfile::tempdir().unwrap();
    let gold = dir.path().join("gold.jsonl");
    std::fs::write(&gold, "{\"premise\":\"[X] founded [Y].\",\"hypotheses\":[\"[X] is founder of [Y].\"]}\n").unwrap();

    let rules = write_rules(dir.path(), &["[X] is founder of [Y]."]);
    let out = dir.path().join("report.json");
    let run = openrule(&["evaluate", "--gold", path(&gold), "--rules", path(&rules), "--out", path(&out)]);
    assert!(run.status.success());
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    for m in ["bleu1", "bleu2", "bleu4", "rouge_l"] {
        assert_eq!(report[m], 100.0, "{m}");
    }

    let rules = write_rules(dir.path(), &["[X] owns [Y].", "[X] is founder of [Y]."]);
    let score = |mode: &str| {
        let run = openrule(&["evaluate", "--gold", path(&gold), "--rules", path(&rules), "--mode", mode]);
        assert!(run.status.success());
        let report: serde_json::Value = serde_json::from_str(&stdout(&run)).unwrap();
        report["bleu1"].as_f64().unwrap()
    };
    assert_eq!(score("coverage"), 100.0);
    assert!(score("openrule") < 100.0);
}

#[test]
fn oracle_check_passes_on_builtin_fixture() {
    let run = openrule(&["oracle-check"]);
    assert!(run.status.success());
    assert_eq!(stdout(&run).lines().filter(|l| l.starts_with("PASS")).count(), 3);
}

#[test]
fn oracle_check_fails_on_corrupted_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let fixture = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("src/fixtures/oracle.json")).unwrap();
    let corrupted = dir.path().join("bad.json");
    std::fs::write(&corrupted, fixture.replace("-2.6995424423141987", "-2.5")).unwrap();
    let run = openrule(&["oracle-check", "--fixture", path(&corrupted)]);
    assert_eq!(run.status.code(), Some(1));
    assert!(stdout(&run).contains("FAIL oracle matches frozen values"));
    assert!(stdout(&run).contains("rank 2"));

    let run = openrule(&["oracle-check", "--max-len", "9"]);
    assert_eq!(run.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&run.stderr).contains("oracle would enumerate"));
}

#[test]
fn prepare_coverage_writes_premises_and_gold() {
    let dir = tempfile::tempdir().unwrap();
    let dataset = dir.path().join("data.jsonl");
    let lines = [
        serde_json::json!({"text": "Steve Jobs founded Apple.", "head": [0, 10], "tail": [19, 24], "relation": "<founderOf>"}),
        serde_json::json!({"text": "Bill Gates founded Microsoft.", "head": [0, 10], "tail": [19, 28], "relation": "<founderOf>"}),
        serde_json::json!({"text": "Tokyo is in Japan.", "head": [0, 5], "tail": [12, 17], "relation": "<isLocatedIn>"}),
    ];
    std::fs::write(&dataset, lines.iter().map(|l| l.to_string() + "\n").collect::<String>()).unwrap();
    let premises = dir.path().join("premises.txt");
    let gold = dir.path().join("gold.jsonl");
    let run = openrule(&[
        "prepare-coverage",
        "--dataset",
        path(&dataset),
        "--premises-out",
        path(&premises),
        "--gold-out",
        path(&gold),
    ]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert_eq!(std::fs::read_to_string(&premises).unwrap(), "[X] founded [Y].\n[X] is in [Y].\n");
    let gold = std::fs::read_to_string(&gold).unwrap();
    assert!(gold.contains("[X] is founder of [Y]."));
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(openrule(&["induce"]).status.code(), Some(2));
    assert_eq!(openrule(&["no-such-command"]).status.code(), Some(2));
}

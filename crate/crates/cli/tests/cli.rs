use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn mini_corpus() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/mini_corpus")
}

fn dexter(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dexter"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Value {
    let out = dexter(args);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8(out.stdout).unwrap();
    serde_json::from_str(stdout.lines().last().unwrap_or("null")).unwrap_or(Value::Null)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn without_timestamps(jsonl: &str) -> Vec<Value> {
    jsonl
        .lines()
        .map(|l| {
            let mut v: Value = serde_json::from_str(l).unwrap();
            v.as_object_mut().unwrap().remove("created_at");
            v
        })
        .collect()
}

#[test]
fn help_lists_every_flag() {
    let top = String::from_utf8(dexter(&["--help"]).stdout).unwrap();
    for cmd in [
        "extract",
        "label",
        "corpus",
        "describe",
        "preprocess",
        "split",
        "train",
        "eval",
        "compare",
        "cache",
    ] {
        assert!(top.contains(cmd), "missing subcommand {cmd}");
    }
    assert!(top.contains("--config"));
    let describe = String::from_utf8(dexter(&["describe", "--help"]).stdout).unwrap();
    for flag in [
        "--mode",
        "agentic-rag",
        "fusion",
        "--offline",
        "--transcript",
        "--mock-script",
        "--workers",
        "--fuzzy-threshold",
        "--config",
    ] {
        assert!(describe.contains(flag), "describe --help lacks {flag}");
    }
    let pre = String::from_utf8(dexter(&["preprocess", "--help"]).stdout).unwrap();
    assert!(pre.contains("--stopwords"));
    assert_eq!(dexter(&["--help"]).status.code(), Some(0));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(dexter(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(dexter(&["describe"]).status.code(), Some(1));
    assert_eq!(
        dexter(&["describe", "--features", "x", "-o", "y", "--mode", "solo"])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn corpus_validate_exit_codes() {
    let v = ok(&["corpus", "validate", s(&mini_corpus())]);
    assert_eq!(v["entries"], 12);
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("permissions.csv"),
        "name,description\nandroid.permission.X,\n",
    )
    .unwrap();
    for f in ["services", "receivers", "intent_actions"] {
        std::fs::write(dir.path().join(format!("{f}.csv")), "name,description\n").unwrap();
    }
    assert_eq!(dexter(&["corpus", "validate", s(dir.path())]).status.code(), Some(2));
}

#[test]
fn unscripted_offline_prompt_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let features = dir.path().join("f.jsonl");
    ok(&["extract", s(&fixtures().join("apks")), "-o", s(&features)]);
    let out = dexter(&[
        "describe",
        "--mode",
        "agentic-rag",
        "--offline",
        "--mock-script",
        s(&fixtures().join("mock/unscripted.json")),
        "--features",
        s(&features),
        "-o",
        s(&dir.path().join("d.jsonl")),
        "--corpus",
        s(&mini_corpus()),
        "--cache",
        s(&dir.path().join("cache.jsonl")),
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn missing_corpus_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let features = dir.path().join("f.jsonl");
    std::fs::write(&features, "{\"apk_id\":\"a\",\"permissions\":[\"X\"]}\n").unwrap();
    let out = dexter(&[
        "describe",
        "--offline",
        "--features",
        s(&features),
        "-o",
        s(&dir.path().join("d.jsonl")),
        "--corpus",
        s(&dir.path().join("nowhere")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn labels_from_report_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("labels.jsonl");
    let v = ok(&["label", "--reports", s(&fixtures().join("vt_reports")), "-o", s(&out)]);
    assert_eq!((v["labeled"].as_u64(), v["malicious"].as_u64()), (Some(3), Some(1)));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.contains(
        "\"apk_id\":\"fb04dcb6970e4c3d1873de51fd5a50d7bb46b3383113602665c350ec40b5f990\",\"label\":\"malicious\""
    ));
}

#[test]
fn compare_prints_table() {
    let out = dexter(&[
        "compare",
        s(&fixtures().join("reports/agentic_rag.json")),
        s(&fixtures().join("reports/gemini_fusion.json")),
        "--label-a",
        "AgenticRAG",
        "--label-b",
        "Gemini Fusion",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let table = String::from_utf8(out.stdout).unwrap();
    let accuracy = table.lines().find(|l| l.starts_with("accuracy")).unwrap();
    assert!(accuracy.ends_with("+1.53"), "{table}");
    assert!(table.lines().next().unwrap().contains("Gemini Fusion"));
}

#[test]
fn cache_stats_requires_an_existing_file() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        dexter(&["cache", "stats", s(&dir.path().join("none.jsonl"))])
            .status
            .code(),
        Some(2)
    );
    let file = dir.path().join("c.jsonl");
    std::fs::write(
        &file,
        "{\"category\":\"permission\",\"name\":\"A\",\"description\":\"d\",\"source\":\"llm\",\"created_at\":1}\nnot json\n",
    )
    .unwrap();
    let v = ok(&["cache", "stats", s(&file)]);
    assert_eq!(v["entries"], 1);
    assert_eq!(v["corrupt_lines"], serde_json::json!([2]));
}

#[test]
fn config_file_sets_threshold_and_flags_override_it() {
    let dir = tempfile::tempdir().unwrap();
    let features = dir.path().join("f.jsonl");
    std::fs::write(
        &features,
        "{\"apk_id\":\"a\",\"intent_actions\":[\"android.intent.action.PACKAGE_ADD\"]}\n",
    )
    .unwrap();
    let cfg = dir.path().join("dexter.toml");
    std::fs::write(
        &cfg,
        format!(
            "[paths]\ncorpus_dir = {:?}\ncache_file = {:?}\n\n[matcher]\nfuzzy_threshold = 0.99\n",
            s(&mini_corpus()),
            s(&dir.path().join("cache.jsonl"))
        ),
    )
    .unwrap();
    let script = s(&fixtures().join("mock/offline.json")).to_owned();
    let run = |extra: &[&str], out: &str| {
        let mut args = vec![
            "describe",
            "--config",
            s(&cfg),
            "--offline",
            "--mock-script",
            &script,
            "--features",
            s(&features),
            "-o",
            out,
        ];
        args.extend_from_slice(extra);
        ok(&args)
    };
    let strict = run(
        &["--cache", s(&dir.path().join("c1.jsonl"))],
        s(&dir.path().join("d1.jsonl")),
    );
    assert_eq!(strict["sources"]["llm"], 1);
    let loose = run(
        &["--fuzzy-threshold", "0.65", "--cache", s(&dir.path().join("c2.jsonl"))],
        s(&dir.path().join("d2.jsonl")),
    );
    assert_eq!(loose["sources"]["corpus"], 1);
    std::fs::write(&cfg, "[matcher]\nthreshold = 1\n").unwrap();
    assert_eq!(
        dexter(&["cache", "stats", "--config", s(&cfg), "x"]).status.code(),
        Some(2)
    );
}

#[test]
fn logs_are_json_lines_with_stage_and_apk_id() {
    let dir = tempfile::tempdir().unwrap();
    let out = dexter(&[
        "extract",
        s(&fixtures().join("apks")),
        "-o",
        s(&dir.path().join("f.jsonl")),
    ]);
    let stderr = String::from_utf8(out.stderr).unwrap();
    let events: Vec<Value> = stderr
        .lines()
        .map(|l| serde_json::from_str(l).expect("log line is JSON"))
        .collect();
    let per_apk: Vec<&Value> = events.iter().filter(|e| e["fields"]["apk_id"].is_string()).collect();
    assert_eq!(per_apk.len(), 6);
    assert!(per_apk
        .iter()
        .all(|e| e["fields"]["stage"] == "extract" && e["fields"]["elapsed_ms"].is_u64()));
}

#[test]
fn smoke_pipeline_is_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name);
    let smoke = fixtures().join("smoke");
    let echo = fixtures().join("mock/echo.json");

    for round in 0..2 {
        let r = |name: &str| p(&format!("{round}-{name}"));
        ok(&[
            "extract",
            s(&smoke.join("features.jsonl")),
            "-o",
            s(&r("features.jsonl")),
        ]);
        let d = ok(&[
            "describe",
            "--offline",
            "--mock-script",
            s(&echo),
            "--workers",
            "3",
            "--features",
            s(&r("features.jsonl")),
            "-o",
            s(&r("descriptions.jsonl")),
            "--corpus",
            s(&mini_corpus()),
            "--cache",
            s(&r("cache.jsonl")),
        ]);
        assert_eq!(d["apks"], 30);
        ok(&[
            "preprocess",
            "--input",
            s(&r("descriptions.jsonl")),
            "-o",
            s(&r("texts.jsonl")),
        ]);
        ok(&[
            "split",
            "--labels",
            s(&smoke.join("labels.jsonl")),
            "-o",
            s(&r("split.json")),
            "--seed",
            "5",
        ]);
        ok(&[
            "train",
            "--split",
            s(&r("split.json")),
            "--texts",
            s(&r("texts.jsonl")),
            "-o",
            s(&r("model.json")),
        ]);
        let m = ok(&[
            "eval",
            "--split",
            s(&r("split.json")),
            "--texts",
            s(&r("texts.jsonl")),
            "--model",
            s(&r("model.json")),
            "--out-dir",
            s(&r("eval")),
        ]);
        assert!(m["accuracy"].is_f64());
        assert!(r("eval/metrics.json").is_file());
        assert!(r("eval/confusion.csv").is_file());
    }
    let read = |round: usize, name: &str| std::fs::read_to_string(p(&format!("{round}-{name}"))).unwrap();
    for name in [
        "features.jsonl",
        "texts.jsonl",
        "split.json",
        "model.json",
        "eval/metrics.json",
        "eval/confusion.csv",
    ] {
        assert_eq!(read(0, name), read(1, name), "{name} differs between runs");
    }
    assert_eq!(
        without_timestamps(&read(0, "descriptions.jsonl")),
        without_timestamps(&read(1, "descriptions.jsonl"))
    );
}

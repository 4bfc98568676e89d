use std::io::Write;
use std::process::{Command, Output, Stdio};

use serde_json::Value;

fn viso(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_viso"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stdout_lines(out: &Output) -> Vec<Value> {
    String::from_utf8_lossy(&out.stdout)
        .lines()
        .filter(|l| l.starts_with('{'))
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn exit_codes() {
    assert_eq!(viso(&["--help"]).status.code(), Some(0));
    assert_eq!(viso(&["--version"]).status.code(), Some(0));
    assert_eq!(viso(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(viso(&["predict", "--text", "x"]).status.code(), Some(1));
    let missing = viso(&["predict", "--model", "/nonexistent/model.bin", "--text", "x"]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("error:"));
}

#[test]
fn normalize_and_segment_text() {
    let out = viso(&["normalize", "--text", "Vuiiii  QUÁ https://x.y/z"]);
    assert!(out.status.success());
    assert_eq!(stdout_lines(&out)[0]["text"], "vui qúa");

    let out = viso(&["segment", "--text", "ko đc đâu"]);
    assert!(out.status.success());
    let tokens = &stdout_lines(&out)[0]["tokens"];
    let tokens: Vec<&str> = tokens.as_array().unwrap().iter().map(|t| t.as_str().unwrap()).collect();
    assert!(tokens.contains(&"không"), "{tokens:?}");
    assert!(tokens.contains(&"được"), "{tokens:?}");
}

#[test]
fn predict_with_fixture_model_reads_stdin() {
    let mut child = Command::new(env!("CARGO_BIN_EXE_viso"))
        .args(["predict", "--fixture-model", "--input", "-", "--plain"])
        .env("RUST_LOG", "warn")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all("vkl.\nBài hát hayyy, cảm ơn bạn\n".as_bytes())
        .unwrap();
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success());
    let rows = stdout_lines(&out);
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0]["id"], "1");
    assert_eq!(rows[0]["label"], "OFFENSIVE");
    assert_eq!(rows[1]["label"], "CLEAN");
    let probs = rows[0]["probs"].as_array().unwrap();
    let sum: f64 = probs.iter().map(|p| p.as_f64().unwrap()).sum();
    assert!((sum - 1.0).abs() < 1e-5);
}

#[test]
fn bench_reports_throughput() {
    let out = viso(&["bench", "--n", "2000", "--batch-interval-ms", "20"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = stdout_lines(&out).pop().unwrap();
    assert_eq!(report["rows"], 2000);
    assert_eq!(report["dead_letters"], 0);
    assert!(report["comments_per_s"].as_f64().unwrap() > 0.0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("comments/s"));
}

#[test]
fn baseline_fit_and_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("train.jsonl");
    let mut f = std::fs::File::create(&data).unwrap();
    let rows = [
        ("hay", "CLEAN"),
        ("đẹp", "CLEAN"),
        ("ngu", "OFFENSIVE"),
        ("vl", "OFFENSIVE"),
        ("cút", "HATE"),
        ("giết", "HATE"),
    ];
    for i in 0..30 {
        let (w, l) = rows[i % rows.len()];
        writeln!(f, "{}", serde_json::json!({"id": format!("r{i}"), "tokens": [w, "bài"], "label": l})).unwrap();
    }
    drop(f);
    let model = dir.path().join("mnb.json");
    let fit = viso(&["baseline", "fit", "--data", data.to_str().unwrap(), "--out", model.to_str().unwrap()]);
    assert!(fit.status.success(), "{}", String::from_utf8_lossy(&fit.stderr));
    let eval = viso(&["baseline", "eval", "--model", model.to_str().unwrap(), "--data", data.to_str().unwrap()]);
    assert!(eval.status.success());
    let report: Value = serde_json::from_slice(&eval.stdout).unwrap();
    assert_eq!(report["accuracy"], 1.0, "{report}");
}

#[test]
fn segment_reads_labeled_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("train.csv");
    std::fs::write(&csv, "free_text,label_id\n\"ko đc, bạn ơi\",0\nvkl.,1\n").unwrap();
    let out = viso(&["segment", "--labeled", "--input", csv.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = stdout_lines(&out);
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0]["id"], "1");
    assert_eq!(rows[0]["label"], "CLEAN");
    assert_eq!(rows[1]["label"], "OFFENSIVE");
}

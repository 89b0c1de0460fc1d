//! End-to-end runs of the `synthdetect` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_synthdetect"));
    cmd.env_remove("SYNTHDETECT_ADAPTERS").env("RUST_LOG", "warn");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn path_arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn small_config(dir: &Path, extra_plan: Vec<Value>) -> PathBuf {
    let mut plan = vec![
        json!({"label": "generate/gpt2/gpt2-medium", "adapter": "mock:markov", "count": 40}),
        json!({"label": "paraphrase/spinbot/spinbot", "adapter": "mock:dictionary", "count": 40}),
        json!({"label": "translate/opus/opus-es-en", "adapter": "mock:shuffle", "count": 40}),
        json!({"label": "real/real/real", "adapter": "corpus", "count": 400}),
    ];
    plan.extend(extra_plan);
    let cfg = json!({
        "seed": 3,
        "corpus": {"mock_documents": 300},
        "build": {"plan": plan},
        "detector": {"train": {"epochs": 8}},
        "ood": {"mock_pairs": 60}
    });
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path
}

fn build(config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["build", "--config", path_arg(config), "--output-dir", path_arg(out)];
    args.extend_from_slice(extra);
    run(&args)
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn build_is_reproducible_and_independent_of_workers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), vec![]);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let c = dir.path().join("c");
    assert_ok(&build(&cfg, &a, &["--workers", "1"]));
    assert_ok(&build(&cfg, &b, &["--workers", "1"]));
    assert_ok(&build(&cfg, &c, &["--workers", "8"]));
    for file in ["dataset.jsonl", "dataset.csv"] {
        let x = std::fs::read(a.join(file)).unwrap();
        assert_eq!(x, std::fs::read(b.join(file)).unwrap(), "{file}");
        assert_eq!(x, std::fs::read(c.join(file)).unwrap(), "{file}");
    }
    let lines = std::fs::read_to_string(a.join("dataset.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 520);

    let manifest: Value =
        serde_json::from_str(&std::fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "build");
    assert_eq!(manifest["seed"], 3);
    let outputs = manifest["outputs"].as_object().unwrap();
    assert!(outputs
        .iter()
        .any(|(path, sha)| path.ends_with("dataset.jsonl") && sha.as_str().unwrap().len() == 64));
}

#[test]
fn seed_flag_changes_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), vec![]);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_ok(&build(&cfg, &a, &[]));
    assert_ok(&build(&cfg, &b, &["--seed", "4"]));
    assert_ne!(
        std::fs::read(a.join("dataset.jsonl")).unwrap(),
        std::fs::read(b.join("dataset.jsonl")).unwrap()
    );
}

#[test]
fn train_eval_ablate_ood_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), vec![]);
    let out = dir.path().join("run");
    let o = path_arg(&out);
    let c = path_arg(&cfg);
    assert_ok(&build(&cfg, &out, &[]));
    let dataset = out.join("dataset.jsonl");
    let d = path_arg(&dataset);

    assert_ok(&run(&["train", "--config", c, "--output-dir", o, "--dataset", d]));
    let model = out.join("model.json");
    assert!(model.exists());
    let bundle: Value = serde_json::from_str(&std::fs::read_to_string(&model).unwrap()).unwrap();
    assert_eq!(bundle["format"], "synthdetect-model");

    let eval = run(&["eval", "--config", c, "--output-dir", o, "--dataset", d, "--model", path_arg(&model)]);
    assert_ok(&eval);
    let report: Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("eval_report.json")).unwrap()).unwrap();
    let micro = report["multiclass"]["micro_f1"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&micro));
    assert!(report["binary"]["positive"]["f1"].is_number());
    assert!(out.join("predictions.jsonl").exists());

    assert_ok(&run(&["ablate", "--config", c, "--output-dir", o, "--dataset", d, "--hold-out", "gpt2-medium"]));
    let ablation: Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("ablation.json")).unwrap()).unwrap();
    let rows = ablation["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0]["name"], "all");
    assert_eq!(rows[1]["name"], "-gpt2-medium");

    assert_ok(&run(&["ood", "--config", c, "--output-dir", o, "--model", path_arg(&model)]));
    let ood = std::fs::read_to_string(out.join("ood_dataset.jsonl")).unwrap();
    assert_eq!(ood.lines().count(), 120);

    let report = run(&["report", "--config", c, "--output-dir", o, "--dataset", d]);
    assert_ok(&report);
    let table = String::from_utf8_lossy(&report.stdout);
    assert!(table.contains("gpt2-medium"), "{table}");
}

#[test]
fn eval_from_prediction_file() {
    let dir = tempfile::tempdir().unwrap();
    let rows = [
        ("a", "real/real/real", "real", 0.9),
        ("b", "real/real/real", "generate", 0.6),
        ("c", "generate/gpt2/distilgpt2", "generate", 0.8),
        ("d", "paraphrase/spinbot/spinbot", "paraphrase", 0.7),
        ("e", "translate/opus/opus-es-en", "real", 0.55),
    ];
    let dataset = dir.path().join("dataset.jsonl");
    let preds = dir.path().join("preds.jsonl");
    let lines = |f: &dyn Fn(&(&str, &str, &str, f64)) -> Value| -> String {
        rows.iter().map(|r| f(r).to_string() + "\n").collect()
    };
    std::fs::write(
        &dataset,
        lines(&|(id, label, _, _)| json!({"id": id, "text": "some text", "label": label, "split": "test"})),
    )
    .unwrap();
    std::fs::write(
        &preds,
        lines(&|(id, label, p, c)| json!({"id": id, "gold": label, "predicted": p, "confidence": c})),
    )
    .unwrap();
    let out = dir.path().join("out");
    let res = run(&[
        "eval", "--dataset", path_arg(&dataset), "--predictions", path_arg(&preds), "--output-dir", path_arg(&out),
    ]);
    assert_ok(&res);
    let report: Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("eval_report.json")).unwrap()).unwrap();
    assert_eq!(report["multiclass"]["instances"], 5);
    assert!((report["multiclass"]["micro_f1"].as_f64().unwrap() - 0.6).abs() < 1e-9);
    // binary: gold h h m m m, predicted h m m m h
    let pos = &report["binary"]["positive"];
    assert!((pos["precision"].as_f64().unwrap() - 2.0 / 3.0).abs() < 1e-9, "{pos}");
    assert!((pos["recall"].as_f64().unwrap() - 2.0 / 3.0).abs() < 1e-9, "{pos}");
    let stdout = String::from_utf8_lossy(&res.stdout);
    assert!(stdout.contains("\"binary\"") && stdout.contains("machine"), "{stdout}");
}

#[test]
fn http_endpoint_from_adapters_file() {
    use axum::routing::{get, post};
    use axum::{Json, Router};

    async fn paraphrase(Json(body): Json<Value>) -> Json<Value> {
        let text = body["text"].as_str().unwrap_or_default();
        let rewritten: Vec<String> = text
            .split_whitespace()
            .map(|w| format!("{}{}", w.chars().rev().collect::<String>(), "x"))
            .collect();
        Json(json!({"text": rewritten.join(" ")}))
    }
    async fn health() -> Json<Value> {
        Json(json!({"status": "ok", "model_name": "reverser"}))
    }
    let runtime = tokio::runtime::Runtime::new().unwrap();
    let listener = runtime.block_on(tokio::net::TcpListener::bind("127.0.0.1:0")).unwrap();
    let addr = listener.local_addr().unwrap();
    let app = Router::new()
        .route("/v1/paraphrase", post(paraphrase))
        .route("/v1/health", get(health));
    runtime.spawn(async move { axum::serve(listener, app).await.unwrap() });

    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(
        dir.path(),
        vec![json!({"label": "paraphrase/pegasus/pegasus-xsum-finetuned-paws", "adapter": "remote", "count": 25})],
    );
    let adapters = dir.path().join("adapters.json");
    let endpoints = json!({"adapters": [{
        "id": "remote", "kind": "paraphrase", "base_url": format!("http://{addr}"),
        "model_name": "reverser", "family": "test"
    }]});
    std::fs::write(&adapters, endpoints.to_string()).unwrap();
    let out = dir.path().join("out");
    let res = bin()
        .args(["build", "--config", path_arg(&cfg), "--output-dir", path_arg(&out)])
        .env("SYNTHDETECT_ADAPTERS", &adapters)
        .output()
        .unwrap();
    assert_ok(&res);
    let text = std::fs::read_to_string(out.join("dataset.jsonl")).unwrap();
    let remote: Vec<Value> = text
        .lines()
        .map(|l| serde_json::from_str::<Value>(l).unwrap())
        .filter(|r| r["provenance"]["adapter"] == "remote")
        .collect();
    assert_eq!(remote.len(), 25);
    assert!(remote.iter().all(|r| r["provenance"]["model_name"] == "reverser"));
}

#[test]
fn unreachable_http_endpoint_fails_the_build() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(
        dir.path(),
        vec![json!({"label": "paraphrase/pegasus/pegasus-xsum-finetuned-paws", "adapter": "remote", "count": 5})],
    );
    let adapters = dir.path().join("adapters.json");
    std::fs::write(
        &adapters,
        json!([{"id": "remote", "kind": "paraphrase", "base_url": "http://127.0.0.1:9",
                "model_name": "m", "family": "f", "max_retries": 0, "timeout_secs": 2}])
        .to_string(),
    )
    .unwrap();
    let out = dir.path().join("out");
    let res = run(&[
        "build", "--config", path_arg(&cfg), "--adapters", path_arg(&adapters), "--output-dir", path_arg(&out),
    ]);
    assert_eq!(res.status.code(), Some(1), "{}", String::from_utf8_lossy(&res.stderr));
    assert!(String::from_utf8_lossy(&res.stderr).contains("remote"));
}

#[test]
fn mock_flag_replaces_http_endpoints() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(
        dir.path(),
        vec![json!({"label": "paraphrase/pegasus/pegasus-xsum-finetuned-paws", "adapter": "remote", "count": 5})],
    );
    let adapters = dir.path().join("adapters.json");
    std::fs::write(
        &adapters,
        json!([{"id": "remote", "kind": "paraphrase", "base_url": "http://127.0.0.1:9",
                "model_name": "m", "family": "f"}])
        .to_string(),
    )
    .unwrap();
    let out = dir.path().join("out");
    let res = run(&[
        "build", "--mock", "--config", path_arg(&cfg), "--adapters", path_arg(&adapters), "--output-dir",
        path_arg(&out),
    ]);
    assert_ok(&res);
}

#[test]
fn exit_codes_for_user_errors() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
    assert_eq!(run(&["build", "--config", "/nonexistent/config.json"]).status.code(), Some(1));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(
        &bad,
        json!({"split": {"train_fraction": 0.9, "validation_fraction": 0.2, "test_fraction": 0.1},
               "detector": {"train": {"epochs": 0}}})
        .to_string(),
    )
    .unwrap();
    let res = run(&["validate", "--config", path_arg(&bad)]);
    assert_eq!(res.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&res.stderr);
    assert!(stderr.contains("train_fraction") && stderr.contains("epochs"), "{stderr}");

    let res = run(&["validate", "--set", "detector.train.epochs=0"]);
    assert_eq!(res.status.code(), Some(1));
    let res = run(&["validate"]);
    assert_ok(&res);

    let missing = run(&["train", "--dataset", "/nonexistent.jsonl", "--output-dir", path_arg(dir.path())]);
    assert_eq!(missing.status.code(), Some(1));
}

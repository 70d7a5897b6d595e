use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn licon(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_licon"))
        .args(args)
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = licon(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn jsonl(path: &Path) -> Vec<Value> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn keys(v: &Value) -> Vec<&str> {
    let mut k: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
    k.sort();
    k
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Generates a small dataset and trains once; returns (data dir, run dir).
fn setup(tmp: &Path) -> (std::path::PathBuf, std::path::PathBuf) {
    let data = tmp.join("data");
    let run = tmp.join("run");
    ok(&["generate", "--worlds", "10", "--out", s(&data)]);
    ok(&[
        "train-toy",
        "--data",
        s(&data),
        "--epochs",
        "5",
        "--out",
        s(&run),
    ]);
    (data, run)
}

#[test]
fn generate_writes_documented_files() {
    let tmp = tempfile::tempdir().unwrap();
    let (data, _) = setup(tmp.path());
    let props = jsonl(&data.join("propositions.jsonl"));
    assert_eq!(props.len(), 80);
    assert_eq!(keys(&props[0]), ["answer", "id", "image_id", "question"]);
    let rels = jsonl(&data.join("relations.jsonl"));
    assert_eq!(keys(&rels[0]), ["image_id", "kind", "prop_i", "prop_j"]);
    let kinds = ["forward", "backward", "equivalent", "unrelated"];
    assert!(rels
        .iter()
        .all(|r| kinds.contains(&r["kind"].as_str().unwrap())));
    let worlds = jsonl(&data.join("worlds.jsonl"));
    assert_eq!(worlds[0]["attributes"].as_array().unwrap().len(), 12);
    let queries = jsonl(&data.join("queries.jsonl"));
    assert_eq!(
        keys(&queries[0]),
        ["formula", "id", "image_id", "surface_text"]
    );
    let manifest: Value =
        serde_json::from_str(&std::fs::read_to_string(data.join("dataset.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["n_worlds"], 10);
}

#[test]
fn train_toy_writes_metrics_and_predictions() {
    let tmp = tempfile::tempdir().unwrap();
    let (_, run) = setup(tmp.path());
    let metrics: Value =
        serde_json::from_str(&std::fs::read_to_string(run.join("metrics.json")).unwrap()).unwrap();
    let epochs = metrics["epochs"].as_array().unwrap();
    assert_eq!(epochs.len(), 5);
    assert_eq!(
        keys(&epochs[0]),
        ["accuracy", "consistency", "epoch", "train_loss"]
    );
    assert!(metrics["final_report"]["consistency"].is_f64());
    let preds = jsonl(&run.join("predictions.jsonl"));
    // 2 of 10 worlds held out, 8 queries each.
    assert_eq!(preds.len(), 16);
    assert_eq!(
        keys(&preds[0]),
        ["image_id", "predicted_answer", "probability", "prop_id"]
    );
    for p in &preds {
        let prob = p["probability"].as_f64().unwrap();
        assert!((0.5..=1.0).contains(&prob));
        assert!(["yes", "no"].contains(&p["predicted_answer"].as_str().unwrap()));
    }
}

#[test]
fn score_and_flip_read_held_out_predictions() {
    let tmp = tempfile::tempdir().unwrap();
    let (data, run) = setup(tmp.path());
    let props = data.join("propositions.jsonl");
    let rels = data.join("relations.jsonl");
    let preds = run.join("predictions.jsonl");
    let report = tmp.path().join("report.json");
    let out = ok(&[
        "score",
        "--propositions",
        s(&props),
        "--relations",
        s(&rels),
        "--predictions",
        s(&preds),
        "--out",
        s(&report),
    ]);
    assert!(out.contains("consistency"));
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let c = r["consistency"].as_f64().unwrap();
    let (i, n) = (
        r["inconsistencies"].as_u64().unwrap(),
        r["total_arrows"].as_u64().unwrap(),
    );
    assert!((c - (1.0 - i as f64 / n as f64)).abs() < 1e-12);
    assert_eq!(r["inconsistent_pairs"].as_array().unwrap().len() as u64, i);

    let flipped = tmp.path().join("flipped.jsonl");
    ok(&[
        "flip",
        "--propositions",
        s(&props),
        "--relations",
        s(&rels),
        "--predictions",
        s(&preds),
        "--strategy",
        "second",
        "--out",
        s(&flipped),
    ]);
    assert_eq!(jsonl(&flipped).len(), jsonl(&preds).len());
    let again = tmp.path().join("again.json");
    ok(&[
        "score",
        "--propositions",
        s(&props),
        "--relations",
        s(&rels),
        "--predictions",
        s(&flipped),
        "--out",
        s(&again),
    ]);
    let r2: Value = serde_json::from_str(&std::fs::read_to_string(&again).unwrap()).unwrap();
    assert_eq!(r2["inconsistencies"], 0);
}

#[test]
fn sweep_writes_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let (data, _) = setup(tmp.path());
    let csv = tmp.path().join("sweep.csv");
    let summary = tmp.path().join("summary.csv");
    ok(&[
        "sweep",
        "--data",
        s(&data),
        "--lambdas",
        "0,0.5",
        "--seeds",
        "1,2,3",
        "--epochs",
        "3",
        "--out-csv",
        s(&csv),
        "--summary-csv",
        s(&summary),
    ]);
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "lambda,seed,accuracy,consistency");
    assert_eq!(lines.len(), 7);
    assert!(lines[1].starts_with("0.0,1,"));
    let text = std::fs::read_to_string(&summary).unwrap();
    assert!(
        text.starts_with("lambda,runs,accuracy_mean,accuracy_std,consistency_mean,consistency_std")
    );
    // Too few seeds is refused.
    assert!(!licon(&[
        "sweep",
        "--data",
        s(&data),
        "--seeds",
        "1,2",
        "--out-csv",
        s(&csv)
    ])
    .status
    .success());
}

#[test]
fn loss_eval_prints_values() {
    let out = ok(&["loss-eval", "--pi1", "0.5", "--pi2", "0.5"]);
    assert!(out.contains("cons_loss=0.693147180560"), "{out}");
    assert!(out.contains("grad_pi1=1.693147180560"), "{out}");
    assert!(!licon(&["loss-eval", "--pi1", "1.5", "--pi2", "0.5"])
        .status
        .success());
}

#[test]
fn convert_splits_output_and_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("in.jsonl");
    std::fs::write(
        &input,
        concat!(
            "{\"id\":\"q1\",\"image_id\":\"i\",\"question\":\"Is it winter?\",\"answer\":\"yes\"}\n",
            "{\"id\":\"q2\",\"image_id\":\"i\",\"question\":\"Is it winter?\",\"answer\":\"no\"}\n",
            "{\"id\":\"q3\",\"image_id\":\"i\",\"question\":\"What is it?\",\"answer\":\"snow\"}\n",
        ),
    )
    .unwrap();
    let out = tmp.path().join("out.jsonl");
    ok(&["convert", "--input", s(&input), "--out", s(&out)]);
    let rows = jsonl(&out);
    assert_eq!(rows.len(), 2);
    assert_eq!(keys(&rows[0]), ["id", "proposition_text"]);
    assert_eq!(rows[0]["proposition_text"], "It is winter.");
    assert_eq!(rows[1]["proposition_text"], "It is not winter.");
    let errors = jsonl(&tmp.path().join("out.jsonl.errors.jsonl"));
    assert_eq!(errors.len(), 1);
    assert_eq!(errors[0]["id"], "q3");
}

#[test]
fn malformed_input_fails_with_line_number() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("bad.jsonl");
    std::fs::write(
        &input,
        "{\"id\":\"q1\",\"image_id\":\"i\",\"question\":\"Is it?\",\"answer\":\"yes\"}\nnot json\n",
    )
    .unwrap();
    let out = licon(&[
        "convert",
        "--input",
        s(&input),
        "--out",
        s(&tmp.path().join("o.jsonl")),
    ]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.jsonl:2:"), "{err}");
}

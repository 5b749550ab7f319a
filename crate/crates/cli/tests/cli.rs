use std::path::Path;
use std::process::{Command, Output};

fn bench(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_seen-bench"))
        .arg("--out")
        .arg(out)
        .args(args)
        .env_remove("SEEN_BENCH_OUT")
        .output()
        .expect("spawn seen-bench")
}

fn ok(out: &Path, args: &[&str]) -> String {
    let o = bench(out, args);
    assert!(
        o.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    String::from_utf8(o.stdout).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

#[test]
fn pipeline_writes_artifacts_with_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let sel = ["--dataset", "tree-grid", "--seeds", "0..4"];

    ok(out, &["generate", "--dataset", "tree-grid", "--seed", "0"]);
    let data = json(&out.join("data/tree-grid-d0.json"));
    assert_eq!(data["provenance"]["command"], "generate");

    ok(out, &[&["train", "--epochs", "200"][..], &sel[..]].concat()[..]);
    let model = json(&out.join("models/tree-grid-d0-m3.json"));
    assert_eq!(model["train_config"]["epochs"], 200);
    let digest = model["provenance"]["inputs"][0]["sha256"].as_str().unwrap();
    assert_eq!(digest.len(), 64);

    ok(out, &[&["scan"][..], &sel[..], &["--explainer", "gradinput"]].concat()[..]);
    let csv = std::fs::read_to_string(out.join("scans/tree-grid-gradinput.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "dataset,explainer,alpha,beta,seed,mean_auc,n_targets,n_skipped"
    );
    assert_eq!(lines.count(), 20 * 5);
    assert!(out.join("scans/tree-grid-gradinput.csv.provenance.json").exists());
    let heat = std::fs::read_to_string(out.join("scans/tree-grid-gradinput.heatmap.csv")).unwrap();
    assert_eq!(heat.lines().count(), 6);

    ok(out, &[&["report"][..], &sel[..], &["--explainer", "gradinput"]].concat()[..]);
    let summary = json(&out.join("report/summary.json"));
    let row = &summary["rows"][0];
    assert_eq!(row["dataset"], "tree-grid");
    assert_eq!(row["seeds"].as_array().unwrap().len(), 5);
    assert!(row["p_t"].is_f64());
    assert!(row["seen_auc"].as_f64().unwrap() >= row["base_auc"].as_f64().unwrap());

    let seen = ok(
        out,
        &[
            "seen", "--dataset", "tree-grid", "--explainer", "sa", "--seed", "1", "--node", "600",
            "--alpha", "0.5", "--beta", "0.25",
        ],
    );
    assert!(seen.contains("assistants"));
    let e = json(&out.join("explanations/tree-grid-sa-m1-v600-seen-a0.5-b0.25.json"));
    assert_eq!(e["explanation"]["target"], 600);
    assert!(!e["ranking"]["entries"].as_array().unwrap().is_empty());
}

#[test]
fn report_without_enough_seeds_omits_p_values() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let sel = ["--dataset", "ba-shapes", "--explainer", "sa", "--seeds", "0,1"];
    ok(out, &["generate", "--dataset", "ba-shapes"]);
    ok(out, &[&["train", "--epochs", "50"][..], &sel[..]].concat()[..]);
    ok(out, &[&["scan"][..], &sel[..]].concat()[..]);
    ok(out, &[&["report"][..], &sel[..]].concat()[..]);
    let row = &json(&out.join("report/summary.json"))["rows"][0];
    assert!(row["p_t"].is_null());
    assert!(row["note"].is_string());
}

#[test]
fn invalid_beta_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = bench(
        dir.path(),
        &["seen", "--dataset", "tree-cycles", "--explainer", "sa", "--node", "0", "--beta", "1.5"],
    );
    assert_eq!(code(&o), 2);
    let o = bench(dir.path(), &["scan", "--betas", "0,1.5"]);
    assert_eq!(code(&o), 2);
    let o = bench(dir.path(), &["scan", "--dataset", "no-such-graph"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn missing_artifacts_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let o = bench(dir.path(), &["train", "--dataset", "ba-community"]);
    assert_eq!(code(&o), 3);
    ok(dir.path(), &["generate", "--dataset", "tree-cycles"]);
    let o = bench(
        dir.path(),
        &["explain", "--dataset", "tree-cycles", "--explainer", "sa", "--node", "5", "--seed", "7"],
    );
    assert_eq!(code(&o), 3);
    let o = bench(dir.path(), &["report", "--dataset", "tree-cycles"]);
    assert_eq!(code(&o), 3);
}

#[test]
fn divergence_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["generate", "--dataset", "tree-cycles"]);
    let o = bench(
        dir.path(),
        &["train", "--dataset", "tree-cycles", "--seeds", "0", "--epochs", "5", "--lr", "1e300"],
    );
    assert_eq!(code(&o), 4);
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    let out_cfg = dir.path().join("cfg-out");
    std::fs::write(
        &cfg,
        format!(
            "out = {:?}\ndatasets = [\"tree-cycles\"]\nseeds = \"0..1\"\n[train]\nepochs = 20\n",
            out_cfg.display().to_string()
        ),
    )
    .unwrap();
    let run = |args: &[&str]| {
        Command::new(env!("CARGO_BIN_EXE_seen-bench"))
            .arg("--config")
            .arg(&cfg)
            .args(args)
            .output()
            .unwrap()
    };
    assert!(run(&["generate"]).status.success());
    assert!(run(&["train", "--epochs", "30"]).status.success());
    let m = json(&out_cfg.join("models/tree-cycles-d0-m1.json"));
    assert_eq!(m["train_config"]["epochs"], 30);
    assert!(!out_cfg.join("models/tree-cycles-d0-m2.json").exists());

    std::fs::write(&cfg, "epochs = 5\n").unwrap();
    assert_eq!(run(&["generate"]).status.code(), Some(2));
}

#[test]
fn regenerated_datasets_are_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [a.path(), b.path()] {
        ok(d, &["generate", "--dataset", "ba-community", "--seed", "4"]);
    }
    let strip = |p: &Path| {
        let mut v = json(&p.join("data/ba-community-d4.json"));
        v.as_object_mut().unwrap().remove("provenance");
        v
    };
    assert_eq!(strip(a.path()), strip(b.path()));
}

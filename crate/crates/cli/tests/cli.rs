use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pu-jerm"))
}

fn breast_w() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/breast_w.csv")
}

fn run(cmd: &mut Command) -> String {
    let out = cmd.output().expect("binary runs");
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn simulate_fit_predict_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let pu = dir.path().join("pu.csv");
    let model = dir.path().join("model.txt");
    let preds = dir.path().join("preds.csv");

    let msg = run(bin().args(["simulate-labels", "--strategy", "s2", "--c", "0.5", "--seed", "3", "--in"])
        .arg(breast_w())
        .arg("--out")
        .arg(&pu));
    assert!(msg.contains("of 239 positives"), "{msg}");
    let text = fs::read_to_string(&pu).unwrap();
    let header = text.lines().next().unwrap();
    assert!(header.ends_with(",s,y_hidden"), "{header}");
    assert_eq!(text.lines().count(), 684);

    // Same seed, same labels.
    let again = dir.path().join("again.csv");
    run(bin().args(["simulate-labels", "--strategy", "s2", "--c", "0.5", "--seed", "3", "--in"])
        .arg(breast_w())
        .arg("--out")
        .arg(&again));
    assert_eq!(fs::read(&pu).unwrap(), fs::read(&again).unwrap());

    run(bin().args(["fit", "--method", "jerm", "--in"]).arg(&pu).arg("--model-out").arg(&model));
    let stored = fs::read_to_string(&model).unwrap();
    assert!(stored.starts_with("pu-jerm-model 1\nmethod jerm\n"));
    assert!(stored.contains("\ngamma "));

    run(bin().args(["predict", "--model"]).arg(&model).arg("--in").arg(&pu).arg("--out").arg(&preds));
    let out = fs::read_to_string(&preds).unwrap();
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("y_prob,y_pred"));
    let truth: Vec<u8> = text
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    let mut hits = 0;
    for (line, &y) in lines.zip(&truth) {
        let (prob, pred) = line.split_once(',').unwrap();
        let prob: f64 = prob.parse().unwrap();
        assert!((0.0..=1.0).contains(&prob));
        assert_eq!(pred == "1", prob > 0.5);
        hits += usize::from((pred == "1") == (y == 1));
    }
    assert!(hits as f64 / truth.len() as f64 > 0.85, "accuracy {hits}/{}", truth.len());

    // Predicting on the original file (with `class` instead of s) is rejected by name.
    let bad = bin().args(["predict", "--model"]).arg(&model).arg("--in").arg(breast_w()).arg("--out").arg(&preds).output().unwrap();
    assert!(!bad.status.success());
}

#[test]
fn benchmark_writes_tables_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bench.toml");
    fs::write(
        &cfg,
        format!(
            "seed = 1\nrepeats = 2\n\n[[dataset]]\nname = \"breast-w\"\npath = \"{}\"\nlabel = \"class\"\nstrategies = [\"s1\"]\nc = [0.5]\n",
            breast_w().display()
        ),
    )
    .unwrap();
    let out = dir.path().join("out");
    run(bin().args(["--threads", "1", "benchmark", "--config"]).arg(&cfg).arg("--out-dir").arg(&out));

    let table = fs::read_to_string(out.join("table_s1_c0p5.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next(), Some("dataset,strategy,c,method,mean,sd,repeats"));
    assert_eq!(lines.count(), 3);
    let comparisons = fs::read_to_string(out.join("comparisons.csv")).unwrap();
    assert_eq!(comparisons.lines().count(), 3);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["repeats"], 2);
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
    assert!(manifest["dataset_sha256"]["breast-w"].is_string());
}

#[test]
fn excess_risk_writes_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("er.csv");
    run(bin()
        .args(["excess-risk", "--p", "2", "--n-list", "100,200", "--repeats", "2", "--mc-size", "10000", "--out"])
        .arg(&out));
    let text = fs::read_to_string(&out).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "n,radius,median,mean,sd");
    assert_eq!(rows.len(), 3);
    assert!(rows[1].starts_with("100,"));
}

#[test]
fn bad_arguments_fail() {
    assert!(!bin().args(["fit", "--method", "lbe", "--in", "x", "--model-out", "y"]).status().unwrap().success());
    assert!(!bin().args(["excess-risk", "--p", "2", "--n-list", "200,100", "--out", "/dev/null"]).status().unwrap().success());
    let missing = bin().args(["predict", "--model", "/nonexistent/m", "--in", "x", "--out", "y"]).output().unwrap();
    assert!(!missing.status.success());
}

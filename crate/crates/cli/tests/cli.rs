use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn gkd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gkd"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

const CONFIG: &str = r#"
method = "gkd"
seeds = [0, 1]

[dataset]
source = "synthetic"
n = 300
node_dim = 12
informative = 4
class_sep = 1.5

[split]
labeled = 0.3

[graph]
kind = "threshold"
thresholds = [0.05]

[grid]
depths = [1]
widths = [16]
learning_rates = [0.01]
dropouts = [0.2]
epochs = 60
alphas = [0.5]
"#;

fn write_config(dir: &Path) -> String {
    let p = dir.join("exp.toml");
    std::fs::write(&p, CONFIG).unwrap();
    path(&p).to_owned()
}

#[test]
fn synth_writes_the_csv_triple_reproducibly() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        let o = gkd(&["synth", "--out", path(&dir.path().join(out)), "--n", "100", "--p-missing", "0", "--seed", "5"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["features.csv", "labels.csv", "graph_features.csv"] {
        let a = std::fs::read(dir.path().join("a").join(f)).unwrap();
        assert_eq!(a, std::fs::read(dir.path().join("b").join(f)).unwrap());
    }
    let labels = std::fs::read_to_string(dir.path().join("a/labels.csv")).unwrap();
    assert_eq!(labels.lines().count(), 101);
    let graph = std::fs::read_to_string(dir.path().join("a/graph_features.csv")).unwrap();
    assert!(!graph.lines().skip(1).any(|l| l.split(',').any(str::is_empty)));
}

#[test]
fn train_then_evaluate_without_graph() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let run = dir.path().join("run");
    let o = gkd(&["train", "--config", &cfg, "--output-dir", path(&run)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["config.toml", "report.json", "report.csv", "model.gkd", "logs/seed_0.log", "logs/seed_1.log"] {
        assert!(run.join(f).exists(), "{f}");
    }
    assert!(std::fs::read_to_string(run.join("model.gkd")).unwrap().starts_with("GKD1\n"));

    let report: Value = serde_json::from_str(&std::fs::read_to_string(run.join("report.json")).unwrap()).unwrap();
    let o = gkd(&["evaluate", "--config", path(&run.join("config.toml")), "--model", path(&run.join("model.gkd"))]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let printed: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(printed, report["per_seed"][0]["metrics"]);
}

#[test]
fn build_graph_output_can_be_used_for_training() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let edges = dir.path().join("g.edges");
    let o = gkd(&["build-graph", "--config", &cfg, "--out", path(&edges)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(std::fs::read_to_string(&edges).unwrap().starts_with("N "));

    let file_cfg = CONFIG.replace(
        "kind = \"threshold\"\nthresholds = [0.05]",
        &format!("kind = \"file\"\npath = {:?}\nnodes = \"train\"", path(&edges)),
    );
    let p = dir.path().join("file.toml");
    std::fs::write(&p, file_cfg).unwrap();
    let a = gkd(&["train", "--config", path(&p), "--output-dir", path(&dir.path().join("a"))]);
    let b = gkd(&["train", "--config", &cfg, "--output-dir", path(&dir.path().join("b"))]);
    assert!(a.status.success() && b.status.success());
    let model = |d: &str| std::fs::read(dir.path().join(d).join("model.gkd")).unwrap();
    assert_eq!(model("a"), model("b"));
}

#[test]
fn sweep_writes_one_cell_per_rate_and_method() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out = dir.path().join("sweep");
    let o = gkd(&[
        "sweep-missing", "--config", &cfg, "--output-dir", path(&out), "--seeds", "3",
        "--rates", "0,0.5", "--methods", "gkd,dnn-jfc",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(table.lines().count(), 5);
    assert!(out.join("p0.5/dnn-jfc/report.json").exists());
}

#[test]
fn usage_errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    assert!(!gkd(&["train"]).status.success());
    assert!(!gkd(&["train", "--method", "svm"]).status.success());
    let o = gkd(&["train", "--config", path(&dir.path().join("absent.toml"))]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("absent.toml"));
    let cfg = write_config(dir.path());
    let o = gkd(&["train", "--config", &cfg, "--labeled", "0.001", "--output-dir", path(&dir.path().join("r"))]);
    assert!(!o.status.success());
    let o = gkd(&["synth", "--out", path(&dir.path().join("s")), "--p-missing", "1.5"]);
    assert!(!o.status.success());
}

#[test]
fn shipped_configs_are_valid() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in ["synthetic.toml", "csv.toml"] {
        let cfg = gkd::ExperimentConfig::load(&root.join(name)).unwrap();
        cfg.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}

//! End-to-end runs of the `lossbar` binary on small configurations.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const DOUBLE_WELL: &str = "seed = 1\n[field]\nbuiltin = \"double_well_1d\"\n[minima]\ncount = 6\n";

fn lossbar(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lossbar")).current_dir(dir).args(args).output().expect("spawn lossbar")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn workspace(config: &str) -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.toml"), config).unwrap();
    dir
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn constant_lr(lr: f64) -> String {
    format!("m1 = 0.0\nm2 = 0.0\nlr_max = 0.0\nlr_min = {lr}\nbatches_per_epoch = 1\n")
}

#[test]
fn double_well_barcode_end_to_end() {
    let dir = workspace(DOUBLE_WELL);
    let out = lossbar(dir.path(), &["--config", "run.toml", "minima"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).contains("6 minima"));

    let out = lossbar(dir.path(), &["--config", "run.toml", "barcode", "minima.json"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let file = json(&dir.path().join("barcode.json"));
    assert!((file["essential"]["birth"].as_f64().unwrap() + 0.25).abs() < 1e-3);
    let segments = file["segments"].as_array().unwrap();
    assert_eq!(segments.len(), 1);
    assert!((segments[0]["birth"].as_f64().unwrap() + 0.25).abs() < 1e-3);
    assert!(segments[0]["death"].as_f64().unwrap().abs() < 1e-3);

    let svg = fs::read_to_string(dir.path().join("barcode.svg")).unwrap();
    assert_eq!(svg.matches("class=\"bar").count(), 2);
    assert_eq!(svg.matches("marker-end=").count(), 1);

    let out = lossbar(dir.path(), &["toscore", "barcode.json"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let score: f64 = stdout(&out).trim().parse().unwrap();
    assert!((score - 0.125).abs() < 1e-3, "{score}");
    assert!((json(&dir.path().join("to_score.json"))["to_score"].as_f64().unwrap() - 0.125).abs() < 1e-3);
}

#[test]
fn reruns_are_identical() {
    let dir = workspace(DOUBLE_WELL);
    let first = lossbar(dir.path(), &["--config", "run.toml", "--out", "a", "barcode"]);
    let second = lossbar(dir.path(), &["--config", "run.toml", "--out", "b", "barcode"]);
    assert_eq!(code(&first), 0, "{}", stderr(&first));
    assert_eq!(code(&second), 0);
    for name in ["barcode.json", "barcode.svg"] {
        assert_eq!(fs::read(dir.path().join("a").join(name)).unwrap(), fs::read(dir.path().join("b").join(name)).unwrap());
    }
}

#[test]
fn minima_are_reproducible() {
    let dir = workspace("seed = 7\n[field]\nbuiltin = \"gaussian_mixture_2d\"\n[minima]\ncount = 10\n");
    lossbar(dir.path(), &["--config", "run.toml", "--out", "a", "minima"]);
    lossbar(dir.path(), &["--config", "run.toml", "--out", "b", "minima"]);
    let a = fs::read(dir.path().join("a/minima.json")).unwrap();
    assert_eq!(a, fs::read(dir.path().join("b/minima.json")).unwrap());
    let records: Vec<Value> = serde_json::from_slice(&a).unwrap();
    assert_eq!(records.len(), 10);
}

#[test]
fn seed_flag_overrides_config() {
    let dir = workspace("seed = 7\n[field]\nbuiltin = \"gaussian_mixture_2d\"\n[minima]\ncount = 3\n");
    lossbar(dir.path(), &["--config", "run.toml", "--seed", "0", "--out", "a", "minima"]);
    let config = "seed = 0\n[field]\nbuiltin = \"gaussian_mixture_2d\"\n[minima]\ncount = 3\n";
    fs::write(dir.path().join("zero.toml"), config).unwrap();
    lossbar(dir.path(), &["--config", "zero.toml", "--out", "b", "minima"]);
    assert_eq!(fs::read(dir.path().join("a/minima.json")).unwrap(), fs::read(dir.path().join("b/minima.json")).unwrap());
}

#[test]
fn single_minimum_draws_one_bar() {
    let dir = workspace("seed = 1\n[field]\nbuiltin = \"quadratic_bowl\"\n[minima]\ncount = 1\n");
    let out = lossbar(dir.path(), &["--config", "run.toml", "barcode"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let svg = fs::read_to_string(dir.path().join("barcode.svg")).unwrap();
    assert_eq!(svg.matches("class=\"bar").count(), 1);
    assert_eq!(svg.matches("marker-end=").count(), 1);
}

#[test]
fn toscore_of_ideal_and_invalid_files() {
    let dir = tempfile::tempdir().unwrap();
    let ideal = r#"{"essential":{"birth":-1.0},"segments":[],"meta":{"field":"ideal","seed":0}}"#;
    fs::write(dir.path().join("ideal.json"), ideal).unwrap();
    let out = lossbar(dir.path(), &["toscore", "ideal.json"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(stdout(&out).trim(), "0.000000");

    let inverted = r#"{"essential":{"birth":-1.0},"segments":[{"birth":0.5,"death":0.25,"minimum_id":1}],"meta":{"field":"bad","seed":0}}"#;
    fs::write(dir.path().join("inverted.json"), inverted).unwrap();
    let out = lossbar(dir.path(), &["toscore", "inverted.json"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("death"), "{}", stderr(&out));

    fs::write(dir.path().join("garbage.json"), "{\"segments\": 3}").unwrap();
    assert_eq!(code(&lossbar(dir.path(), &["toscore", "garbage.json"])), 2);
    assert_eq!(code(&lossbar(dir.path(), &["toscore", "missing.json"])), 2);
}

#[test]
fn config_errors_exit_2() {
    let dir = workspace("[field.mlp]\nlayers = [2, 4, 2]\nactivation = \"tanh\"\n");
    let out = lossbar(dir.path(), &["--config", "run.toml", "minima"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("field.dataset"), "{}", stderr(&out));

    let dir = workspace("[field]\nbuiltin = \"double_well_1d\"\n[minima]\ncount = 0\n");
    assert_eq!(code(&lossbar(dir.path(), &["--config", "run.toml", "minima"])), 2);

    let dir = workspace("bogus = 1\n[field]\nbuiltin = \"double_well_1d\"\n");
    let out = lossbar(dir.path(), &["--config", "run.toml", "minima"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("bogus"));

    let dir = workspace("[field]\nbuiltin = \"no_such_field\"\n");
    assert_eq!(code(&lossbar(dir.path(), &["--config", "run.toml", "minima"])), 2);
}

#[test]
fn relative_paths_follow_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let sub = dir.path().join("cfg");
    fs::create_dir(&sub).unwrap();
    fs::write(sub.join("data.csv"), "f0,f1,label\n0.0,0.0,0\n1.0,1.0,1\n0.5,0.0,0\n0.0,0.8,1\n").unwrap();
    let config = "seed = 2\nout = \"results\"\n[field]\ndataset = \"data.csv\"\n[field.mlp]\nlayers = [2, 3, 2]\nactivation = \"tanh\"\n[minima]\ncount = 2\n[descent]\nmax_steps = 50\n";
    fs::write(sub.join("run.toml"), config).unwrap();
    let out = lossbar(dir.path(), &["--config", "cfg/run.toml", "minima"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let records = json(&sub.join("results/minima.json"));
    assert_eq!(records.as_array().unwrap().len(), 2);
    assert_eq!(records[0]["params"].as_array().unwrap().len(), 17);
}

#[test]
fn compare_double_well_and_mixture_pass() {
    let dir = workspace(DOUBLE_WELL);
    let out = lossbar(dir.path(), &["--config", "run.toml", "compare"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).contains("PASS"));
    let report = json(&dir.path().join("compare.json"));
    assert!(report["distance"].as_f64().unwrap() < 0.05);

    let dir = workspace("seed = 7\n[field]\nbuiltin = \"gaussian_mixture_2d\"\n");
    let out = lossbar(dir.path(), &["--config", "run.toml", "compare"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).contains("PASS"));
}

#[test]
fn compare_tolerance_failure_exits_1() {
    let dir = workspace("seed = 0\n[field]\nbuiltin = \"gaussian_mixture_2d\"\n[minima]\ncount = 1\n[compare]\nresolution = 128\ntolerance = 0.05\n");
    let out = lossbar(dir.path(), &["--config", "run.toml", "compare"]);
    assert_eq!(code(&out), 1, "{}{}", stdout(&out), stderr(&out));
    assert!(stdout(&out).contains("FAIL"));
}

#[test]
fn diverging_learning_rate_exits_3() {
    let config = format!("{DOUBLE_WELL}[descent.scheduler]\n{}", constant_lr(10.0));
    let dir = workspace(&config);
    let out = lossbar(dir.path(), &["--config", "run.toml", "compare"]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
    assert!(stderr(&out).contains("divergence"));
}

#[test]
fn path_writes_state_and_trace() {
    let config = format!("{DOUBLE_WELL}[path]\nepochs = 30\n");
    let dir = workspace(&config);
    let out = lossbar(dir.path(), &["--config", "run.toml", "--seed", "0", "path"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let trace = fs::read_to_string(dir.path().join("path_trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 31);
    assert!(dir.path().join("path.json").exists());
}

#[test]
fn morse_and_plot() {
    let config = "seed = 0\n[field]\nbuiltin = \"gaussian_mixture_2d\"\n[minima]\ncount = 5\n[path]\nepochs = 40\n[morse]\ntriangle_epochs = 20\n";
    let dir = workspace(config);
    let out = lossbar(dir.path(), &["--config", "run.toml", "morse"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let file = json(&dir.path().join("diagrams.json"));
    let diagrams = file["diagrams"].as_array().unwrap();
    assert_eq!(diagrams.len(), 3);
    assert_eq!(diagrams[0]["essential"].as_array().unwrap().len(), 1);

    let out = lossbar(dir.path(), &["plot", "diagrams.json"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let svg = fs::read_to_string(dir.path().join("diagrams.svg")).unwrap();
    assert!(svg.contains("index 0") && svg.contains("index 2"));

    let out = lossbar(dir.path(), &["--config", "run.toml", "--out", "bars", "barcode"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let out = lossbar(dir.path(), &["--out", "plots", "plot", "bars/barcode.json"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(dir.path().join("plots/barcode.svg").exists());
}

const DEPTH_STUDY: &str = "seed = 11
[descent]
max_steps = 300
batch_size = 32
[descent.scheduler]
m1 = 0.0
m2 = 0.0
lr_max = 0.0
lr_min = 0.05
batches_per_epoch = 1
[path]
n_points = 7
epochs = 20
batch_size = 32
[depth_study]
layers = [[2, 8, 8, 8, 2], [2, 8, 8, 2], [2, 8, 2]]
activation = \"tanh\"
count = 3
two_moons = { samples = 100, noise = 0.1, seed = 3 }
";

#[test]
fn depth_study_rows_and_determinism() {
    let dir = workspace(DEPTH_STUDY);
    let out = lossbar(dir.path(), &["--config", "run.toml", "--out", "a", "depth-study"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    lossbar(dir.path(), &["--config", "run.toml", "--out", "b", "depth-study"]);
    let csv = fs::read_to_string(dir.path().join("a/depth_study.csv")).unwrap();
    assert_eq!(csv, fs::read_to_string(dir.path().join("b/depth_study.csv")).unwrap());
    assert_eq!(fs::read(dir.path().join("a/depth_study.svg")).unwrap(), fs::read(dir.path().join("b/depth_study.svg")).unwrap());

    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("spec,minimum_id,birth,death"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    let specs: Vec<&str> = rows.iter().map(|r| r[0]).fold(Vec::new(), |mut acc, s| {
        if acc.last() != Some(&s) {
            acc.push(s);
        }
        acc
    });
    // ordered by depth regardless of the order in the config
    assert_eq!(specs, ["2-8-2", "2-8-8-2", "2-8-8-8-2"]);
    for spec in specs {
        let of_spec: Vec<_> = rows.iter().filter(|r| r[0] == spec).collect();
        assert!(of_spec.len() <= 3);
        assert_eq!(of_spec.iter().filter(|r| r[3] == "inf").count(), 1);
        for r in of_spec {
            let (birth, death): (f64, f64) = (r[2].parse().unwrap(), r[3].parse().unwrap());
            assert!(death >= birth);
        }
    }
}

#[test]
fn depth_study_needs_its_section() {
    let dir = workspace(DOUBLE_WELL);
    assert_eq!(code(&lossbar(dir.path(), &["--config", "run.toml", "depth-study"])), 2);
}

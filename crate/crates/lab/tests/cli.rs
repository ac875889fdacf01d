use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn lab(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lab"))
        .args(args)
        .current_dir(dir)
        .env("LAB_THREADS", "2")
        .output()
        .unwrap()
}

const WALK: &str = r#"[experiment]
kind = "walk"
seed = 3
replications = 3
out = "out/walk"

[params]
f = "family=exponential rate=1"
n_steps = 128
h = 1.0
"#;

#[test]
fn list_names_every_kind() {
    let dir = tempfile::tempdir().unwrap();
    let o = lab(&["list"], dir.path());
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    for k in ["cluster_iterate", "renewal_hawkes", "two_index", "embedding", "palm_backward", "kesten", "walk", "inar", "grid_oracle"] {
        assert!(text.lines().any(|l| l.starts_with(k)), "{k}");
    }
}

#[test]
fn run_writes_outputs_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("walk.toml"), WALK).unwrap();
    let o = lab(&["run", "walk.toml"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let printed: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let written = fs::read_to_string(dir.path().join("out/walk/summary.json")).unwrap();
    assert_eq!(printed, serde_json::from_str::<serde_json::Value>(&written).unwrap());
    assert!(dir.path().join("out/walk/replicates.jsonl").exists());
    assert!(dir.path().join("out/walk/occupation.csv").exists());

    let o = lab(&["run", "walk.toml", "--seed", "4", "--replications", "2", "--out", "other"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["metadata"]["seed"], 4);
    assert_eq!(v["metadata"]["replications"], 2);
    assert!(dir.path().join("other/summary.json").exists());
    assert_ne!(v["metadata"]["config_hash"], printed["metadata"]["config_hash"]);
}

#[test]
fn runs_replay_exactly() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("walk.toml"), WALK).unwrap();
    let a = lab(&["run", "walk.toml", "--out", "a"], dir.path());
    let b = Command::new(env!("CARGO_BIN_EXE_lab"))
        .args(["run", "walk.toml", "--out", "b"])
        .current_dir(dir.path())
        .env("LAB_THREADS", "1")
        .output()
        .unwrap();
    assert!(a.status.success() && b.status.success());
    for f in ["summary.json", "replicates.jsonl", "occupation.csv"] {
        let x = fs::read(dir.path().join("a").join(f)).unwrap();
        let y = fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(x, y, "{f}");
    }
}

#[test]
fn oracle_defaults_to_grid_kind() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("scan.toml"),
        "[params]\nwhat = \"scan\"\nalphas = [0.3, 0.7]\nh = 0.1\nranges = [10.0, 100.0]\n",
    )
    .unwrap();
    let o = lab(&["oracle", "scan.toml", "--out", "scan"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("scan/summary.json").exists());
    fs::write(dir.path().join("walk.toml"), WALK).unwrap();
    assert_eq!(lab(&["oracle", "walk.toml"], dir.path()).status.code(), Some(2));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(lab(&["run", "missing.toml"], dir.path()).status.code(), Some(2));
    fs::write(dir.path().join("bad.toml"), "[experiment]\nkind = \"walk\"\n[params]\nf = \"family=pareto alpha=2 x_m=1\"\n").unwrap();
    assert_eq!(lab(&["run", "bad.toml"], dir.path()).status.code(), Some(2));
    fs::write(dir.path().join("broken.toml"), "[experiment\n").unwrap();
    assert_eq!(lab(&["run", "broken.toml"], dir.path()).status.code(), Some(2));
    // A file where the output directory should go.
    fs::write(dir.path().join("blocked"), "").unwrap();
    fs::write(dir.path().join("walk.toml"), WALK).unwrap();
    let o = lab(&["run", "walk.toml", "--out", "blocked/x"], dir.path());
    assert_eq!(o.status.code(), Some(3));
}

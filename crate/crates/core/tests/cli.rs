use std::path::Path;
use std::process::Command;

use mfomo::io::load_checkpoint;

fn mfomo(root: &Path) -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_mfomo"));
    cmd.env("MFOMO_OUTPUT_ROOT", root);
    cmd
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

const RUN_CONFIG: &str = r#"{
  "game": {"name": "congregation", "params": {"n_locations": 3, "horizon": 3,
           "mu0": [0.4, 0.3, 0.3], "rewards": [1.0, 1.0, 0.2]}},
  "solvers": [
    {"kind": "mfomo", "label": "nadam", "config": {"method": "nadam", "max_iters": 100, "record_time": false}},
    {"kind": "baseline", "label": "omd", "config": {"method": "online_mirror_descent", "max_iters": 10}}
  ],
  "seeds": [0, 1],
  "inits": [{"kind": "uniform"}, {"kind": "near_reference", "reference": 0, "epsilon": 0.05}],
  "ne_references": [{"kind": "congregation", "location": 0}, {"kind": "congregation", "location": 1}],
  "output_dir": "demo",
  "save_checkpoints": true
}"#;

#[test]
fn run_writes_traces_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "run.json", RUN_CONFIG);
    let out = mfomo(dir.path()).arg("run").arg(&config).output().unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let demo = dir.path().join("demo");
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(demo.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["runs"].as_array().unwrap().len(), 8);
    let csv = std::fs::read_to_string(demo.join("nadam_near0_eps0.05_seed1.csv")).unwrap();
    assert_eq!(
        csv.lines().next().unwrap(),
        "iter,time_s,f_total,f_consistency,f_bellman,f_complementarity,grad_map_norm,expl,expl_normalized"
    );
    assert_eq!(csv.lines().count(), 102);
}

#[test]
fn verify_reports_on_saved_points() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "run.json", RUN_CONFIG);
    assert!(mfomo(dir.path())
        .arg("run")
        .arg(&config)
        .status()
        .unwrap()
        .success());
    let game = write(
        dir.path(),
        "game.json",
        r#"{"name": "congregation", "params": {"n_locations": 3, "horizon": 3,
            "mu0": [0.4, 0.3, 0.3], "rewards": [1.0, 1.0, 0.2]}}"#,
    );
    let ckpt = dir.path().join("demo/nadam_near0_eps0.05_seed0.final.json");
    assert!(load_checkpoint(&ckpt).is_ok());
    let out = mfomo(dir.path())
        .args([
            "verify",
            ckpt.to_str().unwrap(),
            "--game",
            game.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["feasible"], true);
    assert!(report["objective"]["total"].as_f64().unwrap() >= 0.0);
    assert!(
        report["exploitability_bound"].as_f64().unwrap()
            >= report["nash"]["optimality_gap"].as_f64().unwrap()
    );

    let wrong = write(dir.path(), "sis.json", r#"{"name": "sis", "params": {}}"#);
    let out = mfomo(dir.path())
        .args([
            "verify",
            ckpt.to_str().unwrap(),
            "--game",
            wrong.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(!out.status.success());
}

#[test]
fn enumerate_lcp_lists_equilibria() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(
        dir.path(),
        "lcp.json",
        r#"{"game": {"name": "coordination", "params": {}}, "output_dir": "lcp"}"#,
    );
    let out = mfomo(dir.path())
        .arg("enumerate-lcp")
        .arg(&config)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let listing: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("lcp/equilibria.json")).unwrap(),
    )
    .unwrap();
    let items = listing.as_array().unwrap();
    assert!(items.len() >= 2);
    assert!(items.iter().all(|e| e["nash"]["is_nash"] == true));

    let sis = write(
        dir.path(),
        "sis.json",
        r#"{"game": {"name": "sis", "params": {}}}"#,
    );
    assert!(!mfomo(dir.path())
        .arg("enumerate-lcp")
        .arg(&sis)
        .status()
        .unwrap()
        .success());
}

#[test]
fn failed_runs_give_a_nonzero_exit() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(
        dir.path(),
        "bad.json",
        r#"{"game": {"name": "sis", "params": {"horizon": 3}},
            "solvers": [{"kind": "mfomo", "label": "x", "config": {"method": "spgd", "batch_size": 100000}}],
            "seeds": [0]}"#,
    );
    let out = mfomo(dir.path()).arg("run").arg(&config).output().unwrap();
    assert!(!out.status.success());
    assert!(dir.path().join("experiment/summary.json").exists());
    let missing = mfomo(dir.path())
        .args(["run", "/nonexistent.json"])
        .output()
        .unwrap();
    assert!(!missing.status.success());
}

#[test]
fn example_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/configs");
    for name in ["congregation_small.json", "sis.json"] {
        let text = std::fs::read_to_string(dir.join(name)).unwrap();
        let cfg: mfomo::bench::ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert!(cfg.validate().is_ok(), "{name}");
    }
}

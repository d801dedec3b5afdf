use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ctpg::policy::GainBounds;
use ctpg::MlpSpec;
use ctpg_cli::Snapshot;

const QUICK_CONFIG: &str = r#"
seed = 0
[grid]
h0_values = [5000.0]
v0_values = [800.0]
cmd_values = [-50.0, 0.0, 50.0]
[train.phase1]
max_iters = 200
[train.phase2]
max_iters = 0
"#;

fn ctpg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ctpg"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

fn column(rows: &[Vec<String>], name: &str) -> Vec<f64> {
    let idx = rows[0].iter().position(|h| h == name).unwrap();
    rows[1..].iter().map(|r| r[idx].parse().unwrap()).collect()
}

#[test]
fn train_then_simulate_tracks_the_command() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), QUICK_CONFIG);
    let out_dir = dir.path().join("run");
    let out = ctpg(&[
        "train",
        "--config",
        &cfg,
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["learning_curve.csv", "params.snapshot", "summary.json"] {
        assert!(out_dir.join(f).exists(), "{f}");
    }
    let curve = csv_rows(&out_dir.join("learning_curve.csv"));
    assert_eq!(curve[0].join(","), "iter,phase,cost,grad_inf_norm,wall_s");
    assert_eq!(curve.len(), 201);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["iterations"], 200);
    assert!(
        summary["final_cost"].as_f64().unwrap() <= 0.5 * summary["initial_cost"].as_f64().unwrap()
    );

    let traj = dir.path().join("traj.csv");
    let snap = out_dir.join("params.snapshot");
    let out = ctpg(&[
        "simulate",
        "--params",
        snap.to_str().unwrap(),
        "--h0",
        "5000",
        "--v0",
        "800",
        "--cmd",
        "-50",
        "--out",
        traj.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_rows(&traj);
    assert_eq!(rows.len(), 302);
    let t = column(&rows, "t");
    let a_z = column(&rows, "a_z");
    assert_eq!(*t.last().unwrap(), 3.0);
    assert!(
        (a_z.last().unwrap() + 50.0).abs() / 51.0 < 0.05,
        "{}",
        a_z.last().unwrap()
    );

    // same inputs, same bytes (wall-clock column aside)
    let again = dir.path().join("again");
    assert_eq!(
        code(&ctpg(&[
            "train",
            "--config",
            &cfg,
            "--out-dir",
            again.to_str().unwrap()
        ])),
        0
    );
    assert_eq!(
        fs::read(out_dir.join("params.snapshot")).unwrap(),
        fs::read(again.join("params.snapshot")).unwrap()
    );
    let strip = |p: &Path| {
        csv_rows(p)
            .into_iter()
            .map(|mut r| {
                r.pop();
                r
            })
            .collect::<Vec<_>>()
    };
    assert_eq!(
        strip(&out_dir.join("learning_curve.csv")),
        strip(&again.join("learning_curve.csv"))
    );
}

#[test]
fn unscaled_case_is_recorded_in_the_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[grid]\nh0_values = [5000.0]\nv0_values = [800.0]\ncmd_values = [0.0]\n[train.phase1]\nmax_iters = 2\n[train.phase2]\nmax_iters = 1\n");
    let out_dir = dir.path().join("u");
    let out = ctpg(&[
        "train",
        "--config",
        &cfg,
        "--case",
        "unscaled",
        "--seed",
        "4",
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let snap = Snapshot::read(&out_dir.join("params.snapshot")).unwrap();
    assert!(snap.scaling.is_none());
    assert_eq!(snap.seed, 4);
    assert_eq!(snap.layer_sizes, vec![3, 10, 3]);
    let summary = fs::read_to_string(out_dir.join("summary.json")).unwrap();
    assert!(summary.contains("\"case\": \"unscaled\""));
}

#[test]
fn malformed_config_exits_1_without_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[train]\nlearning_rate = 0.1\n");
    let out_dir = dir.path().join("never");
    let out = ctpg(&[
        "train",
        "--config",
        &cfg,
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("configuration error"));
    assert!(!out_dir.exists());

    let cfg = write_config(dir.path(), "[grid]\ncmd_values = []\n");
    assert_eq!(
        code(&ctpg(&[
            "train",
            "--config",
            &cfg,
            "--out-dir",
            out_dir.to_str().unwrap()
        ])),
        1
    );
    assert!(!out_dir.exists());
}

#[test]
fn training_failure_exits_2_and_keeps_the_iterate() {
    let dir = tempfile::tempdir().unwrap();
    // a negative airspeed cannot be integrated, so every member fails
    let cfg = write_config(
        dir.path(),
        "[grid]\nh0_values = [5000.0]\nv0_values = [-1.0]\ncmd_values = [0.0]\n",
    );
    let out_dir = dir.path().join("fail");
    let out = ctpg(&[
        "train",
        "--config",
        &cfg,
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);
    assert!(Snapshot::read(&out_dir.join("failed_iterate.snapshot")).is_ok());
    assert!(!out_dir.join("params.snapshot").exists());
}

fn zero_snapshot(dir: &Path) -> String {
    let spec = MlpSpec::default();
    let path = dir.join("zero.snapshot");
    fs::write(
        &path,
        Snapshot::new(&spec, 0, vec![0.0; spec.param_count()]).to_json(),
    )
    .unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn zero_policy_simulation_has_midpoint_gains() {
    let dir = tempfile::tempdir().unwrap();
    let snap = zero_snapshot(dir.path());
    let traj = dir.path().join("t.csv");
    let out = ctpg(&[
        "simulate",
        "--params",
        &snap,
        "--h0",
        "6000",
        "--v0",
        "750",
        "--cmd",
        "20",
        "--out",
        traj.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_rows(&traj);
    let GainBounds { lower, upper } = GainBounds::default();
    for (i, name) in ["K_A", "K_I", "K_R"].iter().enumerate() {
        let mid = 0.5 * (lower[i] + upper[i]);
        assert!(
            column(&rows, name).iter().all(|k| (k - mid).abs() < 1e-12),
            "{name}"
        );
    }
}

#[test]
fn simulate_error_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.snapshot");
    let out_path = dir.path().join("t.csv");
    let out = ctpg(&[
        "simulate",
        "--params",
        missing.to_str().unwrap(),
        "--h0",
        "5000",
        "--v0",
        "800",
        "--cmd",
        "0",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 1);

    let snap = zero_snapshot(dir.path());
    let out = ctpg(&[
        "simulate",
        "--params",
        &snap,
        "--h0",
        "5000",
        "--v0",
        "-5",
        "--cmd",
        "0",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("nonfinite-state"));
    assert!(!out_path.exists());
}

#[test]
fn gradcheck_passes_and_detects_corruption() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[grid]\nh0_values = [5000.0]\nv0_values = [800.0]\ncmd_values = [-50.0, 50.0]\n",
    );
    let ok = ctpg(&["gradcheck", "--config", &cfg, "--seed", "1"]);
    assert_eq!(code(&ok), 0, "{}", String::from_utf8_lossy(&ok.stderr));
    let again = ctpg(&["gradcheck", "--config", &cfg, "--seed", "1"]);
    assert_eq!(ok.stdout, again.stdout);
    assert!(String::from_utf8_lossy(&ok.stdout).contains("max relative error"));

    let bad = ctpg(&[
        "gradcheck",
        "--config",
        &cfg,
        "--seed",
        "1",
        "--corrupt-derivatives",
        "1.5",
    ]);
    assert_eq!(code(&bad), 3);
    assert!(String::from_utf8_lossy(&bad.stderr).contains("worst coordinate"));
}

#[test]
fn export_gains_grid_and_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let spec = MlpSpec::default();
    let params: Vec<f64> = (0..spec.param_count())
        .map(|i| ((i * 7 % 13) as f64 - 6.0) * 0.8)
        .collect();
    let snap = dir.path().join("p.snapshot");
    fs::write(&snap, Snapshot::new(&spec, 0, params).to_json()).unwrap();
    let csv = dir.path().join("gains.csv");
    let out = ctpg(&[
        "export-gains",
        "--params",
        snap.to_str().unwrap(),
        "--alpha",
        "0:0.4:2",
        "--mach",
        "2:3:2",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_rows(&csv);
    assert_eq!(rows[0].join(","), "alpha,M,K_A,K_I,K_R");
    assert_eq!(rows.len(), 5);
    let GainBounds { lower, upper } = GainBounds::default();
    for r in &rows[1..] {
        for i in 0..3 {
            let k: f64 = r[2 + i].parse().unwrap();
            assert!(k > lower[i] && k < upper[i]);
        }
    }

    let out = ctpg(&[
        "export-gains",
        "--params",
        snap.to_str().unwrap(),
        "--alpha",
        "0:0.4",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad grid spec"));
}

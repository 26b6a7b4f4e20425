use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn repo_path(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn tomocal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tomocal"))
        .args(args)
        .env_remove("TOMOCAL_SEED")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr).unwrap_or_else(|e| panic!("stderr is not JSON ({e}): {}", String::from_utf8_lossy(&out.stderr)))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn parallel_views() -> Value {
    let views: Vec<Value> = (0..12)
        .map(|i| {
            let alpha = if i < 6 { 0.2 + 0.2 * i as f64 } else { 1.8 + 0.2 * (i - 6) as f64 };
            serde_json::json!({ "alpha": alpha, "shift": 0.004 * i as f64 - 0.02 })
        })
        .collect();
    Value::Array(views)
}

fn fanbeam_views() -> Value {
    let views: Vec<Value> = (0..10)
        .map(|i| serde_json::json!({ "lambda": 4.0 - 0.85 * i as f64, "jitter": 0.03 - 0.006 * i as f64 }))
        .collect();
    Value::Array(views)
}

/// Writes views, simulates and returns (dir, csv path, truth path).
fn simulate_views(rig: &str, views: &Value) -> (TempDir, PathBuf, PathBuf) {
    let dir = TempDir::new().unwrap();
    let views_path = dir.path().join("views.json");
    fs::write(&views_path, views.to_string()).unwrap();
    let csv = dir.path().join("proj.csv");
    let truth = dir.path().join("truth.json");
    let out = tomocal(&[
        "simulate",
        "--rig",
        s(&repo_path(rig)),
        "--views",
        s(&views_path),
        "--out",
        s(&csv),
        "--truth",
        s(&truth),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    (dir, csv, truth)
}

fn data_rows(csv: &Path) -> usize {
    fs::read_to_string(csv).unwrap().lines().skip(1).filter(|l| !l.is_empty()).count()
}

#[test]
fn simulate_random_row_counts() {
    let dir = TempDir::new().unwrap();
    for (rig, views, rows) in [
        ("configs/rigs/parallel_reference.json", "80", 480),
        ("configs/rigs/fanbeam_reference.json", "30", 240),
    ] {
        let csv = dir.path().join("p.csv");
        let out = tomocal(&["simulate", "--rig", s(&repo_path(rig)), "--random", views, "--seed", "7", "--out", s(&csv)]);
        assert_eq!(code(&out), 0);
        assert_eq!(data_rows(&csv), rows);
    }
}

#[test]
fn malformed_rig_exits_2_with_json_error() {
    let dir = TempDir::new().unwrap();
    let rig = dir.path().join("bad.json");
    fs::write(&rig, r#"{"geometry": "parallel", "h_markers": [[0, 0]]"#).unwrap();
    let out = tomocal(&["simulate", "--rig", s(&rig), "--random", "5"]);
    assert_eq!(code(&out), 2);
    assert_eq!(stderr_json(&out)["exit_code"], 2);

    // Collinear but evenly spaced: the third moment vanishes.
    fs::write(
        &rig,
        r#"{"geometry": "parallel", "h_markers": [[-1, 0], [0, 0], [1, 0]], "v_markers": [[0, -2.5], [0, 0.5], [0, 2.0]]}"#,
    )
    .unwrap();
    let out = tomocal(&["validate-rig", s(&rig)]);
    assert_eq!(code(&out), 2);
}

#[test]
fn parallel_calibration_round_trip() {
    let views = parallel_views();
    let (dir, csv, _) = simulate_views("configs/rigs/parallel_reference.json", &views);
    let out_i = dir.path().join("cal_i.json");
    let out_ii = dir.path().join("cal_ii.json");
    assert_eq!(code(&tomocal(&["calibrate", "--projections", s(&csv), "--out", s(&out_i)])), 0);
    assert_eq!(
        code(&tomocal(&["calibrate", "--projections", s(&csv), "--branch", "II", "--out", s(&out_ii)])),
        0
    );
    let one: Value = serde_json::from_str(&fs::read_to_string(&out_i).unwrap()).unwrap();
    let two: Value = serde_json::from_str(&fs::read_to_string(&out_ii).unwrap()).unwrap();
    for (i, v) in views.as_array().unwrap().iter().enumerate() {
        let shift = one["result"]["shifts_all"][i].as_f64().unwrap();
        let a1 = one["result"]["angles"][i].as_f64().unwrap();
        let a2 = two["result"]["angles"][i].as_f64().unwrap();
        assert!((shift - v["shift"].as_f64().unwrap()).abs() < 1e-10);
        assert!((a1 - v["alpha"].as_f64().unwrap()).abs() < 1e-10);
        let turns = (a2 - (PI - a1)) / (2.0 * PI);
        assert!((turns - turns.round()).abs() < 1e-12, "branch II is not the complement at view {i}");
    }
}

#[test]
fn fanbeam_calibration_round_trip() {
    let views = fanbeam_views();
    let (dir, csv, _) = simulate_views("configs/rigs/fanbeam_reference.json", &views);
    let out = dir.path().join("cal.json");
    let rig = repo_path("configs/rigs/fanbeam_reference.json");
    assert_eq!(code(&tomocal(&["calibrate", "--projections", s(&csv), "--rig", s(&rig), "--out", s(&out)])), 0);
    let res: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    let r = &res["result"];
    assert!((r["C_a"].as_f64().unwrap() - 1.5).abs() < 1e-10);
    assert!((r["C_b"].as_f64().unwrap() - 0.5).abs() < 1e-10);
    let v = views.as_array().unwrap();
    let (l0, y0) = (v[0]["lambda"].as_f64().unwrap(), v[0]["jitter"].as_f64().unwrap());
    for (i, view) in v.iter().enumerate() {
        assert!((r["lambdas"][i].as_f64().unwrap() - (view["lambda"].as_f64().unwrap() - l0)).abs() < 1e-10);
        assert!((r["jitters"][i].as_f64().unwrap() - (view["jitter"].as_f64().unwrap() - y0)).abs() < 1e-10);
    }

    // Same geometry from explicit flags, and with classification instead of labels.
    let out2 = dir.path().join("cal2.json");
    let flags = [
        "calibrate", "--projections", s(&csv), "--D", "10", "--L", "0.4", "--k1", "3", "--k2", "1", "--k3", "2",
        "--classify", "--out", s(&out2),
    ];
    assert_eq!(code(&tomocal(&flags)), 0);
    let res2: Value = serde_json::from_str(&fs::read_to_string(&out2).unwrap()).unwrap();
    assert!((res2["result"]["C_a"].as_f64().unwrap() - 1.5).abs() < 1e-10);
}

#[test]
fn missing_marker_names_the_view() {
    let (dir, csv, _) = simulate_views("configs/rigs/parallel_reference.json", &parallel_views());
    let text = fs::read_to_string(&csv).unwrap();
    let trimmed: String = text
        .lines()
        .filter(|l| !l.starts_with("5,H,1,"))
        .map(|l| format!("{l}\n"))
        .collect();
    assert_eq!(trimmed.lines().count() + 1, text.lines().count());
    let broken = dir.path().join("broken.csv");
    fs::write(&broken, trimmed).unwrap();
    let out = tomocal(&["calibrate", "--projections", s(&broken)]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
    let err = stderr_json(&out);
    assert_eq!(err["views"], serde_json::json!([5]));
}

#[test]
fn experiment_tables_have_five_rows() {
    for (config, header) in [
        ("configs/table1.json", "noise_level,sigma,ErrS,ErrA_I,ErrA_II,successes,failures"),
        ("configs/table2.json", "noise_level,sigma,ErrLambda,ErrY,ErrP,ErrC,successes,failures"),
    ] {
        let dir = TempDir::new().unwrap();
        let out = tomocal(&["experiment", "--config", s(&repo_path(config)), "--out-dir", s(dir.path())]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
        let lines: Vec<&str> = summary.lines().collect();
        assert_eq!(lines[0], header);
        assert_eq!(lines.len(), 6);
        for f in ["long.csv", "realizations.jsonl", "scenario.json", "manifest.json"] {
            assert!(dir.path().join(f).exists(), "{f} missing");
        }
        let manifest: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
        assert_eq!(manifest["seed"], 20190101);
        assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
    }
}

fn run_small_experiment(dir: &Path, seed: Option<&str>, env_seed: Option<&str>) -> String {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_tomocal"));
    cmd.args(["experiment", "--config", s(&repo_path("configs/table1.json")), "--out-dir", s(dir), "--realizations", "5"]);
    cmd.env_remove("TOMOCAL_SEED");
    if let Some(seed) = seed {
        cmd.args(["--seed", seed]);
    }
    if let Some(seed) = env_seed {
        cmd.env("TOMOCAL_SEED", seed);
    }
    let out = cmd.output().unwrap();
    assert_eq!(code(&out), 0);
    fs::read_to_string(dir.join("summary.csv")).unwrap()
}

#[test]
fn seeds_change_values_not_schema() {
    let dir = TempDir::new().unwrap();
    let a = run_small_experiment(dir.path(), None, None);
    let again = run_small_experiment(dir.path(), None, None);
    let b = run_small_experiment(dir.path(), Some("99"), None);
    assert_eq!(a, again, "reruns must be byte-identical");
    assert_ne!(a, b);
    assert_eq!(a.lines().next(), b.lines().next());
    assert_eq!(a.lines().count(), b.lines().count());

    let from_env = run_small_experiment(dir.path(), None, Some("99"));
    assert_eq!(from_env, b);
    let flag_wins = run_small_experiment(dir.path(), Some("20190101"), Some("99"));
    assert_eq!(flag_wins, a);
}

#[test]
fn simulate_is_byte_identical_across_runs() {
    let dir = TempDir::new().unwrap();
    let rig = repo_path("configs/rigs/fanbeam_reference.json");
    let run = |name: &str| {
        let csv = dir.path().join(name);
        let out = tomocal(&["simulate", "--rig", s(&rig), "--random", "30", "--noise", "0.5", "--out", s(&csv)]);
        assert_eq!(code(&out), 0);
        fs::read(csv).unwrap()
    };
    assert_eq!(run("a.csv"), run("b.csv"));
}

#[test]
fn dcc_flags_a_corrupted_view() {
    let (dir, csv, truth) = simulate_views("configs/rigs/parallel_reference.json", &parallel_views());
    let report = dir.path().join("dcc.json");
    assert_eq!(
        code(&tomocal(&["dcc-check", "--projections", s(&csv), "--truth", s(&truth), "--out", s(&report)])),
        0
    );

    let corrupted: String = fs::read_to_string(&csv)
        .unwrap()
        .lines()
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            if f[0] == "7" {
                let x: f64 = f[3].parse().unwrap();
                format!("{},{},{},{:.16e}\n", f[0], f[1], f[2], x + 0.05)
            } else {
                format!("{l}\n")
            }
        })
        .collect();
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, corrupted).unwrap();
    let out = tomocal(&["dcc-check", "--projections", s(&bad), "--truth", s(&truth), "--out", s(&report)]);
    assert_eq!(code(&out), 5);
    let rep: Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(rep["suspect_view"], 7);
    assert_eq!(rep["first_failing_order"], 1);

    // Order 0 only counts markers, which the corruption leaves intact.
    let out = tomocal(&["dcc-check", "--projections", s(&bad), "--truth", s(&truth), "--k-max", "0", "--out", s(&report)]);
    assert_eq!(code(&out), 0);
}

#[test]
fn fanbeam_dcc_uses_weights() {
    let (dir, csv, truth) = simulate_views("configs/rigs/fanbeam_reference.json", &fanbeam_views());
    let report = dir.path().join("dcc.json");
    let out = tomocal(&["dcc-check", "--projections", s(&csv), "--truth", s(&truth), "--out", s(&report)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let unweighted: String = fs::read_to_string(&csv)
        .unwrap()
        .lines()
        .map(|l| format!("{}\n", l.rsplit_once(',').unwrap().0))
        .collect();
    let bare = dir.path().join("bare.csv");
    fs::write(&bare, unweighted).unwrap();
    let out = tomocal(&["dcc-check", "--projections", s(&bare), "--truth", s(&truth)]);
    assert_eq!(code(&out), 2);
}

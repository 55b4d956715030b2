use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_vibratrak");

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn vibratrak(args: &[&str], threads_env: Option<&str>) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.args(args).env_remove("VIBRATRAK_THREADS");
    if let Some(t) = threads_env {
        cmd.env("VIBRATRAK_THREADS", t);
    }
    cmd.output().unwrap()
}

fn run(mode: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![mode, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    vibratrak(&args, None)
}

const SMALL_FRC: &str = r#"{
    "system": {"preset": "stiffening_duffing", "harmonics": 3, "time_samples": 64},
    "n": 3,
    "sweep": {"scaled": true, "forces": {"values": [0.2, 0.5, 1.0]}, "omega_range": [0.25, 1.25]}
}"#;

#[test]
fn frc_mode_writes_one_curve_per_level_and_replays_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "frc.json", SMALL_FRC);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let out = run("frc", &cfg, &a, &["--threads", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = vibratrak(
        &["frc", "--config", cfg.to_str().unwrap(), "--out", b.to_str().unwrap()],
        Some("3"),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    for name in ["frc_000.csv", "frc_001.csv", "frc_002.csv", "summary.json"] {
        let x = fs::read(a.join(name)).unwrap();
        let y = fs::read(b.join(name)).unwrap();
        assert!(x == y, "{name} differs between runs");
    }
    let text = fs::read_to_string(a.join("frc_001.csv")).unwrap();
    let header = text.lines().next().unwrap();
    assert!(header.starts_with("force [N],frequency [rad/s],X0 [m],X1c [m],X1s [m]"));
    assert!(header.ends_with("total_amplitude [m],phase_n [rad],residual_norm [-],arc [-]"));
    let rows: Vec<Vec<f64>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect();
    assert!(rows.len() > 20);
    let residual = header.split(',').position(|c| c == "residual_norm [-]").unwrap();
    assert!(rows.iter().all(|r| r[0] == 0.5 && r[residual] <= 1e-9));

    let meta: serde_json::Value = serde_json::from_slice(&fs::read(b.join("metadata.json")).unwrap()).unwrap();
    assert_eq!(meta["threads"], 3);
    assert!(meta["wall_time_s"].as_f64().unwrap() > 0.0);
    assert_eq!(meta["config"]["system"]["time_samples"], 64);
}

#[test]
fn apriori_mode_writes_sweep() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "a.json",
        r#"{"system": {"preset": "stiffening_duffing"}, "n": 3,
            "sweep": {"amplitudes": {"values": [1, 2]}}}"#,
    );
    let out = run("apriori", &cfg, tmp.path(), &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(tmp.path().join("apriori.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    let header: Vec<&str> = lines[0].split(',').collect();
    let mag = header.iter().position(|c| *c == "magnitude [N]").unwrap();
    let row: Vec<&str> = lines[2].split(',').collect();
    // α X1³ / 4 at X1 = 2.
    assert!((row[mag].parse::<f64>().unwrap() - 2.0).abs() < 1e-12);
}

#[test]
fn config_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("out");

    let typo = write_config(
        tmp.path(),
        "typo.json",
        r#"{"system": {"mass": 1, "damping": 0.01, "stiffness": 1, "harmonics": 3,
            "force": {"type": "stiffening_duffing", "alpa": 1}},
            "sweep": {"forces": {"values": [1]}, "omega_range": [0.2, 2]}}"#,
    );
    let out = run("frc", &typo, &out_dir, &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("alpa"));

    let empty = write_config(
        tmp.path(),
        "empty.json",
        r#"{"system": {"preset": "jenkins"}, "n": 3,
            "sweep": {"forces": {"values": []}, "omega_range": [0.2, 0.4]}}"#,
    );
    assert_eq!(run("compare", &empty, &out_dir, &[]).status.code(), Some(2));

    let mismatch = write_config(tmp.path(), "m.json", r#"{"mode": "frc"}"#);
    assert_eq!(run("vprnm", &mismatch, &out_dir, &[]).status.code(), Some(2));

    let missing = tmp.path().join("does-not-exist.json");
    assert_eq!(run("frc", &missing, &out_dir, &[]).status.code(), Some(2));

    let frc = write_config(tmp.path(), "frc.json", SMALL_FRC);
    assert_eq!(run("frc", &frc, &out_dir, &["--step-scale", "0"]).status.code(), Some(2));
    let blocker = tmp.path().join("file");
    fs::write(&blocker, b"").unwrap();
    let out = run("frc", &frc, &blocker.join("sub"), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out_dir.exists(), "no run should have started");
}

#[test]
fn solver_failure_exits_with_three_after_persisting() {
    let tmp = tempfile::tempdir().unwrap();
    // A linear spring has no superharmonic excitation to track.
    let cfg = write_config(
        tmp.path(),
        "lin.json",
        r#"{"system": {"mass": 1, "damping": 0.01, "stiffness": 1, "harmonics": 3,
            "force": {"type": "stiffening_duffing", "alpha": 0}},
            "n": 3, "sweep": {"forces": {"values": [0.1, 1]}}}"#,
    );
    let out = run("vprnm", &cfg, tmp.path(), &[]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    let meta: serde_json::Value =
        serde_json::from_slice(&fs::read(tmp.path().join("metadata.json")).unwrap()).unwrap();
    assert!(!meta["failures"].as_array().unwrap().is_empty());
}

#[test]
fn frc_level_failure_is_recorded_and_other_levels_still_written() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "frc.json",
        r#"{"system": {"preset": "stiffening_duffing", "harmonics": 3, "time_samples": 64},
            "sweep": {"forces": {"values": [0.2, 0.3]}, "omega_range": [0.25, 1.25]},
            "continuation": {"max_points": 3, "ds0": 1e-6, "ds_min": 1e-7, "ds_max": 1e-6}}"#,
    );
    let out = run("frc", &cfg, tmp.path(), &[]);
    // Three points cannot reach the upper frequency, but that is a
    // truncated curve rather than a failure.
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value =
        serde_json::from_slice(&fs::read(tmp.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["levels"][0]["termination"]["reason"], "max_points");
    assert!(tmp.path().join("frc_001.csv").exists());
}

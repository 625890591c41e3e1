//! End-to-end tests of the `flsim` binary: exit codes, file outputs,
//! determinism, sweeps, and the oracle subcommands.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn flsim() -> Command {
    Command::new(env!("CARGO_BIN_EXE_flsim"))
}

fn write(dir: &Path, name: &str, content: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, content).unwrap();
    p
}

fn small_config(out_dir: &Path) -> String {
    format!(
        "seed = 9\n\
         dataset.kind = synth\n\
         dataset.n_classes = 4\n\
         dataset.dim = 8\n\
         dataset.n_per_class = 40\n\
         dataset.test_per_class = 10\n\
         dataset.spread = 0.1\n\
         fl.R = 4\n\
         fl.N = 8\n\
         fl.M = 0\n\
         fl.P = 8\n\
         fl.I = 1\n\
         fl.b = 16\n\
         fl.eta = 1.0\n\
         fl.alpha = 0.05\n\
         fl.k = 2\n\
         model.hidden = 8\n\
         defense.kind = fed_avg\n\
         output.dir = {}\n\
         output.format = both\n",
        out_dir.display()
    )
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("binary runs");
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

#[test]
fn run_writes_csv_with_r_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("out");
    let cfg = write(tmp.path(), "exp.conf", &small_config(&out_dir));
    run_ok(flsim().arg("run").arg("--config").arg(&cfg));

    let csv = std::fs::read_to_string(out_dir.join("report.csv")).unwrap();
    let data_rows = csv
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("round"))
        .count();
    assert_eq!(data_rows, 4);
    assert!(csv.contains("round,acc,n_selected,tp,fp,tn,fn,f1,fallback,wall_ms"));
    // config echo present for replay
    assert!(csv.contains("# seed = 9"));

    let json = std::fs::read_to_string(out_dir.join("report.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["rounds"].as_array().unwrap().len(), 4);
}

#[test]
fn same_config_and_seed_give_byte_identical_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let out_a = tmp.path().join("a");
    let out_b = tmp.path().join("b");
    let cfg = write(tmp.path(), "exp.conf", &small_config(tmp.path()));

    run_ok(flsim().arg("run").arg("--config").arg(&cfg).arg("--out").arg(&out_a));
    run_ok(flsim().arg("run").arg("--config").arg(&cfg).arg("--out").arg(&out_b));

    let a = std::fs::read(out_a.join("report.csv")).unwrap();
    let b = std::fs::read(out_b.join("report.csv")).unwrap();
    assert_eq!(a, b);
    let aj = std::fs::read(out_a.join("report.json")).unwrap();
    let bj = std::fs::read(out_b.join("report.json")).unwrap();
    assert_eq!(aj, bj);
}

#[test]
fn invalid_config_exits_2_with_line_diagnostics() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "bad.conf", "fl.N = 10\nfl.M = 5\n");
    let out = flsim()
        .arg("run")
        .arg("--config")
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2"), "stderr: {err}");
    assert!(err.contains("M < N/2"), "stderr: {err}");
}

#[test]
fn validate_prints_effective_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "exp.conf", &small_config(tmp.path()));
    let out = run_ok(flsim().arg("validate").arg("--config").arg(&cfg));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("fl.N = 8"));
    assert!(text.contains("defense.kind = fed_avg"));
}

#[test]
fn seed_flag_overrides_file() {
    let tmp = tempfile::tempdir().unwrap();
    let out_a = tmp.path().join("a");
    let out_b = tmp.path().join("b");
    let cfg = write(tmp.path(), "exp.conf", &small_config(tmp.path()));
    run_ok(flsim().arg("run").arg("--config").arg(&cfg).arg("--out").arg(&out_a).arg("--seed").arg("101"));
    run_ok(flsim().arg("run").arg("--config").arg(&cfg).arg("--out").arg(&out_b));
    let a = std::fs::read_to_string(out_a.join("report.csv")).unwrap();
    let b = std::fs::read_to_string(out_b.join("report.csv")).unwrap();
    assert!(a.contains("# seed = 101"));
    assert_ne!(a, b);
}

#[test]
fn sweep_produces_one_block_per_value() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("out");
    let mut text = small_config(&out_dir).replace("fl.M = 0", "fl.M = 2");
    text.push_str("attack.kind = sf\nattack.threat_model = t4\n");
    let cfg = write(tmp.path(), "exp.conf", &text);
    run_ok(
        flsim()
            .arg("sweep")
            .arg("--config")
            .arg(&cfg)
            .arg("--axis")
            .arg("malicious_fraction")
            .arg("--values")
            .arg("0,0.125,0.25"),
    );
    let csv = std::fs::read_to_string(out_dir.join("sweep.csv")).unwrap();
    assert!(csv.starts_with("axis,value,round,"));
    for v in ["malicious_fraction,0,", "malicious_fraction,0.125,", "malicious_fraction,0.25,"] {
        assert!(csv.contains(v), "missing block {v}");
    }
    // 3 values x 4 rounds
    assert_eq!(csv.lines().count() - 1, 12);
}

#[test]
fn sweep_k_changes_refresh_cadence() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("out");
    let mut text = small_config(&out_dir);
    text = text.replace("defense.kind = fed_avg", "defense.kind = flguard");
    text.push_str("flguard.epochs = 1\nflguard.batch = 8\n");
    let cfg = write(tmp.path(), "exp.conf", &text);
    run_ok(
        flsim()
            .arg("sweep")
            .arg("--config")
            .arg(&cfg)
            .arg("--axis")
            .arg("k")
            .arg("--values")
            .arg("1,2"),
    );
    let csv = std::fs::read_to_string(out_dir.join("sweep.csv")).unwrap();
    assert!(csv.contains("k,1,"));
    assert!(csv.contains("k,2,"));
}

#[test]
fn sweep_with_empty_values_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "exp.conf", &small_config(tmp.path()));
    let out = flsim()
        .arg("sweep")
        .arg("--config")
        .arg(&cfg)
        .arg("--axis")
        .arg("q")
        .arg("--values")
        .arg("")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn oracle_trimmed_mean_fixture() {
    let tmp = tempfile::tempdir().unwrap();
    let fix = write(
        tmp.path(),
        "tm.json",
        r#"{"matrix": [[1],[2],[3],[4],[100]], "m": 1}"#,
    );
    let out = run_ok(flsim().arg("oracle").arg("trimmed-mean").arg(&fix));
    let v: serde_json::Value =
        serde_json::from_slice(&out.stdout).expect("oracle prints JSON");
    assert_eq!(v["result"][0], 3.0);
}

#[test]
fn oracle_ahc_fixture() {
    let tmp = tempfile::tempdir().unwrap();
    let fix = write(tmp.path(), "ahc.json", r#"{"points": [[0],[1],[10]]}"#);
    let out = run_ok(flsim().arg("oracle").arg("ahc").arg(&fix));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["clusters"], serde_json::json!([[0, 1], [2]]));
}

#[test]
fn oracle_nt_xent_all_equal_fixture() {
    let tmp = tempfile::tempdir().unwrap();
    let fix = write(
        tmp.path(),
        "nt.json",
        r#"{"z": [[0.5,0.5],[0.5,0.5],[0.5,0.5],[0.5,0.5]], "tau": 0.01}"#,
    );
    let out = run_ok(flsim().arg("oracle").arg("nt-xent").arg(&fix));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let loss = v["loss"].as_f64().unwrap();
    assert!((loss - 3f64.ln()).abs() < 1e-12, "loss {loss}");
}

#[test]
fn oracle_unknown_subcommand_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let fix = write(tmp.path(), "x.json", "{}");
    let out = flsim().arg("oracle").arg("nope").arg(&fix).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn json_config_accepted() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("out");
    let cfg = write(
        tmp.path(),
        "exp.json",
        &format!(
            r#"{{"seed": 9, "dataset.n_per_class": 20, "dataset.test_per_class": 8,
                "dataset.dim": 8, "fl.R": 2, "fl.N": 6, "fl.I": 1, "fl.b": 8,
                "model.hidden": "8", "output.dir": "{}"}}"#,
            out_dir.display()
        ),
    );
    run_ok(flsim().arg("run").arg("--config").arg(&cfg));
    assert!(out_dir.join("report.csv").exists());
}

//! End-to-end tests of the `ips` binary: exit codes, outputs, overrides.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::atomic::{AtomicUsize, Ordering};

static COUNTER: AtomicUsize = AtomicUsize::new(0);

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!(
        "ips-cli-{}-{}-{tag}",
        std::process::id(),
        COUNTER.fetch_add(1, Ordering::Relaxed)
    ));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("experiment.conf");
    fs::write(&path, text).unwrap();
    path
}

fn ips(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ips"))
        .args(args)
        .output()
        .expect("binary should launch")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn validate_prints_resolved_config() {
    let dir = temp_dir("validate");
    let cfg = write_config(&dir, "traffic.lambda = 0.04\n");
    let out = ips(&["validate", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("scenario = single-point"), "{text}");
    assert!(text.contains("traffic.lambda = 0.04"), "{text}");
    assert!(text.contains("channel.p_t = 3691.387"), "{text}");
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn bad_key_fails_with_config_exit_code() {
    let dir = temp_dir("badkey");
    let cfg = write_config(&dir, "trafic.lambda = 0.04\n");
    let out = ips(&["validate", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("did you mean `traffic.lambda`"), "{}", stderr(&out));
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn missing_config_file_is_a_config_error() {
    let out = ips(&["validate", "/nonexistent/experiment.conf"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("cannot read"), "{}", stderr(&out));
}

#[test]
fn run_writes_expected_outputs() {
    let dir = temp_dir("run");
    let cfg = write_config(
        &dir,
        "scenario = single-point\nsim.replicates = 2\nsim.stop_cycles = 25\n",
    );
    let out_dir = dir.join("results");
    let out = ips(&[
        "run",
        cfg.to_str().unwrap(),
        "--output",
        out_dir.to_str().unwrap(),
        "--jobs",
        "2",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));

    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["scenario"], "single-point");
    assert_eq!(summary["rows"], 1);
    assert!(summary["config_hash"].as_str().unwrap().len() == 16);

    let table = fs::read_to_string(out_dir.join("single-point.csv")).unwrap();
    assert_eq!(table.lines().count(), 2, "{table}");
    assert!(out_dir.join("resolved_config.txt").exists());
    assert!(stdout(&out).contains("config hash"), "{}", stdout(&out));
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn overrides_land_in_resolved_config() {
    let dir = temp_dir("overrides");
    let cfg = write_config(
        &dir,
        "scenario = single-point\nsim.replicates = 5\nsim.stop_cycles = 10\n",
    );
    let out_dir = dir.join("results");
    let out = ips(&[
        "run",
        cfg.to_str().unwrap(),
        "--seed",
        "97",
        "--replicates",
        "3",
        "--output",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let resolved = fs::read_to_string(out_dir.join("resolved_config.txt")).unwrap();
    assert!(resolved.contains("sim.seed = 97"), "{resolved}");
    assert!(resolved.contains("sim.replicates = 3"), "{resolved}");
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn unwritable_output_is_a_runtime_error() {
    let dir = temp_dir("unwritable");
    let cfg = write_config(&dir, "scenario = gain-curve\ngain.max_receivers = 4\n");
    let blocker = dir.join("blocker");
    fs::write(&blocker, "file, not a directory").unwrap();
    let target = blocker.join("sub");
    let out = ips(&[
        "run",
        cfg.to_str().unwrap(),
        "--output",
        target.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn identical_runs_are_byte_identical() {
    let dir = temp_dir("repro");
    let cfg = write_config(
        &dir,
        "scenario = density-sweep\ntraffic.lambda = 0.05,0.067\nsim.replicates = 2\nsim.stop_cycles = 20\n",
    );
    let (o1, o2) = (dir.join("a"), dir.join("b"));
    for o in [&o1, &o2] {
        let out = ips(&[
            "run",
            cfg.to_str().unwrap(),
            "--output",
            o.to_str().unwrap(),
            "--jobs",
            if o == &o1 { "1" } else { "4" },
        ]);
        assert!(out.status.success(), "{}", stderr(&out));
    }
    for name in ["density-sweep.csv", "summary.json", "resolved_config.txt"] {
        let a = fs::read(o1.join(name)).unwrap();
        let b = fs::read(o2.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between runs");
    }
    let _ = fs::remove_dir_all(&dir);
}

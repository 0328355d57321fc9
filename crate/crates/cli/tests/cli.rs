use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nvmdse")).args(args).output().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let o = run(&["tune", "--no-such-flag"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["tune", "--config", path(&dir.path().join("absent.toml"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_anchor_file_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "anchors = \"nowhere.toml\"\n").unwrap();
    let o = run(&["calibrate", "--config", path(&cfg), "--output", path(&dir.path().join("out"))]);
    assert_ne!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("file not found"), "{}", stderr(&o));
}

#[test]
fn calibrate_without_anchors_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["calibrate", "--output", path(&dir.path().join("out"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn invalid_config_values_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    for body in ["capacities_mb = []\n", "area_slack = -1.0\n", "kinds = [\"STT_MRAM\"]\n", "bogus_key = 1\n"] {
        let cfg = dir.path().join("run.toml");
        fs::write(&cfg, body).unwrap();
        let o = run(&["tune", "--config", path(&cfg), "--output", path(&dir.path().join("out"))]);
        assert_eq!(o.status.code(), Some(2), "{body}: {}", stderr(&o));
    }
}

#[test]
fn unwritable_output_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let o = run(&["tune", "--output", path(&blocker.join("out"))]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

#[test]
fn dry_run_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = run(&["tune", "--dry-run", "--output", path(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn tune_writes_one_row_per_kind() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    assert!(run(&["tune", "--output", path(&out)]).status.success());
    let csv = fs::read_to_string(out.join("tuned.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(!csv.contains('\r'));
    for kind in ["SRAM", "STT_MRAM", "SOT_MRAM"] {
        assert!(csv.lines().skip(1).any(|l| l.starts_with(&format!("{kind},"))), "{kind}");
    }
}

#[test]
fn repeated_sweeps_are_identical() {
    let dir = tempfile::tempdir().unwrap();
    let read = |name: &str| {
        let out = dir.path().join(name);
        assert!(run(&["sweep", "--output", path(&out)]).status.success());
        (fs::read(out.join("sweep_series.csv")).unwrap(), fs::read(out.join("sweep.json")).unwrap())
    };
    assert_eq!(read("a"), read("b"));
}

#[test]
fn generated_profiles_match_the_shipped_suite() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = run(&["gen-profile", "--seed", "1", "--output", path(&out), "--batch-dnn", "AlexNet"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read(out.join("profiles.csv")).unwrap(), fs::read(data("profiles.csv")).unwrap());
    assert_eq!(
        fs::read(out.join("batch_profiles.csv")).unwrap(),
        fs::read(data("batch_profiles.csv")).unwrap()
    );
}

#[test]
fn golden_trace_regenerates_with_its_checksum() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let spec = data("golden_trace.toml");
    let o = run(&["gen-trace", "--spec", path(&spec), "--format", "binary", "--output", path(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let stdout = String::from_utf8(o.stdout).unwrap();
    let expected = fs::read_to_string(&spec).unwrap();
    let sha = stdout.trim().rsplit(' ').next().unwrap();
    assert!(expected.contains(sha), "{stdout}");
    assert!(out.join("trace.bin").exists());
}

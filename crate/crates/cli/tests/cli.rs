use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_observer-lab");

fn paper_toml() -> String {
    fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/paper.toml"))
        .unwrap()
}

fn short_config(dir: &Path, edit: impl Fn(String) -> String) -> std::path::PathBuf {
    let text = paper_toml().replace("horizon = 60.0", "horizon = 2.0");
    let path = dir.join("scenario.toml");
    fs::write(&path, edit(text)).unwrap();
    path
}

fn run(args: &[&str], cwd: &Path) -> Output {
    Command::new(BIN)
        .args(args)
        .current_dir(cwd)
        .env_remove("OBSERVER_LAB_OUT")
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn validate_accepts_bundled_config() {
    let dir = tempfile::tempdir().unwrap();
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/paper.toml");
    let out = run(&["validate", path.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(String::from_utf8_lossy(&out.stdout).contains("60001 samples"));
}

#[test]
fn validate_names_mismatched_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = short_config(dir.path(), |t| {
        t.replace("gain = [2.0, 3.2]", "gain = [2.0, 3.2, 1.0]")
    });
    let out = run(&["validate", path.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("luenberger.gain"), "{}", stderr(&out));
}

#[test]
fn malformed_config_reports_path() {
    let dir = tempfile::tempdir().unwrap();
    let path = short_config(dir.path(), |t| {
        t.replace("smoothing_pole = 1.0", "smoothing_pole = [1.0]")
    });
    let out = run(&["validate", path.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(
        stderr(&out).contains("cubic.smoothing_pole"),
        "{}",
        stderr(&out)
    );
}

#[test]
fn missing_config_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["run", "does-not-exist.toml"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("does-not-exist.toml"));
}

#[test]
fn bad_arguments_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["frobnicate"], dir.path()).status.code(), Some(1));
    assert_eq!(run(&["sweep"], dir.path()).status.code(), Some(1));
    assert_eq!(
        run(&["sweep", "--delta-scale", "1,x"], dir.path())
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        run(&["sweep", "--delta-scale", "1"], dir.path())
            .status
            .code(),
        Some(1)
    );
    assert_eq!(run(&["--help"], dir.path()).status.code(), Some(0));
}

#[test]
fn runtime_failure_exits_two_with_stage() {
    let dir = tempfile::tempdir().unwrap();
    let path = short_config(dir.path(), |t| {
        t.replace(
            "kind = \"sinusoid\"\namplitude = 0.3\nomega = 1.0",
            "kind = \"constant\"\nvalue = 1e6",
        )
    });
    let out = run(&["run", path.to_str().unwrap(), "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(stderr(&out).contains("stage `cubic`"), "{}", stderr(&out));
}

#[test]
fn output_directory_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let path = short_config(dir.path(), |t| t.replace("out/paper", "from-config"));
    let cfg = path.to_str().unwrap();

    assert_eq!(run(&["run", cfg], dir.path()).status.code(), Some(0));
    assert!(dir.path().join("from-config/theta1.csv").exists());

    let out = Command::new(BIN)
        .args(["run", cfg])
        .current_dir(dir.path())
        .env("OBSERVER_LAB_OUT", "from-env")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("from-env/e2.svg").exists());

    let out = Command::new(BIN)
        .args(["run", cfg, "--out", "from-flag"])
        .current_dir(dir.path())
        .env("OBSERVER_LAB_OUT", "from-env-2")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("from-flag/metrics.json").exists());
    assert!(!dir.path().join("from-env-2").exists());
}

#[test]
fn run_writes_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let path = short_config(dir.path(), |t| t);
    let out = run(&["run", path.to_str().unwrap(), "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    for name in ["theta1", "theta2", "e1", "e2"] {
        let csv = fs::read_to_string(dir.path().join(format!("o/{name}.csv"))).unwrap();
        assert_eq!(csv.lines().count(), 2002);
        let svg = fs::read_to_string(dir.path().join(format!("o/{name}.svg"))).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 3);
    }
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("GPEBO + cubic DREM"));
    assert!(stdout.contains("mixed disturbance channel 2"));
}

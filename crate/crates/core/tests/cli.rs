use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tikhoflow"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin().args(args).current_dir(dir).env("TIKHOFLOW_OUT", dir.join("out")).output().unwrap()
}

fn listing(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> =
        std::fs::read_dir(dir).map(|r| r.map(|e| e.unwrap().file_name().into_string().unwrap()).collect()).unwrap_or_default();
    v.sort();
    v
}

#[test]
fn benchmark_exits_zero_with_five_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("benchmark_rankdef.toml");
    let out = run_in(tmp.path(), &["run", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(listing(&tmp.path().join("out")), ["path.csv", "rates.csv", "report.json", "trajectory.csv", "trajectory.svg"]);
}

#[test]
fn out_env_overrides_configured_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("certify_example.toml");
    let out = run_in(tmp.path(), &["run", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(tmp.path().join("out/certificate.txt").exists());
    assert!(!tmp.path().join("out/certify_example").exists());
}

#[test]
fn tikhonov_bound_violation_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(configs().join("benchmark_rankdef.toml")).unwrap().replace("c = 0.25", "c = 5.0");
    let cfg = tmp.path().join("bad.toml");
    std::fs::write(&cfg, text).unwrap();
    let out = run_in(tmp.path(), &["run", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("TikhonovBound"));
    assert!(listing(&tmp.path().join("out")).is_empty());
}

#[test]
fn certify_prints_constants() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("certify_example.toml");
    let out = run_in(tmp.path(), &["certify", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    for key in ["b = ", "s2 = ", "tau = ", "s5 = ", "K = ", "status = certified"] {
        assert!(text.contains(key), "missing {key:?} in\n{text}");
    }
    let forced = run_in(tmp.path(), &["certify", cfg.to_str().unwrap(), "--k", "5"]);
    assert_eq!(forced.status.code(), Some(1));
}

#[test]
fn batch_run_takes_the_worst_exit_code() {
    let tmp = tempfile::tempdir().unwrap();
    let good = configs().join("skew_file.toml");
    let missing = tmp.path().join("missing.toml");
    let out = run_in(tmp.path(), &["run", good.to_str().unwrap(), missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn identical_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = configs().join("qp_toy.toml");
    for dir in [&a, &b] {
        assert_eq!(run_in(dir.path(), &["run", cfg.to_str().unwrap()]).status.code(), Some(0));
    }
    let files = listing(&a.path().join("out"));
    assert!(files.contains(&"pd_metrics.csv".to_string()));
    for f in files {
        assert_eq!(std::fs::read(a.path().join("out").join(&f)).unwrap(), std::fs::read(b.path().join("out").join(&f)).unwrap(), "{f}");
    }
}

#[test]
fn list_problems_names_the_benchmark() {
    let out = bin().arg("list-problems").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("rankdef"));
}

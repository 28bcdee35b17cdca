use std::process::Command;

fn homog(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_homog")).args(args).output().unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

#[test]
fn help_and_version_succeed() {
    assert_eq!(homog(&["--help"]).0, 0);
    assert_eq!(homog(&["--version"]).0, 0);
}

#[test]
fn config_errors_exit_with_one() {
    for args in [
        &["bogus"][..],
        &["sweep", "--R", "4,3"],
        &["sweep", "--method", "nope"],
        &["sweep", "--nonsense", "1"],
        &["reference", "--coef", "lognormal"],
        &["upscale", "--R", "4,6"],
        &["plot", "/nonexistent/file.csv"],
    ] {
        let (code, _, err) = homog(args);
        assert_eq!(code, 1, "{args:?}: {err}");
    }
}

#[test]
fn numerical_failure_exits_with_two() {
    let (code, _, err) = homog(&["equivalence", "--R", "3", "--n", "8", "--t-long", "0.01"]);
    assert_eq!(code, 2, "{err}");
    assert!(err.contains("increase T_long"));
}

#[test]
fn reference_prints_the_tensor() {
    let (code, out, _) = homog(&["reference", "--coef", "checkerboard:2,2", "--n", "8"]);
    assert_eq!(code, 0);
    assert!(out.contains("a0[1] = 2.0000000000000000e0 0.0000000000000000e0"), "{out}");
}

#[test]
fn sweep_writes_csv_and_plot_reads_it() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("sweep.csv");
    let (code, out, err) = homog(&[
        "sweep", "--coef", "gloria", "--method", "parabolic,elliptic_standard", "--q", "1,3", "--ko", "0.6667",
        "--R", "2:4:1", "--n", "8", "--out", csv.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("wrote 12 rows"));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.lines().any(|l| l == homog_cli::HEADER));
    let (code, _, _) = homog(&["plot", csv.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(dir.path().join("sweep.svg").exists());
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "coef = constant:2\nmethod = elliptic_standard\nR = 3\nn = 8\nq = 1\n").unwrap();
    let (code, out, err) = homog(&["upscale", "--config", cfg.to_str().unwrap(), "--coef", "constant:5"]);
    assert_eq!(code, 0, "{err}");
    let row = out.lines().find(|l| l.starts_with("elliptic_standard")).unwrap();
    let a11: f64 = row.split(',').nth(8).unwrap().parse().unwrap();
    assert!((a11 - 5.0).abs() < 1e-10, "{a11}");
}

#[test]
fn bench_marks_unreachable_tolerances() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bench.csv");
    let (code, out, err) = homog(&[
        "bench", "--coef", "gloria", "--method", "elliptic_standard", "--R", "2,3", "--n", "8", "--tols",
        "1,1e-12", "--out", path.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("unreachable"));
    let csv = std::fs::read_to_string(&path).unwrap();
    assert!(csv.starts_with("method,q,tol,R,err_fro,dofs,matvecs,walltime_ms,status\n"));
    assert_eq!(csv.lines().filter(|l| l.ends_with(",reached")).count(), 1);
}

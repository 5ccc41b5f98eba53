use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sellerfair"))
}

fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn run(args: &[&str]) -> std::process::Output {
    let out = bin().args(args).output().unwrap();
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn ingest_sample_log() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("brands.csv");
    let log = crate_dir().join("data/sample_events.csv");
    let stdout = run(&["ingest-evs", s(&log), "--view-threshold", "300", "-o", s(&out)]).stdout;
    assert!(String::from_utf8(stdout)
        .unwrap()
        .starts_with("6 brands kept, 2 below 300 views"));
    let table = sellerfair::BrandTable::read_csv_file(&out).unwrap();
    assert_eq!(table.brands.len(), 6);
    assert!(table.brands.iter().all(|b| b.views >= 300));
}

#[test]
fn sweep_writes_summary_and_histograms_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let config = crate_dir().join("configs/evs_sample.json");
    let outputs = ["a", "b"].map(|name| {
        let out = dir.path().join(name);
        run(&[
            "sweep",
            "-c",
            s(&config),
            "--horizon",
            "5000",
            "--seeds",
            "0,1",
            "-o",
            s(&out),
        ]);
        [
            "summary.json",
            "hist_benchmark.csv",
            "hist_m0.csv",
            "hist_m0_5.csv",
            "hist_m1.csv",
        ]
        .map(|f| std::fs::read(out.join(f)).unwrap())
    });
    assert_eq!(outputs[0], outputs[1]);
    let report: sellerfair::SweepReport = serde_json::from_slice(&outputs[0][0]).unwrap();
    assert_eq!(report.points.len(), 3);
    assert_eq!(report.seeds, vec![0, 1]);
}

#[test]
fn run_with_trace_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let config = crate_dir().join("configs/synthetic_sweep.json");
    run(&[
        "run",
        "-c",
        s(&config),
        "--horizon",
        "300",
        "--exploration",
        "off",
        "--trace",
        "-o",
        s(dir.path()),
    ]);
    let trace = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 301);
    assert!(trace.lines().skip(1).all(|l| l.split(',').nth(6) == Some("false")));
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["metrics"]["rounds"], 300);
    assert_eq!(summary["config"]["exploration"], "off");
}

#[test]
fn oracle_and_calibrate() {
    let dir = tempfile::tempdir().unwrap();
    let config = crate_dir().join("configs/regret.json");
    run(&["oracle", "-c", s(&config), "--iterations", "20000", "-o", s(dir.path())]);
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("oracle.json")).unwrap()).unwrap();
    let dual = summary["dual_value"].as_f64().unwrap();
    assert!((dual - 6550.0).abs() < 1.0, "{dual}");
    assert!(summary["pseudo_regret"].as_f64().unwrap() >= -1e-9);

    let stdout = run(&["calibrate", "-c", s(&config), "--draws", "10000", "-o", s(dir.path())]).stdout;
    assert!(String::from_utf8(stdout)
        .unwrap()
        .starts_with("3 items, 10000 draws each"));
    assert_eq!(
        std::fs::read_to_string(dir.path().join("calibration.csv"))
            .unwrap()
            .lines()
            .count(),
        4
    );
}

#[test]
fn validation_errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let config = crate_dir().join("configs/regret.json");
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"horizon": 0}"#).unwrap();
    for args in [
        vec!["run", "-c", s(&config), "--epsilon", "2", "-o", s(dir.path())],
        vec!["run", "-c", s(&bad), "-o", s(dir.path())],
        vec!["run", "-c", s(&config), "--h-override", "1", "-o", s(dir.path())],
        vec!["ingest-evs", s(&config), "-o", s(&dir.path().join("x.csv"))],
        vec!["sweep", "-c", s(&config), "--multipliers", "-1", "-o", s(dir.path())],
    ] {
        let out = bin().args(&args).output().unwrap();
        assert!(!out.status.success(), "{args:?} should fail");
        assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: "), "{args:?}");
    }
}

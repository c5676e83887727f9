use std::path::Path;
use std::process::{Command, Output};

fn conetrack(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_conetrack")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn value<'a>(text: &'a str, key: &str) -> &'a str {
    text.lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix(" = ")))
        .unwrap_or_else(|| panic!("no `{key}` in\n{text}"))
}

#[test]
fn invalid_settings_exit_with_code_three() {
    assert_eq!(conetrack(&["run-mission", "--controller", "bogus"]).status.code(), Some(3));
    assert_eq!(conetrack(&["run-mission", "--set", "mpc.horizon=0"]).status.code(), Some(3));
    assert_eq!(conetrack(&["run-mission", "--no-such-flag"]).status.code(), Some(3));
    assert_eq!(conetrack(&["run-mission", "--config", "/nonexistent/run.cfg"]).status.code(), Some(3));
    assert_eq!(conetrack(&["--help"]).status.code(), Some(0));
}

#[test]
fn flags_override_the_config_file_and_set_overrides_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# conetrack-config v1\nseed = 3\ncontroller = pure_pursuit\nestop_at = 1.5\n").unwrap();
    let cfg = cfg.to_str().unwrap();

    let o = conetrack(&["run-mission", "--config", cfg, "--seed", "5"]);
    let text = stdout(&o);
    assert_eq!(o.status.code(), Some(2), "{text}");
    assert_eq!(value(&text, "seed"), "5");
    assert_eq!(value(&text, "controller"), "pure_pursuit");
    assert_eq!(value(&text, "completed"), "false");
    assert_eq!(value(&text, "final_state"), "emergency");

    let o = conetrack(&["run-mission", "--config", cfg, "--seed", "5", "--set", "seed=9"]);
    assert_eq!(value(&stdout(&o), "seed"), "9");
}

#[test]
fn logs_written_by_a_run_reproduce_its_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = conetrack(&["run-mission", "--estop-at", "4", "-o", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let report = stdout(&o);
    assert_eq!(std::fs::read_to_string(out.join("report.txt")).unwrap(), report);

    let steps = out.join("steps.csv");
    let truth = out.join("truth.csv");
    let m = conetrack(&["compute-metrics", "--steps", steps.to_str().unwrap(), "--truth", truth.to_str().unwrap()]);
    assert_eq!(m.status.code(), Some(0));
    let metrics = stdout(&m);
    for key in ["lateral_accel_std", "mean_lateral_error", "average_speed", "average_sideslip"] {
        assert_eq!(value(&metrics, key), value(&report, key));
    }

    let bad = conetrack(&["compute-metrics", "--steps", steps.to_str().unwrap(), "--truth", "/nonexistent"]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn generated_scans_go_through_offline_perception() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("track");
    let o = conetrack(&["generate-track", "--track", "circle:20", "--scans", "3", "-o", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["cones.csv", "centerline.txt", "map.txt", "scans/scan_0002.txt"] {
        assert!(Path::new(&out.join(f)).is_file(), "{f} missing");
    }

    let det = dir.path().join("det.csv");
    let p = conetrack(&["run-perception", out.join("scans").to_str().unwrap(), "-o", det.to_str().unwrap()]);
    assert_eq!(p.status.code(), Some(0));
    let text = std::fs::read_to_string(det).unwrap();
    assert!(text.starts_with("# conetrack-detections v1\n"));
    for scan in ["scan_0000", "scan_0001", "scan_0002"] {
        assert!(text.lines().filter(|l| l.starts_with(scan)).count() >= 2, "{scan}: {text}");
    }

    assert_eq!(conetrack(&["generate-track"]).status.code(), Some(3));
}

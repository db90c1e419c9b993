use std::path::{Path, PathBuf};
use std::process::Command;

fn cml() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cml"))
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(format!("{name}.toml"))
}

fn fixture_config(dir: &Path, name: &str) -> PathBuf {
    let cfg = dir.join(format!("{name}.toml"));
    std::fs::write(&cfg, format!("[fixture]\npath = {:?}\n", fixture(name))).unwrap();
    cfg
}

fn report(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn empty_divisor_is_infeasible() {
    let tmp = tempfile::tempdir().unwrap();
    let out = cml()
        .args(["solve", "--grid", "32", "--out"])
        .arg(tmp.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("Euler characteristic"), "{err}");
}

#[test]
fn help_exits_zero_and_bad_args_exit_one() {
    assert_eq!(cml().arg("--help").status().unwrap().code(), Some(0));
    assert_eq!(
        cml().arg("no-such-command").status().unwrap().code(),
        Some(1)
    );
    assert_eq!(
        cml()
            .args(["solve", "--grid", "30"])
            .output()
            .unwrap()
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn unknown_config_keys_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.toml");
    std::fs::write(&cfg, "[problem]\ngrdi = 64\n").unwrap();
    let out = cml()
        .arg("solve")
        .arg("--config")
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("grdi"));
}

#[test]
fn missing_referenced_file_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.toml");
    std::fs::write(&cfg, "[fixture]\npath = \"nowhere.toml\"\n").unwrap();
    let out = cml()
        .arg("neck")
        .arg("--config")
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn cone_solve_writes_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.toml");
    std::fs::write(
        &cfg,
        "[problem]\ngrid = 64\natoms = [{ x = 0.5, y = 0.5, beta = -0.5 }]\n",
    )
    .unwrap();
    let out_dir = tmp.path().join("out");
    let st = cml()
        .arg("solve")
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(0));
    for f in [
        "report.json",
        "stages.csv",
        "flux.csv",
        "annuli.csv",
        "v.cmlgrid",
    ] {
        assert!(out_dir.join(f).exists(), "{f}");
    }
    let r = report(&out_dir);
    let area = r["details"]["solution"]["area"].as_f64().unwrap();
    assert!((area - std::f64::consts::PI).abs() < 1e-8);
    let v = conformal_lab::field::io::read_grid(&out_dir.join("v.cmlgrid")).unwrap();
    assert_eq!(v.n(), 64);
}

#[test]
fn default_continuation_has_ten_stages() {
    let tmp = tempfile::tempdir().unwrap();
    let st = cml()
        .args(["continue-cusp", "--grid", "32", "--out"])
        .arg(tmp.path())
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(0));
    let csv = std::fs::read_to_string(tmp.path().join("stages.csv")).unwrap();
    let lines: Vec<_> = csv.lines().collect();
    assert_eq!(lines[0], "stage,area,gbDefect");
    assert_eq!(lines.len(), 11);
    for (k, line) in lines[1..].iter().enumerate() {
        let cols: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        let want = 2.0 * std::f64::consts::PI * (1.0 - 0.5f64.powi(k as i32 + 1));
        assert_eq!(cols[0], (k + 1) as f64);
        assert!(
            (cols[1] - want).abs() < 1e-9,
            "stage {}: {}",
            k + 1,
            cols[1]
        );
    }
}

#[test]
fn flat_neck_identity_exits_two_with_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = fixture_config(tmp.path(), "flat-neck");
    let out_dir = tmp.path().join("out");
    let st = cml()
        .arg("area-identity")
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(2));
    let r = report(&out_dir);
    assert_eq!(r["exit_code"], 2);
    assert_eq!(r["hypothesis_violation"], true);
    let d = r["details"]["area_identity"]["extrapolated"]["value"]
        .as_f64()
        .unwrap();
    assert!((d.abs() - 2.0 * std::f64::consts::PI).abs() < 1e-8, "{d}");
}

#[test]
fn cap_identity_and_cylinder_check_succeed() {
    let tmp = tempfile::tempdir().unwrap();
    for (name, cmd) in [
        ("spherical-cap", "area-identity"),
        ("linear-cylinder", "three-circle"),
    ] {
        let cfg = fixture_config(tmp.path(), name);
        let st = cml()
            .arg(cmd)
            .arg("--config")
            .arg(&cfg)
            .arg("--out")
            .arg(tmp.path().join(name))
            .status()
            .unwrap();
        assert_eq!(st.code(), Some(0), "{name}");
    }
}

#[test]
fn flux_violation_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = fixture_config(tmp.path(), "flat-cylinder");
    let st = cml()
        .arg("three-circle")
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(tmp.path().join("o"))
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(2));
}

#[test]
fn neck_writes_annuli() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = fixture_config(tmp.path(), "flat-cylinder-end");
    let out_dir = tmp.path().join("o");
    let st = cml()
        .arg("neck")
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .status()
        .unwrap();
    assert!(matches!(st.code(), Some(0) | Some(2)));
    let csv = std::fs::read_to_string(out_dir.join("annuli.csv")).unwrap();
    assert!(csv.lines().count() > 2);
}

#[test]
fn report_reemission_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let first = tmp.path().join("first");
    let st = cml()
        .args(["continue-cusp", "--grid", "32", "--out"])
        .arg(&first)
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(0));
    let second = tmp.path().join("second");
    let st = cml()
        .arg("report")
        .arg(first.join("report.json"))
        .arg("--out")
        .arg(&second)
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(0));
    for f in ["report.json", "stages.csv", "flux.csv", "annuli.csv"] {
        assert_eq!(
            std::fs::read(first.join(f)).unwrap(),
            std::fs::read(second.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn fixture_directory_runs_whole_suite() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let cfg = tmp.path().join("suite.toml");
    std::fs::write(&cfg, format!("[fixture]\npath = {dir:?}\n")).unwrap();
    let out_dir = tmp.path().join("o");
    let st = cml()
        .arg("area-identity")
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(2));
    let r = report(&out_dir);
    let rows = r["details"]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), std::fs::read_dir(&dir).unwrap().count());
    for row in rows {
        let name = row["name"].as_str().unwrap();
        assert!(out_dir.join(name).join("report.json").is_file(), "{name}");
    }
    let cap = rows.iter().find(|r| r["name"] == "spherical-cap").unwrap();
    assert_eq!(cap["hypothesis_violation"], false);
    let neck = rows.iter().find(|r| r["name"] == "flat-neck").unwrap();
    assert_eq!(neck["hypothesis_violation"], true);
}

use std::fs;

use wavelab::cli::{catalog, main_with, prepare, RunReport};

fn code(args: &[&str]) -> i32 {
    main_with(std::iter::once("wavelab").chain(args.iter().copied()))
}

#[test]
fn every_bundled_scenario_validates() {
    assert!(catalog::BUNDLED.len() >= 12);
    for (name, text) in catalog::BUNDLED {
        let v = prepare(text, None).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(v.scenario.name, *name);
    }
}

#[test]
fn list_and_describe() {
    assert_eq!(code(&["list"]), 0);
    let d = catalog::describe("hirosawa_nakazawa").unwrap();
    assert!(d.contains("t²E(t) → 0"));
    assert!(d.contains("overdamping_mu2"));
    assert!(catalog::describe("unknown").is_err());
    assert_eq!(code(&["describe", "unknown"]), 2);
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(code(&[]), 2);
    assert_eq!(code(&["run"]), 2);
    assert_eq!(code(&["frobnicate"]), 2);
    assert_eq!(code(&["run", "--scenario", "no_such_scenario"]), 2);
}

const NO_DAMPING: &str = r#"
name = "bad"
dimension = 3
[equation]
[data]
width = 1
u1 = 1
u2 = 0
[frequency_grid]
min = 0.01
max = 5
count = 20
[time_grid]
t_max = 1000
samples = 50
[[analyses]]
kind = "diffusion"
mode = "nishihara"
"#;

#[test]
fn diffusion_without_damping_names_the_field() {
    let e = prepare(NO_DAMPING, None).unwrap_err().to_string();
    assert!(e.contains("equation.damping"), "{e}");
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(&path, NO_DAMPING).unwrap();
    let out = dir.path().join("out");
    assert_eq!(code(&["run", "--scenario", path.to_str().unwrap(), "--out", out.to_str().unwrap()]), 2);
    assert!(!out.exists(), "no partial outputs on validation failure");
}

#[test]
fn parse_errors_carry_a_line() {
    let e = prepare("name = \"x\"\ndimension = 3\n[equation]\nspeed = { family = \"constant\", value = \"abc\" }\n", None).unwrap_err();
    assert!(e.to_string().contains("line 4"), "{e}");
    let e = prepare("name = \"x\"\ndimension = 3\nbogus = 1\n[equation]\n", None).unwrap_err();
    assert!(e.to_string().contains("bogus"), "{e}");
}

#[test]
fn tolerance_override_is_range_checked() {
    let t = catalog::find("borg_constant_speed").unwrap();
    assert!(prepare(t, Some(1e-3)).is_err());
    assert!(prepare(t, Some(1e-14)).is_err());
    assert_eq!(prepare(t, Some(1e-9)).unwrap().tol, 1e-9);
    assert_eq!(code(&["run", "--scenario", "borg_constant_speed", "--tol-override", "1e-2"]), 2);
}

#[test]
fn run_writes_reports_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("borg");
    assert_eq!(code(&["run", "--scenario", "borg_constant_speed", "--out", out.to_str().unwrap(), "--threads", "2"]), 0);
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["pass"], true);
    assert!(out.join("scan_discriminant_0.csv").exists());
    assert!(out.join("plot.py").exists());

    let fail = dir.path().join("growth");
    assert_eq!(code(&["run", "--scenario", "yagdjian_growth", "--out", fail.to_str().unwrap()]), 1);
    assert!(fail.join("trace_growth_0.csv").exists());
}

#[test]
fn free_wave_verification_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("free");
    assert_eq!(code(&["run", "--scenario", "free_conservation", "--out", out.to_str().unwrap()]), 0);
}

#[test]
fn numeric_failures_map_to_exit_3() {
    let r = RunReport {
        schema_version: 1,
        scenario: "x".into(),
        tol: 1e-10,
        analyses: Vec::new(),
        verifications: Vec::new(),
        checks: Vec::new(),
        counters: Default::default(),
        pass: false,
        wall_time_s: 0.0,
        numeric_failure: true,
    };
    assert_eq!(r.exit_code(), 3);
    assert_eq!(RunReport { numeric_failure: false, ..r.clone() }.exit_code(), 1);
    assert_eq!(RunReport { numeric_failure: false, pass: true, ..r }.exit_code(), 0);
}

#[test]
fn selftest_passes() {
    assert_eq!(code(&["selftest", "--threads", "1"]), 0);
}

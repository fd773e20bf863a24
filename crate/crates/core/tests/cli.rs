use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use multisim::cli::config::ConfigDocument;
use multisim::cli::report::{read_records_csv, read_report_csv, RecordRow, ResultBundle};
use multisim::cli::suite::{paper_suite, Engines, SuiteOptions};
use multisim::cli::{scenario, SCENARIOS};
use multisim::theories::{JointDistribution, Settings, TheoryError};
use multisim::ExperimentConfig;
use serde_json::Value;
use tempfile::TempDir;

fn multisim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_multisim")).args(args).output().expect("spawn multisim")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_cfg(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn bundled(dir: &Path, name: &str) -> String {
    write_cfg(dir, name, scenario(name)).display().to_string()
}

fn predict_json(args: &[&str]) -> Value {
    let o = multisim(args);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    serde_json::from_str(&stdout(&o)).unwrap()
}

fn prob(v: &Value, key: &str) -> f64 {
    v["probabilities"][key].as_f64().unwrap_or_else(|| panic!("missing {key} in {v}"))
}

#[test]
fn classify_reports_timing() {
    let dir = TempDir::new().unwrap();
    let o = multisim(&["classify", "--config", &bundled(dir.path(), "fig1_rest.cfg")]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("timing: StandardBeforeAfter"), "{}", stdout(&o));
    let o = multisim(&["classify", "--config", &bundled(dir.path(), "fig1_moving.cfg")]);
    assert!(stdout(&o).starts_with("timing: BeforeBefore"), "{}", stdout(&o));
    assert!(stdout(&o).contains("t'(A)"));
}

#[test]
fn superluminal_device_is_rejected_with_line() {
    let dir = TempDir::new().unwrap();
    let text = scenario("fig1_moving.cfg").replace("beta = 0.1", "beta = 1.2");
    let line = text.lines().position(|l| l == "beta = 1.2").unwrap() + 1;
    let path = write_cfg(dir.path(), "fast.cfg", &text);
    let o = multisim(&["classify", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("frame speed violation"), "{err}");
    assert!(err.contains(&format!("fast.cfg:{line}: devices[3].beta")), "{err}");
}

#[test]
fn malformed_config_is_a_validation_error() {
    let dir = TempDir::new().unwrap();
    let path = write_cfg(dir.path(), "bad.cfg", "mode = \"single-particle\"\nbogus = 1\n");
    let o = multisim(&["predict", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn predict_single_particle() {
    let dir = TempDir::new().unwrap();
    let cfg = bundled(dir.path(), "fig1_moving.cfg");
    let ms = predict_json(&["predict", "--config", &cfg, "--model", "ms"]);
    assert_eq!(ms["timing"], "BeforeBefore");
    assert_eq!(prob(&ms, "joint"), 0.25);
    assert_eq!(prob(&ms, "none"), 0.25);
    assert_eq!(prob(&ms, "exclusive"), 0.5);
    let qm = predict_json(&["predict", "--config", &cfg, "--model", "qm"]);
    assert_eq!(prob(&qm, "exclusive_plus"), 0.5);
    assert_eq!(prob(&qm, "exclusive_minus"), 0.5);
    assert_eq!(prob(&qm, "joint"), 0.0);
    assert_eq!(prob(&qm, "none"), 0.0);
}

#[test]
fn predict_two_particle() {
    let dir = TempDir::new().unwrap();
    let bb = bundled(dir.path(), "twoparticle_bb.cfg");
    for (a, b) in [("0", "0"), ("1.3", "-0.4"), ("-2.5", "3.0")] {
        let v = predict_json(&["predict", "--config", &bb, "--alpha", a, "--beta", b]);
        for code in ["++", "+-", "-+", "--"] {
            assert_eq!(prob(&v, code), 0.25);
        }
        assert_eq!(prob(&v, "E"), 0.0);
    }
    let std = bundled(dir.path(), "twoparticle_std.cfg");
    let v = predict_json(&["predict", "--config", &std, "--alpha", "0", "--beta", "0"]);
    assert!((prob(&v, "++") - 0.5).abs() < 1e-15);
    assert!((prob(&v, "E") - 1.0).abs() < 1e-15);
}

#[test]
fn boundary_timing_is_undefined_under_ms() {
    let dir = TempDir::new().unwrap();
    let mut doc = ConfigDocument::parse(scenario("twoparticle_std.cfg")).unwrap();
    doc.devices[2].t = doc.devices[1].t;
    let path = write_cfg(dir.path(), "boundary.cfg", &doc.to_toml());
    let p = path.to_str().unwrap();
    let o = multisim(&["predict", "--config", p, "--model", "ms"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let o = multisim(&["run", "--config", p, "--out", dir.path().join("r").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let o = multisim(&["predict", "--config", p, "--model", "qm"]);
    assert_eq!(o.status.code(), Some(0));
    let o = multisim(&["classify", "--config", p]);
    assert!(stdout(&o).starts_with("timing: Boundary"));
}

#[test]
fn io_failures_exit_4() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("nope.cfg");
    assert_eq!(multisim(&["classify", "--config", missing.to_str().unwrap()]).status.code(), Some(4));
    let blocker = write_cfg(dir.path(), "file", "");
    let cfg = bundled(dir.path(), "fig1_rest.cfg");
    let o = multisim(&["run", "--config", &cfg, "--out", blocker.to_str().unwrap(), "--trials", "10"]);
    assert_eq!(o.status.code(), Some(4));
}

fn run_report(dir: &Path, cfg: &str, format: &str) -> (PathBuf, PathBuf) {
    let out = dir.join(format!("out-{cfg}-{format}"));
    let path = bundled(dir, cfg);
    let o = multisim(&["run", "--config", &path, "--out", out.to_str().unwrap(), "--format", format]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    (out.join(format!("records.{format}")), out.join(format!("report.{format}")))
}

fn row(rows: &[multisim::cli::report::Row], key: &str) -> (f64, f64) {
    let r = rows.iter().find(|r| r.key == key).unwrap_or_else(|| panic!("no row {key}"));
    (r.value, r.stderr.unwrap_or(0.0))
}

#[test]
fn chsh_runs_match_expectations() {
    let dir = TempDir::new().unwrap();
    let (_, report) = run_report(dir.path(), "chsh_qm.cfg", "csv");
    let rows = read_report_csv(&fs::read_to_string(report).unwrap()).unwrap();
    let (s, se) = row(&rows, "chsh.S");
    assert!((s - 2.0 * 2f64.sqrt()).abs() <= 4.0 * se, "S = {s} ± {se}");
    assert_eq!(row(&rows, "chsh.violates_local_bound").0, 1.0);
    assert_eq!(row(&rows, "signaling.detected").0, 0.0);

    let (_, report) = run_report(dir.path(), "chsh_bb.cfg", "csv");
    let rows = read_report_csv(&fs::read_to_string(report).unwrap()).unwrap();
    let (s, se) = row(&rows, "chsh.S");
    assert!(s.abs() <= 4.0 * se, "S = {s} ± {se}");
    assert_eq!(row(&rows, "chsh.S_analytic").0, 0.0);
    assert_eq!(row(&rows, "chsh.violates_local_bound").0, 0.0);
}

#[test]
fn reruns_are_byte_identical() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    for format in ["csv", "json"] {
        let (ra, pa) = run_report(a.path(), "twoparticle_bb.cfg", format);
        let (rb, pb) = run_report(b.path(), "twoparticle_bb.cfg", format);
        assert_eq!(fs::read(ra).unwrap(), fs::read(rb).unwrap());
        assert_eq!(fs::read(pa).unwrap(), fs::read(pb).unwrap());
    }
}

#[test]
fn seed_changes_records() {
    let dir = TempDir::new().unwrap();
    let cfg = bundled(dir.path(), "fig1_moving.cfg");
    let mut files = Vec::new();
    for seed in ["1", "2"] {
        let out = dir.path().join(seed);
        let o = multisim(&["run", "--config", &cfg, "--out", out.to_str().unwrap(), "--seed", seed, "--trials", "500"]);
        assert_eq!(o.status.code(), Some(0));
        files.push(fs::read(out.join("records.csv")).unwrap());
    }
    assert_ne!(files[0], files[1]);
}

#[test]
fn csv_and_json_agree() {
    let dir = TempDir::new().unwrap();
    for cfg in ["chsh_qm.cfg", "fig1_moving.cfg"] {
        let (rc, pc) = run_report(dir.path(), cfg, "csv");
        let (rj, pj) = run_report(dir.path(), cfg, "json");

        let csv_records = read_records_csv(&fs::read_to_string(rc).unwrap()).unwrap();
        let json_records: Vec<RecordRow> = serde_json::from_str(&fs::read_to_string(rj).unwrap()).unwrap();
        assert_eq!(csv_records, json_records);

        let csv_rows = read_report_csv(&fs::read_to_string(pc).unwrap()).unwrap();
        let bundle: ResultBundle = serde_json::from_str(&fs::read_to_string(pj).unwrap()).unwrap();
        assert_eq!(csv_rows, bundle.rows());
    }
}

#[test]
fn bundled_configs_round_trip() {
    for (name, text) in SCENARIOS {
        let doc = ConfigDocument::parse(text).unwrap_or_else(|e| panic!("{name}: {e}"));
        let again = ConfigDocument::parse(&doc.to_toml()).unwrap();
        assert_eq!(doc, again, "{name}");
        let back = ConfigDocument::from_plan(&doc.plan());
        assert_eq!(back.plan(), doc.plan(), "{name}");
    }
}

#[test]
fn paper_suite_passes() {
    let dir = TempDir::new().unwrap();
    let o = multisim(&["paper-suite", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let report: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("suite_report.json")).unwrap()).unwrap();
    let rows = report["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 9);
    assert!(rows.iter().all(|r| r["passed"] == true && r["widened"] == false));
    assert!(dir.path().join("suite_report.txt").exists());
}

#[test]
fn small_trial_counts_are_flagged_as_widened() {
    let report = paper_suite(
        &SuiteOptions {
            trials: Some(100),
            ..SuiteOptions::default()
        },
        &Engines::default(),
    );
    for id in [1, 2, 3, 4, 5, 7, 9] {
        assert!(report.row(id).widened, "criterion {id}");
    }
    for id in [6, 8] {
        assert!(!report.row(id).widened, "criterion {id}");
    }
    assert!(report.table().contains("yes"));
}

fn broken_ms(cfg: &ExperimentConfig, a: f64, b: f64) -> Result<JointDistribution, TheoryError> {
    let d = multisim::theories::qm_predict(cfg, a, b)?;
    let mut probs = d.probs;
    probs.swap(0, 1);
    Ok(JointDistribution { probs, settings: Settings::new(a, b), ..d })
}

#[test]
fn tampered_engine_fails_the_suite() {
    let engines = Engines {
        ms: broken_ms,
        ..Engines::default()
    };
    let report = paper_suite(
        &SuiteOptions {
            trials: Some(2000),
            ..SuiteOptions::default()
        },
        &engines,
    );
    assert!(!report.row(6).passed);
    assert!(!report.all_passed());
    let mut sink = Vec::new();
    let err = multisim::cli::suite::cmd_paper_suite(&SuiteOptions { trials: Some(2000), ..Default::default() }, &engines, &mut sink)
        .unwrap_err();
    assert_eq!(err.exit_code(), 1);
}

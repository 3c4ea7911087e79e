use std::path::PathBuf;
use std::process::{Command, Output};

use msl_transfer::finite_well_oracle;

fn structure(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../structures").join(name)
}

fn msltm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_msltm")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

/// Data rows of a `--no-meta` CSV as string fields.
fn rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines().skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

fn write_temp(dir: &tempfile::TempDir, name: &str, text: &str) -> String {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn valid_files_validate() {
    for name in ["finite_well.toml", "kronig_penney.toml", "sh_pzt_aba.toml", "evanescent_aba.toml"] {
        let o = msltm(&["validate", "--structure", structure(name).to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{name}: {}", stderr(&o));
    }
}

#[test]
fn negative_thickness_is_invalid_input_naming_the_layer() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(structure("finite_well.toml")).unwrap().replace("thickness = 2.0", "thickness = -2.0");
    let path = write_temp(&dir, "bad.toml", &text);
    let o = msltm(&["validate", "--structure", &path]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("layer 0"), "{}", stderr(&o));
}

#[test]
fn lossy_media_need_the_flag() {
    let path = structure("lossy.toml");
    let path = path.to_str().unwrap();
    assert_eq!(msltm(&["validate", "--structure", path]).status.code(), Some(3));
    assert_eq!(msltm(&["validate", "--structure", path, "--allow-lossy"]).status.code(), Some(0));
}

#[test]
fn missing_file_and_bad_flags() {
    assert_eq!(msltm(&["validate", "--structure", "/nonexistent.toml"]).status.code(), Some(2));
    let well = structure("finite_well.toml");
    let well = well.to_str().unwrap();
    assert_eq!(msltm(&["escape", "--structure", well, "--range", "3:1"]).status.code(), Some(1));
    assert_eq!(msltm(&["escape", "--structure", well, "--range", "0:1", "--tol=-1"]).status.code(), Some(1));
    assert_eq!(msltm(&["escape", "--structure", well, "--range", "0:1", "--variant", "t"]).status.code(), Some(2));
    assert_eq!(msltm(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(msltm(&["--help"]).status.code(), Some(0));
}

#[test]
fn finite_well_escape_matches_oracle() {
    let o = msltm(&["escape", "--structure", structure("finite_well.toml").to_str().unwrap(), "--range", "0:10", "--no-meta"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = stdout(&o);
    assert_eq!(csv.lines().next(), Some("parameter,root,residual,variant"));
    let oracle = finite_well_oracle(10.0, 2.0, 1.0, 1.0).unwrap();
    let got = rows(&csv);
    assert_eq!(got.len(), 3);
    for (row, level) in got.iter().zip(&oracle) {
        let root: f64 = row[1].parse().unwrap();
        assert!((root - level.energy).abs() < 1e-8);
        assert_eq!(row[3], "H");
    }
}

#[test]
fn empty_root_set_is_header_only() {
    let o = msltm(&["escape", "--structure", structure("finite_well.toml").to_str().unwrap(), "--range", "0.01:1"]);
    assert_eq!(o.status.code(), Some(0));
    let expected = format!("# msltm {}\nparameter,root,residual,variant\n", env!("CARGO_PKG_VERSION"));
    assert_eq!(stdout(&o), expected);
}

#[test]
fn free_bands_fold_the_parabola() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bands.csv");
    let o = msltm(&[
        "bands",
        "--structure",
        structure("free_period.toml").to_str().unwrap(),
        "--grid",
        "0.3:2.7:3",
        "--range",
        "0.05:60",
        "--samples",
        "800",
        "--out",
        out.to_str().unwrap(),
        "--no-meta",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(out).unwrap();
    assert!(csv.starts_with("q,energy,residual,branch,status,jump\n"));
    let data = rows(&csv);
    for q in [0.3, 1.5, 2.7] {
        let mut got: Vec<f64> = data
            .iter()
            .filter(|r| (r[0].parse::<f64>().unwrap() - q).abs() < 1e-12 && r[4] == "ok")
            .map(|r| r[1].parse().unwrap())
            .collect();
        got.sort_by(f64::total_cmp);
        let mut expected: Vec<f64> = (-2..=2)
            .map(|n| (q + 2.0 * std::f64::consts::PI * n as f64).powi(2))
            .filter(|e| *e > 0.05 && *e < 60.0)
            .collect();
        expected.sort_by(f64::total_cmp);
        assert_eq!(got.len(), expected.len(), "q = {q}: {got:?}");
        for (g, e) in got.iter().zip(&expected) {
            assert!((g - e).abs() < 1e-8, "{g} vs {e}");
        }
    }
}

fn band_roots(variant: &str) -> Vec<f64> {
    let o = msltm(&[
        "bands",
        "--structure",
        structure("kronig_penney.toml").to_str().unwrap(),
        "--grid",
        "0.2:1.4:4",
        "--range",
        "0.05:25",
        "--samples",
        "1200",
        "--variant",
        variant,
        "--no-meta",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    rows(&stdout(&o)).iter().filter(|r| r[4] == "ok").map(|r| r[1].parse().unwrap()).collect()
}

#[test]
fn kronig_penney_bands_agree_between_forms() {
    let h = band_roots("h");
    let t = band_roots("t");
    assert!(h.len() >= 8);
    assert_eq!(h.len(), t.len());
    for (a, b) in h.iter().zip(&t) {
        assert!((a - b).abs() < 1e-8, "{a} vs {b}");
    }
}

#[test]
fn transfer_form_masks_overflow_behind_huge_barriers() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(structure("kronig_penney.toml"))
        .unwrap()
        .replace("material = \"barrier\"\nthickness = 1.0", "material = \"barrier\"\nthickness = 400.0");
    let path = write_temp(&dir, "thick.toml", &text);
    let o = msltm(&["bands", "--structure", &path, "--grid", "0:0.1:2", "--range", "0.5:5", "--samples", "50", "--variant", "t"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let data = stdout(&o);
    assert!(data.lines().any(|l| l.ends_with(",overflow,false")), "{data}");
}

#[test]
fn zero_thickness_stability_point() {
    let o = msltm(&["stability", "--structure", structure("evanescent_aba.toml").to_str().unwrap(), "--grid", "0:0:1", "--no-meta"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = stdout(&o);
    let header: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
    let row = &rows(&csv)[0];
    let col = |name: &str| row[header.iter().position(|h| *h == name).unwrap()].as_str();
    assert_eq!(col("e_status"), "not_computable");
    assert_eq!(col("h11_norm").parse::<f64>().unwrap(), 0.0);
    assert_eq!(col("h12_norm").parse::<f64>().unwrap(), 1.0);
    assert_eq!(col("h21_norm").parse::<f64>().unwrap(), 1.0);
}

#[test]
fn evanescent_sweep_shows_transfer_failure_and_hybrid_stability() {
    let o = msltm(&["stability", "--structure", structure("evanescent_aba.toml").to_str().unwrap(), "--grid", "1:100:100", "--no-meta"]);
    assert_eq!(o.status.code(), Some(0));
    let csv = stdout(&o);
    let header: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
    let idx = |name: &str| header.iter().position(|h| *h == name).unwrap();
    let data = rows(&csv);
    assert_eq!(data.len(), 100);
    let broken = data.iter().filter(|r| r[idx("t_status")] != "ok" || r[idx("det_drift")].parse::<f64>().unwrap() >= 1.0);
    assert!(broken.count() > 50);
    assert!(data.iter().all(|r| r[idx("h11_norm")].parse::<f64>().unwrap().is_finite()));
}

#[test]
fn output_is_byte_identical_across_runs() {
    let path = structure("sh_pzt_aba.toml");
    let args = ["escape", "--structure", path.to_str().unwrap(), "--range", "2265:2596", "--samples", "400"];
    let a = msltm(&args);
    let b = msltm(&[&args[..], &["--threads", "1"]].concat());
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    assert!(!rows(&stdout(&a)).is_empty());
}

#[test]
fn json_mirrors_the_scan() {
    let o = msltm(&["escape", "--structure", structure("finite_well.toml").to_str().unwrap(), "--range", "0:10", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["msltm"], env!("CARGO_PKG_VERSION"));
    assert_eq!(v["result"]["roots"].as_array().unwrap().len(), 3);
    assert_eq!(v["result"]["parameter"], "energy");
}

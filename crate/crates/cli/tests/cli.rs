use serde_json::Value;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("rotstar-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    d
}

fn rotstar(args: &[&str], out: Option<&Path>) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_rotstar"));
    c.args(args);
    if let Some(o) = out {
        c.arg("--out").arg(o);
    }
    c.output().expect("run rotstar")
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn verify(dir: &Path) -> Output {
    rotstar(&["verify", "--dir", dir.to_str().unwrap(), "--samples", "500"], None)
}

#[test]
fn lane_emden_n1_reaches_pi() {
    let d = scratch("le");
    let o = rotstar(&["lane-emden", "--n", "1"], Some(&d));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let xi1 = manifest(&d)["data"]["xi1"].as_f64().unwrap();
    assert!((xi1 - std::f64::consts::PI).abs() < 1e-8);
    assert!(verify(&d).status.success());
}

#[test]
fn inverse_oblate_holds_and_prolate_is_flagged() {
    let d = scratch("oblate");
    let o = rotstar(&["inverse", "--density", "ellipsoid:a=1.2,b=0.8"], Some(&d));
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(&d);
    let verdict: Vec<&str> = m["data"]["verdict"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert!(verdict.contains(&"h4") && verdict.contains(&"a'"), "{verdict:?}");
    assert!(verify(&d).status.success());

    let d = scratch("prolate");
    let o = rotstar(&["inverse", "--density", "ellipsoid:a=0.8,b=1.2", "--nr", "65"], Some(&d));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn variational_reports_positive_multiplier() {
    let d = scratch("var");
    let o = rotstar(
        &["solve-variational", "--gamma", "1.5", "--radius", "4", "--p", "auto", "--nr", "65"],
        Some(&d),
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let lambda = manifest(&d)["data"]["lambda"].as_f64().unwrap();
    assert!(lambda > 0.0);
}

#[test]
fn verify_detects_corruption() {
    let d = scratch("mono");
    let o = rotstar(&["solve-monotone", "--nr", "33"], Some(&d));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(verify(&d).status.success());

    let path = d.join("w.axifield");
    let text = std::fs::read_to_string(&path).unwrap();
    let field = rotstar::field::parse_axifield(&text).unwrap();
    let mut v = field.values().to_vec();
    let k = v.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
    v[k] *= 1.1;
    let bad = rotstar::field::ScalarField::from_values(*field.grid(), v, field.parity()).unwrap();
    rotstar::field::write_axifield(&path, &bad).unwrap();
    assert_eq!(verify(&d).status.code(), Some(2));
}

#[test]
fn verify_on_empty_directory_is_an_input_error() {
    let d = scratch("empty");
    std::fs::create_dir_all(&d).unwrap();
    assert_eq!(verify(&d).status.code(), Some(1));
}

#[test]
fn config_errors_carry_line_numbers() {
    let d = scratch("cfg");
    std::fs::create_dir_all(&d).unwrap();
    let cfg = d.join("run.cfg");
    std::fs::write(&cfg, "# run\n[eos]\ngamma = 3\n\n[grid]\nnr = lots\n").unwrap();
    let o = rotstar(&["solve-monotone", "--config", cfg.to_str().unwrap()], Some(&d.join("out")));
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains(":6"), "{err}");

    let o = rotstar(&["solve-monotone", "--gamma", "1.5"], Some(&d.join("out2")));
    assert_eq!(o.status.code(), Some(1));
    let o = rotstar(&["solve-monotone", "--no-such-flag", "1"], None);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn flags_override_the_run_file() {
    let d = scratch("override");
    std::fs::create_dir_all(&d).unwrap();
    let cfg = d.join("run.cfg");
    std::fs::write(&cfg, "n = 0\n").unwrap();
    let out = d.join("out");
    let o = rotstar(&["lane-emden", "--config", cfg.to_str().unwrap(), "--n", "1"], Some(&out));
    assert!(o.status.success());
    assert!((manifest(&out)["data"]["xi1"].as_f64().unwrap() - std::f64::consts::PI).abs() < 1e-8);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let (a, b) = (scratch("det-a"), scratch("det-b"));
    for d in [&a, &b] {
        assert!(rotstar(&["gravity-test", "--nr", "33"], Some(d)).status.success());
    }
    for f in ["potential.axifield", "gravity.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sanov_dual::AlphaSpec;
use sanov_dual_cli::to_json;
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sanov-dual"))
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn run(sub: &str, cfg: &str, out: Option<&Path>, extra: &[&str]) -> Output {
    let mut c = bin();
    c.arg(sub).arg("--config").arg(config(cfg)).args(extra);
    if let Some(dir) = out {
        c.arg("--out").arg(dir);
    }
    c.output().expect("binary runs")
}

fn report(dir: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn shortfall_report_matches_library_and_golden_file() {
    let dir = tempfile::tempdir().unwrap();
    let o = run("rho", "rho_shortfall.json", Some(dir.path()), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let written = std::fs::read(dir.path().join("report.json")).unwrap();

    let cfg: Value = serde_json::from_slice(&std::fs::read(config("rho_shortfall.json")).unwrap()).unwrap();
    let spec: AlphaSpec = serde_json::from_value(cfg["spec"].clone()).unwrap();
    let f: Vec<f64> = serde_json::from_value(cfg["f"].clone()).unwrap();
    let lib = spec.evaluate(&f);
    assert_eq!(written, to_json(&lib).unwrap());

    let golden = std::fs::read(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/rho_shortfall.json")).unwrap();
    assert_eq!(written, golden);

    // the value solves Σ μᵢ ((1 + fᵢ − m)⁺)² = 1
    let m = lib.value.value();
    let mu = [0.25, 0.25, 0.5];
    let s: f64 = mu.iter().zip(&f).map(|(p, x)| p * (1.0 + x - m).max(0.0).powi(2)).sum();
    assert!((s - 1.0).abs() < 1e-12, "{s}");
}

#[test]
fn entropy_of_zero_is_zero() {
    let o = run("rho", "rho_entropy_zero.json", None, &[]);
    assert_eq!(o.status.code(), Some(0));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.starts_with("value 0\n"), "{stdout}");
    assert!(stdout.contains("method ClosedForm"));
}

#[test]
fn malformed_config_exits_2_and_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"spec":{"kind":"RelativeEntropy","mu":[0.5,0.5]},"f":[0,1],"extra":1}"#).unwrap();
    let o = bin().arg("rho").arg("--config").arg(&path).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("extra"));

    std::fs::write(&path, r#"{"spec":{"kind":"RelativeEntropy","mu":[0.5,"x"]},"f":[0,1]}"#).unwrap();
    let o = bin().arg("rho").arg("--config").arg(&path).output().unwrap();
    assert_eq!(o.status.code(), Some(2));

    std::fs::write(&path, r#"{"spec":{"kind":"RelativeEntropy","mu":[0.5,0.5]},"f":[0,1,2]}"#).unwrap();
    let o = bin().arg("rho").arg("--config").arg(&path).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("`f`"));

    let o = bin().arg("sanov").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn negative_weights_are_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("neg.json");
    std::fs::write(&path, r#"{"spec":{"kind":"RelativeEntropy","mu":[1.5,-0.5]},"f":[0,1]}"#).unwrap();
    let o = bin().arg("rho").arg("--config").arg(&path).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn deviation_bound_flags() {
    let o = bin().args(["cramer", "--Mq", "1", "--r", "2", "--q", "2", "--n", "100"]).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(String::from_utf8(o.stdout).unwrap(), "0.01\n");
    let o = bin().args(["cramer", "--Mq", "1", "--r", "0.5", "--q", "2", "--n", "100"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn too_few_replications_exit_4() {
    let o = run("tailbound", "tailbound_too_few_reps.json", None, &[]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn superhedge_certificate() {
    for cfg in ["superhedge.json", "superhedge_sanov.json"] {
        let dir = tempfile::tempdir().unwrap();
        let o = run("superhedge", cfg, Some(dir.path()), &[]);
        assert_eq!(o.status.code(), Some(0));
        let r = report(dir.path());
        assert!(r["residual"].as_f64().unwrap() <= 1e-8);
        assert!(r["max_slice_rho"].as_f64().unwrap() <= 1e-7);
    }
}

#[test]
fn sanov_reports() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run("sanov", "sanov_linear.json", Some(dir.path()), &[]).status.code(), Some(0));
    let r = report(dir.path());
    assert!(r["gaps"].as_array().unwrap().iter().all(|g| g.as_f64().unwrap() <= 1e-12));
    let csv = std::fs::read_to_string(dir.path().join("sanov.csv")).unwrap();
    assert!(csv.starts_with("n,v_n,target,gap\n"));

    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run("sanov", "sanov_set_indicator.json", Some(dir.path()), &[]).status.code(), Some(0));
    let r = report(dir.path());
    let v: Vec<f64> = r["values"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert!(v.windows(2).all(|w| w[1] >= w[0]), "{v:?}");

    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run("sanov", "sanov_classical.json", Some(dir.path()), &[]).status.code(), Some(0));
    let gaps = report(dir.path())["gaps"].clone();
    assert!(gaps[3].as_f64().unwrap() <= 0.05);
}

#[test]
fn transport_and_cramer_tables() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run("transport", "transport.json", Some(dir.path()), &[]).status.code(), Some(0));
    let r = report(dir.path());
    let c = &r["control"];
    assert!((c["control_value"].as_f64().unwrap() - c["rho_n"].as_f64().unwrap()).abs() <= 1e-10);

    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run("cramer", "cramer_finite.json", Some(dir.path()), &[]).status.code(), Some(0));
    let r = report(dir.path());
    assert_eq!(r["minorant_holds"], Value::Bool(true));
    let csv = std::fs::read_to_string(dir.path().join("lambda_star.csv")).unwrap();
    assert!(csv.starts_with("grid_point,value\n"));
}

#[test]
fn reruns_are_hash_equal() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for (sub, cfg) in [("tailbound", "tailbound_pareto_small.json"), ("rho", "rho_transport_generic.json")] {
        assert_eq!(run(sub, cfg, Some(a.path()), &["--seed", "7", "--threads", "1"]).status.code(), Some(0));
        assert_eq!(run(sub, cfg, Some(b.path()), &["--seed", "7", "--threads", "2"]).status.code(), Some(0));
        let ma = std::fs::read(a.path().join("manifest.json")).unwrap();
        assert_eq!(ma, std::fs::read(b.path().join("manifest.json")).unwrap());
        let m: Value = serde_json::from_slice(&ma).unwrap();
        for o in m["outputs"].as_array().unwrap() {
            let f = o["file"].as_str().unwrap();
            let bytes = std::fs::read(a.path().join(f)).unwrap();
            assert_eq!(sanov_dual_cli::sha256_hex(&bytes), o["sha256"].as_str().unwrap());
        }
    }
}

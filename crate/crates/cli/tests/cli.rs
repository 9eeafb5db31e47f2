use std::path::Path;
use std::process::{Command, Output};

use skewmix::manifest::sha256_hex;
use skewmix_core::bundled;

fn skewmix(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_skewmix"))
        .args(args)
        .arg("--out-dir")
        .arg(dir)
        .env_remove("SKEWMIX_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn manifest(dir: &Path, name: &str) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join(format!("{name}.manifest.json"))).unwrap()).unwrap()
}

#[test]
fn validate_tripling() {
    let d = tempfile::tempdir().unwrap();
    let o = skewmix(d.path(), &["validate", "--config", "tripling_cos.json"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("lambda_tilde,3.0000000000000000e0\r\n"));
    assert!(out.contains("c1,6.2831853071795862e0\r\n"));
    let m = manifest(d.path(), "validate");
    assert_eq!(m["config"]["sha256"], sha256_hex(bundled::TRIPLING_COS.as_bytes()));
    assert_eq!(m["constants"]["scheme"]["beta"], 1.5);
    assert!(m["wall_time_s"].as_f64().unwrap() >= 0.0);
    assert_eq!(m["tool_version"], env!("CARGO_PKG_VERSION"));
}

#[test]
fn validate_doubling_fails() {
    let d = tempfile::tempdir().unwrap();
    let o = skewmix(d.path(), &["validate", "--config", "doubling.json"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("not expanding"));
}

#[test]
fn config_from_file() {
    let d = tempfile::tempdir().unwrap();
    let path = d.path().join("map.json");
    std::fs::write(&path, bundled::PERTURBED).unwrap();
    let o = skewmix(d.path(), &["validate", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(manifest(d.path(), "validate")["config"]["source"], path.to_str().unwrap());
    std::fs::write(&path, "{\"f\": 3}").unwrap();
    let o = skewmix(d.path(), &["validate", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn usage_errors() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(skewmix(d.path(), &["validate", "--bogus"]).status.code(), Some(1));
    assert_eq!(skewmix(d.path(), &["growth", "--omega0", "0.1", "--n", "2", "--eps", "1e-3"]).status.code(), Some(1));
    assert_eq!(skewmix(d.path(), &["--help"]).status.code(), Some(0));
    assert_eq!(skewmix(d.path(), &["spectrum", "--b", "1"]).status.code(), Some(1));
    assert_eq!(skewmix(d.path(), &["cohomology", "--grid", "1000"]).status.code(), Some(1));
    assert_eq!(skewmix(d.path(), &["suite", "--only", "12"]).status.code(), Some(1));
}

#[test]
fn preimage_cap_is_a_numerical_failure() {
    let d = tempfile::tempdir().unwrap();
    let o = skewmix(d.path(), &["preimages", "--y", "0.5", "--n", "20"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn preimages_table() {
    let d = tempfile::tempdir().unwrap();
    let o = skewmix(d.path(), &["preimages", "--y", "0.5", "--n", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let lines: Vec<&str> = out.split("\r\n").filter(|l| !l.is_empty()).collect();
    assert_eq!(lines[0], "word,x,J_n,tau_n,dtau_n");
    assert_eq!(lines.len(), 10);
    assert!(lines[5].starts_with("1-1,5.0000000000000000e-1,"));
    assert_eq!(std::fs::read_to_string(d.path().join("preimages.csv")).unwrap(), out);
}

#[test]
fn output_is_independent_of_threads() {
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    for args in [&["phi", "--n", "5", "--samples", "16"][..], &["vdc"][..], &["spectrum", "--b", "12", "--grid", "4096"][..]] {
        let a = skewmix(d1.path(), &[args, &["--threads", "1"]].concat());
        let b = skewmix(d2.path(), &[args, &["--threads", "3"]].concat());
        assert_eq!(a.status.code(), Some(0), "{args:?}");
        assert_eq!(a.stdout, b.stdout, "{args:?}");
        assert_eq!(manifest(d1.path(), args[0])["threads"], 1);
        assert_eq!(manifest(d2.path(), args[0])["threads"], 3);
    }
}

#[test]
fn threads_from_environment() {
    let d = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_skewmix"))
        .args(["validate", "--out-dir"])
        .arg(d.path())
        .env("SKEWMIX_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(manifest(d.path(), "validate")["threads"], 2);
}

#[test]
fn growth_readings() {
    let d = tempfile::tempdir().unwrap();
    let o = skewmix(d.path(), &["growth", "--omega0", "0,0.05", "--n", "6", "--eps", "1e-4", "--own-endpoints-only"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.starts_with("n,pieces,lhs,rhs,pass\r\n"));
    assert_eq!(out.matches(",true\r\n").count(), 7);
    let o = skewmix(d.path(), &["growth", "--omega0", "0,0.05", "--n", "6", "--eps", "1e-4"]);
    assert!(stdout(&o).ends_with(",false\r\n"));
    let o = skewmix(d.path(), &["growth", "--omega0", "0,0.5", "--n", "2", "--eps", "1e-4"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn vdc_closed_form_json() {
    let d = tempfile::tempdir().unwrap();
    let o = skewmix(d.path(), &["vdc", "--suite", "closed-form", "--out", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let row = &v[0];
    assert!((row["integral_abs"].as_f64().unwrap() - 2.0 / std::f64::consts::PI).abs() < 1e-12);
    assert!(row["integral_abs"].as_f64().unwrap() > row["bound_paper"].as_f64().unwrap());
    assert_eq!(row["pass"], true);
    assert!(d.path().join("vdc.json").is_file());
}

#[test]
fn cohomology_writes_theta_and_chi() {
    let d = tempfile::tempdir().unwrap();
    let o = skewmix(d.path(), &["cohomology", "--config", "cohomologous", "--grid", "1024", "--out", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["verdict"], "Cohomologous");
    let chi = std::fs::read_to_string(v["chi_csv_path"].as_str().unwrap()).unwrap();
    assert_eq!(chi.lines().count(), 1025);
    let outputs = manifest(d.path(), "cohomology")["outputs"].as_array().unwrap().len();
    assert_eq!(outputs, 3);
}

#[test]
fn correlation_with_observable_file() {
    let d = tempfile::tempdir().unwrap();
    let obs = d.path().join("obs.json");
    std::fs::write(
        &obs,
        r#"{"g": {"modes": [{"k": 1, "re": "0.5*cos(2*pi*x)"}, {"k": -1, "re": "0.5*cos(2*pi*x)"}]},
            "h": {"modes": [{"k": 1, "re": "0.5"}, {"k": -1, "re": "0.5"}, {"k": 0, "re": "sin(2*pi*x)"}]}}"#,
    )
    .unwrap();
    let o = skewmix(d.path(), &["correlation", "--obs", obs.to_str().unwrap(), "--nmax", "5", "--config", "perturbed"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    let mut lines = out.split("\r\n").filter(|l| !l.is_empty());
    assert_eq!(lines.next().unwrap(), "n,cor_fourier_re,cor_fourier_im,cor_direct,zeta_fit,r2,cor_direct_im,tail_bound");
    for l in lines {
        let f: Vec<f64> = l.split(',').map(|s| s.parse().unwrap()).collect();
        assert!((f[1] - f[3]).abs() < 1e-6, "{l}");
    }
}

#[test]
fn suite_runs_selected_criteria() {
    let d = tempfile::tempdir().unwrap();
    let o = skewmix(d.path(), &["suite", "--only", "5,10"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.starts_with("criterion,name,pass,seconds,details,info\r\n"));
    assert_eq!(out.matches(",true,").count(), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("[PASS] criterion 10"));
}

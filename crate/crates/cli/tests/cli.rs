use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use trace_sharp::geometry::{CurvatureData, CurvatureParts};

fn run(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_trace-sharp"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("TRACE_SHARP_THREADS")
        .output()
        .expect("binary runs")
}

fn report(out: &Path, name: &str) -> Value {
    serde_json::from_slice(&fs::read(out.join(name)).unwrap()).unwrap()
}

#[test]
fn constants_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["constants", "--n", "3", "--sigma", "0.5"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(dir.path(), "constants.json");
    assert_eq!(r["schema"], "1");
    assert_eq!(r["status"], "pass");
    let s = r["results"]["sharp_constant"].as_f64().unwrap();
    // (2π²)^{-1/3}
    assert!((s - 0.370018484153678).abs() < 1e-12);
    assert_eq!(r["results"]["kappa"], 1.0);
}

#[test]
fn invalid_sigma_exits_2_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("never");
    let o = run(&out, &["constants", "--n", "3", "--sigma", "1.5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
    assert!(!o.stderr.is_empty());
}

#[test]
fn unusable_inputs_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("never");
    for args in [
        &["mu", "--n", "2", "--sigma", "0.5", "--grid", "5,8"][..],
        &["mu", "--n", "2", "--sigma", "0.5", "--alpha-schedule", "10,1"],
        &["sweep", "--n", "3", "--sigma", "0.5", "--eps-min", "0.05"],
        &["verify-appendix", "--n", "3", "--sigma", "0.6"],
        &["geometry", "--n", "3", "--sigma", "0.5", "--curvature", "/nonexistent.json"],
    ] {
        let o = run(&out, args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(!out.exists(), "{args:?}");
    }
}

#[test]
fn appendix_identities_pass() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["verify-appendix", "--n", "5", "--sigma", "0.5"]);
    assert!(o.status.success());
    let r = report(dir.path(), "verify-appendix.json");
    let ids = r["results"]["identities"].as_array().unwrap();
    assert_eq!(ids.len(), 4);
    for id in ids {
        assert!(id["rel_err"].as_f64().unwrap() <= 1e-2);
        assert_eq!(id["improves_under_doubling"], true);
    }
}

#[test]
fn bubble_check_passes() {
    let dir = tempfile::tempdir().unwrap();
    for sigma in ["0.5", "0.25"] {
        let o = run(dir.path(), &["bubble-check", "--n", "3", "--sigma", sigma, "--seed", "7"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert_eq!(report(dir.path(), "bubble-check.json")["status"], "pass");
    }
}

#[test]
fn geometry_reads_curvature_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("k.json");
    let data = CurvatureData::from_parts(CurvatureParts::trace_free(7, 1.0)).unwrap();
    fs::write(&path, data.to_json()).unwrap();
    let o = run(dir.path(), &["geometry", "--n", "7", "--sigma", "0.5", "--curvature", path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(dir.path(), "geometry.json");
    assert_eq!(r["results"]["case"], "second_order");
    assert!(r["results"]["second_order"].as_f64().unwrap() < 0.0);
}

#[test]
fn sweep_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["sweep", "--n", "3", "--sigma", "0.5", "--eps-min", "0.005"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut rdr = csv::Reader::from_path(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(rdr.headers().unwrap(), vec!["eps", "mu_eps", "I1", "I2", "boundary_lp", "quotient"]);
    assert_eq!(rdr.records().count(), 4);
}

#[test]
fn mu_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["mu", "--n", "2", "--sigma", "0.5", "--grid", "16,16", "--alpha-schedule", "1,10,100", "--seed", "3"];
    assert!(run(a.path(), &args).status.success());
    let mut threaded = args.to_vec();
    threaded.extend(["--threads", "1"]);
    assert!(run(b.path(), &threaded).status.success());
    for name in ["mu.json", "mu.csv", "mu.ckpt"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name}");
    }
    let r = report(a.path(), "mu.json");
    assert_eq!(r["results"]["below_competitor"], true);
    let bytes = fs::read(a.path().join("mu.ckpt")).unwrap();
    let (h, v) = trace_sharp::rayleigh::decode_checkpoint(&bytes).unwrap();
    assert_eq!(h.model.grid.jx, 16);
    assert_eq!(v.len(), 16 * 16 * 17);
}

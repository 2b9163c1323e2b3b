use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vortex-lab"))
        .args(args)
        .env_remove("VORTEX_LAB_OUT")
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

fn ok(o: &Output) {
    assert_eq!(o.status.code(), Some(0), "stdout:\n{}\nstderr:\n{}", text(&o.stdout), text(&o.stderr));
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn profile_artifact_cites_hashes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("nested/missing/dir");
    let o = lab(&["profile", "--rmax", "40", "--tol", "1e-10", "--out", s(&out)]);
    ok(&o);
    assert!(text(&o.stdout).contains("A1 = 5.8318949"));
    let header = json(&out.join("profile.json"));
    assert_eq!(header["format"], "vortex-profile");
    let config = json(&out.join("config.json"));
    assert_eq!(config["command"], "profile");
    let table = fs::read_to_string(out.join("profile.tsv")).unwrap();
    let hash = header["config_hash"].as_str().unwrap();
    assert!(table.contains(&format!("# config_hash={hash}")));
    assert!(table.contains(&format!("# profile_hash={}", header["profile_hash"].as_str().unwrap())));
}

#[test]
fn short_profile_warns() {
    let dir = tempfile::tempdir().unwrap();
    let o = lab(&["profile", "--rmax", "5", "--out", s(dir.path())]);
    ok(&o);
    assert!(text(&o.stderr).contains("below the recommended"));
}

#[test]
fn energy_of_the_vortex_orbit_vanishes() {
    let dir = tempfile::tempdir().unwrap();
    for (name, extra) in [("plain", vec![]), ("moved", vec!["--shift", "0.5,0", "--phase", "0.3"])] {
        let out = dir.path().join(name);
        let mut args = vec!["energy", "--L", "30", "--N", "256", "--out", s(&out)];
        args.extend(extra);
        ok(&lab(&args));
        let r = json(&out.join("energy.json"));
        let direct = r["agreement"]["direct"].as_f64().unwrap();
        let decomposed = r["agreement"]["decomposed"].as_f64().unwrap();
        assert!(direct.abs() < 1e-6 && decomposed.abs() < 1e-6, "{name}: {direct} {decomposed}");
        assert!(r["p_r_table"].as_array().unwrap().len() == 3);
    }
}

#[test]
fn energy_routes_agree_on_a_bump() {
    let dir = tempfile::tempdir().unwrap();
    ok(&lab(&["energy", "--L", "16", "--N", "128", "--perturb", "bump:0.05", "--out", s(dir.path())]));
    let r = json(&dir.path().join("energy.json"));
    assert!(r["agreement"]["difference"].as_f64().unwrap() < 1e-6);
    assert!(r["agreement"]["direct"].as_f64().unwrap() > 0.0);
    assert!(r["config_hash"].is_string() && r["profile_hash"].is_string());
}

#[test]
fn default_coercivity_is_positive() {
    let dir = tempfile::tempdir().unwrap();
    ok(&lab(&["coercivity", "--out", s(dir.path())]));
    let r = json(&dir.path().join("coercivity.json"));
    assert!(r["min_block_lambda"].as_f64().unwrap() > 0.0);
    let sectors = r["sectors"].as_array().unwrap();
    assert_eq!(sectors.len(), 13);
    for sec in sectors {
        assert!(sec["kappa_estimate"].as_f64().unwrap() > 0.0);
        assert!(sec["identity_residuals"]["q0_factorization"].as_f64().unwrap() < 1e-6);
    }
    for scan in r["window_scan"].as_array().unwrap() {
        assert!(scan["outcome"]["kappa_estimate"].as_f64().unwrap() > 0.0);
    }
}

#[test]
fn unconstrained_phase_sector_has_the_zero_mode() {
    let dir = tempfile::tempdir().unwrap();
    ok(&lab(&["coercivity", "--j", "0", "--no-constraint", "--out", s(dir.path())]));
    let r = json(&dir.path().join("coercivity.json"));
    let sec = &r["sectors"][0];
    assert_eq!(sec["j"], 0);
    assert!(sec["lambda_min"].as_f64().unwrap().abs() < 1e-8);
    assert!(r["phase_zero_mode"]["witness_rho_correlation"].as_f64().unwrap() > 0.999);
}

fn csv_rows(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn unperturbed_evolution_is_flat() {
    let dir = tempfile::tempdir().unwrap();
    ok(&lab(&["evolve", "--L", "12", "--N", "64", "--perturb", "none", "--T", "2", "--out", s(dir.path())]));
    let rows = csv_rows(&dir.path().join("diagnostics.csv"));
    assert!(rows.len() >= 4);
    for r in rows {
        assert!(r[1..].iter().all(|v| *v == 0.0), "{r:?}");
    }
    let m = json(&dir.path().join("manifest.json"));
    assert!(m["truncated"].is_null());
    assert!(dir.path().join("snapshots/snap_0000.bin").exists());
}

#[test]
fn amplitude_sweep_scales_linearly() {
    let dir = tempfile::tempdir().unwrap();
    ok(&lab(&[
        "evolve", "--L", "12", "--N", "64", "--perturb", "bump", "--T", "1", "--amp-sweep", "0.01,0.02", "--out",
        s(dir.path()),
    ]));
    let rows = csv_rows(&dir.path().join("sweep.csv"));
    assert_eq!(rows.len(), 2);
    let ratio = rows[1][2] / rows[0][2];
    assert!((ratio - 1.0).abs() < 0.1, "{ratio}");
    assert!(dir.path().join("amp_01/diagnostics.csv").exists());
}

#[test]
fn config_precedence_file_env_flags() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("cfg.json");
    fs::write(&file, r#"{"half_width": 16.0, "n": 64, "seed": 3, "out": "ignored"}"#).unwrap();
    let root = dir.path().join("root");
    let run = |extra: &[&str]| {
        let mut args = vec!["energy", "--config", s(&file), "--N", "48"];
        args.extend(extra);
        Command::new(env!("CARGO_BIN_EXE_vortex-lab")).args(&args).env("VORTEX_LAB_OUT", &root).output().unwrap()
    };
    ok(&run(&[]));
    let c = json(&root.join("energy/config.json"));
    assert_eq!(c["half_width"], 16.0);
    assert_eq!(c["n"], 48);
    assert_eq!(c["seed"], 3);

    let flagged = dir.path().join("flagged");
    ok(&run(&["--out", s(&flagged)]));
    assert_eq!(json(&flagged.join("config.json"))["n"], 48);

    // the written config reproduces the run and its hash
    let again = dir.path().join("again");
    ok(&lab(&["energy", "--config", s(&flagged.join("config.json")), "--out", s(&again)]));
    assert_eq!(
        json(&again.join("energy.json"))["config_hash"],
        json(&flagged.join("energy.json"))["config_hash"]
    );
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(lab(&["energy", "--bogus"]).status.code(), Some(2));
    assert_eq!(lab(&["evolve", "--perturb", "foo:1"]).status.code(), Some(2));
    let o = lab(&["energy", "--L", "16", "--N", "64", "--R", "100", "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    let o = lab(&["energy", "--config", s(&dir.path().join("nope.json"))]);
    assert_eq!(o.status.code(), Some(2));
    let o = lab(&["modulate", "--L", "16", "--N", "128", "--shift", "4,0", "--guess", "0,0,0", "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(3), "{}", text(&o.stderr));
    assert!(text(&o.stderr).contains("residual history"));
}

#[test]
fn modulation_report() {
    let dir = tempfile::tempdir().unwrap();
    ok(&lab(&[
        "modulate", "--L", "16", "--N", "128", "--perturb", "bump:0.02", "--shift", "0.3,-0.2", "--phase", "0.5",
        "--out", s(dir.path()),
    ]));
    let r = json(&dir.path().join("modulation.json"));
    let a = &r["state"]["a"];
    assert!((a[0].as_f64().unwrap() - 0.3).abs() < 0.05);
    assert!((a[1].as_f64().unwrap() + 0.2).abs() < 0.05);
    assert!(r["state"]["xi"].as_array().unwrap().iter().all(|v| v.as_f64().unwrap().abs() < 1e-10));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "evolve", "--L", "16", "--N", "128", "--perturb", "random:0.02", "--seed", "7", "--T", "1", "--snapshot-stride",
        "1", "--out", s(dir.path()),
    ];
    let files = ["diagnostics.csv", "manifest.json", "config.json", "snapshots/snap_0002.bin", "snapshots/snap_0002.json"];
    ok(&lab(&args));
    let first: Vec<Vec<u8>> = files.iter().map(|f| fs::read(dir.path().join(f)).unwrap()).collect();
    ok(&lab(&args));
    for (f, a) in files.iter().zip(first) {
        assert_eq!(fs::read(dir.path().join(f)).unwrap(), a, "{f}");
    }
}

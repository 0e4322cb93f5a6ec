use std::path::{Path, PathBuf};
use std::process::Command;

fn ybsim() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ybsim"))
}

fn run_ok(args: &[&str]) -> String {
    let out = ybsim().args(args).output().unwrap();
    assert!(out.status.success(), "{:?}: {}", args, String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn data_rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn crystal_two_ions() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c.json");
    run_ok(&["crystal", "--n", "2", "--omega-z-khz", "52", "--mass-amu", "172", "--out", out.to_str().unwrap()]);
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let pos: Vec<f64> = serde_json::from_value(v["result"]["positions_um"].clone()).unwrap();
    assert_eq!(pos.len(), 2);
    assert!((pos[1] - 12.35).abs() < 0.05 && (pos[0] + pos[1]).abs() < 1e-12, "{pos:?}");
    assert_eq!(v["header"]["config"]["omega_z_khz"], 52.0);
    assert_eq!(v["header"]["seed"], 0);
}

#[test]
fn resonant_sweep_is_near_unity() {
    let csv = run_ok(&["prep-sweep", "--scheme", "resonant"]);
    assert!(csv.starts_with("# ybsim prep-sweep"));
    assert!(csv.contains("# scheme = resonant"));
    assert!(csv.contains("alpha_deg,omega_over_gamma,efficiency"));
    let rows = data_rows(&csv);
    assert!(!rows.is_empty());
    for r in rows {
        let eff: f64 = r[2].parse().unwrap();
        assert!(eff >= 0.995, "{r:?}");
    }
}

#[test]
fn missing_config_fails_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("never.json");
    let st = ybsim()
        .args(["crystal", "--config", "/definitely/not/here.conf", "--out", out.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(st.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&st.stderr).contains("here.conf"));
    assert!(!out.exists());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn config_errors_are_aggregated_and_named() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.conf", "b_field_tesla = -1\nmystery_key = 3\n");
    let st = ybsim().args(["prep-sweep", "--config", cfg.to_str().unwrap()]).output().unwrap();
    assert_eq!(st.status.code(), Some(2));
    let err = String::from_utf8_lossy(&st.stderr);
    assert!(err.contains("b_field_tesla") && err.contains(">= 0"), "{err}");
    assert!(err.contains("mystery_key"), "{err}");

    let errors = yb_ion_cli::validate_config("prep-sweep", &[cfg]).unwrap_err();
    assert_eq!(errors.len(), 2);
}

#[test]
fn unknown_subcommand_exits_2_with_usage() {
    let st = ybsim().arg("frobnicate").output().unwrap();
    assert_eq!(st.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&st.stderr).contains("Usage"));
}

#[test]
fn empty_config_echoes_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "empty.conf", "");
    let rc = yb_ion_cli::validate_config("detect-opt", &[cfg.clone()]).unwrap();
    for key in ["dark_rate", "collection_efficiency", "b_field_tesla", "duration_points", "gamma_hz"] {
        assert!(rc.values.contains_key(key), "{key}");
    }
    let text = run_ok(&["trap", "--config", cfg.to_str().unwrap(), "--dry-run"]);
    for key in ["rf_amplitude_v = 400", "dc_voltage_v = 1", "mass_amu = 172", "topology = linear"] {
        assert!(text.contains(key), "{text}");
    }
}

#[test]
fn flags_override_config_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.conf", "n = 5\nomega_z_khz = 40\n");
    let out = run_ok(&["crystal", "--config", cfg.to_str().unwrap(), "--n", "3"]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["result"]["n"], 3);
    assert_eq!(v["header"]["config"]["omega_z_khz"], 40.0);
}

#[test]
fn output_is_deterministic_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (dir.path().join("a.json"), dir.path().join("b.json"), dir.path().join("c.json"));
    for (p, seed) in [(&a, "7"), (&b, "7"), (&c, "8")] {
        run_ok(&["load", "--seed", seed, "--latency-s", "0.1", "--out", p.to_str().unwrap()]);
    }
    let (a, b, c) = (std::fs::read(a).unwrap(), std::fs::read(b).unwrap(), std::fs::read(c).unwrap());
    assert_eq!(a, b);
    assert_ne!(a, c);
    let v: serde_json::Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(v["header"]["seed"], 7);
    let ratio = v["result"]["rates"]["rows"][1]["ratio_to_electron_impact"].as_f64().unwrap();
    assert!((1e2..=1e4).contains(&ratio));
}

#[test]
fn every_subcommand_runs_in_both_formats() {
    let quick: &[&[&str]] = &[
        &["prep-sweep", "--omegas", "1", "--set", "alpha_step_deg=45"],
        &["prep-transient", "--set", "samples=20"],
        &["detect-opt", "--set", "duration_points=5"],
        &["trap", "--topology", "ring"],
        &["crystal", "--n", "4"],
        &["spectrum", "--set", "points=50"],
        &["load"],
    ];
    for args in quick {
        for fmt in ["csv", "json"] {
            let mut full = args.to_vec();
            full.extend(["--format", fmt]);
            let out = run_ok(&full);
            match fmt {
                "csv" => {
                    assert!(out.starts_with(&format!("# ybsim {}", args[0])), "{out}");
                    assert!(!data_rows(&out).is_empty());
                }
                _ => {
                    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
                    assert_eq!(v["header"]["command"], args[0]);
                }
            }
        }
    }
}

#[test]
fn spectrum_accepts_a_custom_table() {
    let dir = tempfile::tempdir().unwrap();
    let table = write(
        dir.path(),
        "t.conf",
        "linewidth_hz = 29e6\ndoppler_fwhm_hz = 0\nabundance_174 = 1\nshift_hz_174 = 100e6\n",
    );
    let out = run_ok(&["spectrum", "--table", table.to_str().unwrap(), "--set", "points=401",
        "--set", "detuning_min_hz=-100e6", "--set", "detuning_max_hz=300e6"]);
    let rows = data_rows(&out);
    let best = rows
        .iter()
        .max_by(|a, b| a[1].parse::<f64>().unwrap().total_cmp(&b[1].parse().unwrap()))
        .unwrap();
    assert!((best[0].parse::<f64>().unwrap() - 100e6).abs() <= 1e6);
}

//! Command-line behavior: exit codes, output shapes and reproducibility.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn presets() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../presets")
}

fn gcco(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gcco"))
        .args(args)
        .output()
        .unwrap()
}

fn run(cmd: &str, config: &Path, out: &Path) -> Output {
    gcco(&[
        cmd,
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ])
}

fn read_csv(path: &Path) -> (String, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().to_string();
    let rows = lines
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect();
    (header, rows)
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn missing_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        "stat-ber",
        &dir.path().join("absent.json"),
        &dir.path().join("o.csv"),
    );
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        (
            "wrong_schema.json",
            r#"{"schema": "gcco/jtol/1", "model": {}, "sj_freq_norm": [0.1], "sj_amp_pp_ui": [0.1]}"#,
        ),
        ("bad_json.json", "{"),
        (
            "unknown_key.json",
            r#"{"schema": "gcco/stat-ber/1", "model": {"tau_ui": 1}, "sj_freq_norm": [0.1], "sj_amp_pp_ui": [0.1]}"#,
        ),
        (
            "bad_phase.json",
            r#"{"schema": "gcco/stat-ber/1", "model": {"sampling_phase_ui": 1.5}, "sj_freq_norm": [0.1], "sj_amp_pp_ui": [0.1]}"#,
        ),
        (
            "bad_axis.json",
            r#"{"schema": "gcco/stat-ber/1", "model": {}, "sj_freq_norm": [0.2, 0.1], "sj_amp_pp_ui": [0.1]}"#,
        ),
    ];
    for (name, text) in cases {
        let cfg = write(dir.path(), name, text);
        let out = run("stat-ber", &cfg, &dir.path().join("o.csv"));
        assert_eq!(
            out.status.code(),
            Some(2),
            "{name}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        assert!(!dir.path().join("o.csv").exists());
    }
}

#[test]
fn runtime_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "sim.json",
        r#"{"schema": "gcco/sim/1", "data_rate_hz": 2.5e9, "n_bits": 5000, "pattern": {"kind": "prbs7"},
            "oscillator": {"f_c_hz": 2.5e9}, "tau_periods": 0.75,
            "sampler": {"mode": "phase", "phi_ui": 0.5}, "max_events": 100}"#,
    );
    let out = run("sim", &cfg, &dir.path().join("o"));
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn stat_ber_rows_and_zero_amplitude_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "s.json",
        r#"{"schema": "gcco/stat-ber/1",
            "model": {"jitter": {"dj_pp_ui": 0.4, "rj_rms_ui": 0.021, "ckj_rms_cid5_ui": 0.01}, "freq_offset_eps": 0.05},
            "sj_freq_norm": {"log": {"lo": 0.01, "hi": 1.0, "n": 5}},
            "sj_amp_pp_ui": [0.0, 0.1, 0.2]}"#,
    );
    let out_path = dir.path().join("s.csv");
    assert!(run("stat-ber", &cfg, &out_path).status.success());
    let (header, rows) = read_csv(&out_path);
    assert_eq!(header, "sj_freq_norm,sj_amp_pp_ui,ber");
    assert_eq!(rows.len(), 15);
    let zero: Vec<&String> = rows.iter().filter(|r| r[1] == "0").map(|r| &r[2]).collect();
    assert_eq!(zero.len(), 5);
    assert!(zero.iter().all(|b| *b == zero[0]));
    assert!(dir.path().join("s.manifest.json").exists());
}

#[test]
fn preset_tolerances() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("jtol.csv");
    assert!(run("jtol", &presets().join("jtol.json"), &out)
        .status
        .success());
    let (header, rows) = read_csv(&out);
    assert_eq!(
        header,
        "freq_norm,jtol_amp_ui,mask_amp_ui,margin_ui,pass,unbounded"
    );
    let last = rows.last().unwrap();
    assert_eq!((last[0].as_str(), last[5].as_str()), ("1", "1"));

    let out = dir.path().join("ftol.csv");
    assert!(run("ftol", &presets().join("ftol_no_jitter.json"), &out)
        .status
        .success());
    let (_, rows) = read_csv(&out);
    let eps: f64 = rows[0][2].parse().unwrap();
    assert!((eps - 0.1111).abs() < 0.002, "{eps}");

    let out = dir.path().join("pn.csv");
    assert!(
        run("phase-noise", &presets().join("phase_noise.json"), &out)
            .status
            .success()
    );
    let (header, rows) = read_csv(&out);
    assert_eq!(header, "i_ss_a,power_w,kappa_sqrt_s,sigma_cid5_ui");
    let row = rows
        .iter()
        .find(|r| r[0].parse::<f64>().unwrap() == 400e-6)
        .unwrap();
    let kappa: f64 = row[2].parse().unwrap();
    let want = 1.380649e-16f64.sqrt();
    assert!(((kappa - want) / want).abs() < 1e-12);
    assert!(dir.path().join("pn.required_iss.json").exists());
}

#[test]
fn sim_outputs_and_eye_rebinning() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("clean");
    assert!(run("sim", &presets().join("sim_clean.json"), &out)
        .status
        .success());
    for f in [
        "eye.csv",
        "resync.json",
        "ber.json",
        "transitions.csv",
        "samples.csv",
        "manifest.json",
    ] {
        assert!(out.join(f).exists(), "{f}");
    }
    let ber: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("ber.json")).unwrap()).unwrap();
    assert_eq!(ber["error_count"], 0);
    let (header, rows) = read_csv(&out.join("eye.csv"));
    assert_eq!(header, "rel_time_ui,level,count");
    let hits: Vec<&Vec<String>> = rows.iter().filter(|r| r[2] != "0").collect();
    assert!(hits.iter().all(|r| r[0] == "0.5"), "{hits:?}");

    let eye_cfg = write(
        dir.path(),
        "eye.json",
        r#"{"schema": "gcco/eye/1", "transitions_csv": "clean/transitions.csv",
            "samples_csv": "clean/samples.csv", "data_rate_hz": 2.5e9, "bin_width_ui": 0.01}"#,
    );
    let rebinned = dir.path().join("eye.csv");
    let status = run("eye", &eye_cfg, &rebinned);
    assert!(
        status.status.success(),
        "{}",
        String::from_utf8_lossy(&status.stderr)
    );
    assert_eq!(
        std::fs::read(rebinned).unwrap(),
        std::fs::read(out.join("eye.csv")).unwrap()
    );
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = presets().join("sim_stage3_inverted.json");
    let digest = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        let args = [
            "sim",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--seed",
            seed,
        ];
        assert!(gcco(&args).status.success());
        std::fs::read(out.join("eye.csv")).unwrap()
    };
    assert_eq!(digest("a", "7"), digest("b", "7"));
    assert_ne!(digest("c", "7"), digest("d", "8"));
}

use std::path::Path;
use std::process::{Command, Output};

use kho_core::grid::{GridSpec, Label, PhaseSpaceGrid};
use kho_core::io::{write_grid, Manifest, Metadata};

fn kho(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kho"))
        .args(args)
        .env_remove("KHO_OUTPUT_DIR")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

const TINY: &str = r#"
scenario = "custom"
n_kicks = 5
seed = 3

[system]
K = 2.0
eta = 0.2

[deco]
D = 0.01

[grid]
n = 256
half_width = 5.0
max_n = 256
"#;

#[test]
fn chi_prints_two_significant_figures() {
    let out = kho(&["chi", "--K", "2", "--eta", "0.1", "--D", "0.0513"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).trim(), "0.017");
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let out = kho(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(kho(&["--help"]).status.code(), Some(0));
}

#[test]
fn bad_parameters_exit_one() {
    let out = kho(&["chi", "--K", "2", "--eta", "0.1", "--D", "0"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bad_config_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "scenario = \"custom\"\n[system]\nK = 2\neta = 0.2\nnu = 1\n").unwrap();
    let out = kho(&["simulate", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nu"));

    let missing = kho(&["simulate", "--config", "/nonexistent/run.toml"]);
    assert_eq!(missing.status.code(), Some(1));
}

/// Trailing `n` bytes of a file; the pixel block of a PPM.
fn tail(path: &Path, n: usize) -> Vec<u8> {
    let bytes = std::fs::read(path).unwrap();
    assert!(bytes.starts_with(b"P6"));
    bytes[bytes.len() - n..].to_vec()
}

#[test]
fn render_of_zero_grid_is_uniform() {
    let dir = tempfile::tempdir().unwrap();
    let bin = dir.path().join("zero.bin");
    let spec = GridSpec::square(64, 1.0).unwrap();
    write_grid(&PhaseSpaceGrid::zeros(spec, Label::Quantum), &bin, &Metadata::new()).unwrap();
    let ppm = dir.path().join("zero.ppm");
    let out = kho(&["render", "--in", bin.to_str().unwrap(), "--out", ppm.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let px = tail(&ppm, 64 * 64 * 3);
    assert!(px.chunks(3).all(|c| c == [255, 255, 255]), "signed zero is white");
}

#[test]
fn render_rejects_truncated_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let bin = dir.path().join("cut.bin");
    let spec = GridSpec::square(64, 1.0).unwrap();
    write_grid(&PhaseSpaceGrid::zeros(spec, Label::Classical), &bin, &Metadata::new()).unwrap();
    let len = std::fs::metadata(&bin).unwrap().len();
    let f = std::fs::OpenOptions::new().write(true).open(&bin).unwrap();
    f.set_len(len - 8).unwrap();
    let ppm = dir.path().join("cut.ppm");
    let out = kho(&["render", "--in", bin.to_str().unwrap(), "--out", ppm.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn simulate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tiny.toml");
    std::fs::write(&cfg, TINY).unwrap();
    let digests = |name: &str| {
        let out_dir = dir.path().join(name);
        let out = kho(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let manifest = Manifest::read(&out_dir).unwrap();
        assert!(manifest.verify(&out_dir).unwrap().is_empty());
        manifest
            .artifacts
            .iter()
            .map(|a| (a.path.clone(), a.sha256.clone()))
            .collect::<Vec<_>>()
    };
    let a = digests("a");
    assert!(a.iter().any(|(p, _)| p.ends_with("series.csv")));
    assert_eq!(a, digests("b"));
}

#[test]
fn under_resolved_grid_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("coarse.toml");
    std::fs::write(&cfg, TINY.replace("D = 0.01", "D = 1e-5")).unwrap();
    let out = kho(&["simulate", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("points per axis"));
}

#[test]
fn quick_validation_passes() {
    let out = kho(&["validate", "--quick"]);
    let text = stdout(&out);
    assert_eq!(out.status.code(), Some(0), "{text}");
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 5, "{text}");
}

#[test]
fn lyapunov_prints_both_formulas() {
    let out = kho(&["lyapunov", "--K", "10", "--n-kicks", "1000"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("1.4656"), "{text}");
    assert!(text.contains("tangent map"));
}

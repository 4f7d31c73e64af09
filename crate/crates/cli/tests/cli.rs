use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

const FLAGSHIP_MU: f64 = -9.369604401089358; // −π² + 0.5

fn gpbox(config: &str, dir: &Path, cmd: &str, extra: &[&str]) -> (i32, PathBuf, String) {
    let cfg = dir.join(format!("{cmd}.toml"));
    fs::write(&cfg, config).unwrap();
    let out = dir.join(cmd);
    let res = Command::new(env!("CARGO_BIN_EXE_gpbox"))
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .args(extra)
        .arg(cmd)
        .output()
        .unwrap();
    (res.status.code().unwrap(), out, String::from_utf8_lossy(&res.stderr).into_owned())
}

fn manifest_value(path: &Path, key: &str) -> String {
    let text = fs::read_to_string(path).unwrap();
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")).map(str::to_string))
        .unwrap_or_else(|| panic!("{key} missing from {}", path.display()))
}

fn numeric_rows(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#') && !l.contains('=') && !l.trim().is_empty())
        .map(|l| l.split_whitespace().map(|t| t.parse().unwrap_or(f64::NAN)).collect())
        .collect()
}

#[test]
fn ground_focusing_writes_positive_slope() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out, err) = gpbox("regime = \"focusing\"\nmu = 10.0\n", dir.path(), "ground", &[]);
    assert_eq!(code, 0, "{err}");
    let slope: f64 = manifest_value(&out.join("ground.txt"), "slope").parse().unwrap();
    assert!(slope > 0.0);
    assert_eq!(numeric_rows(&out.join("ground.dat")).len(), 1025);
}

#[test]
fn defocusing_below_range_is_a_domain_error() {
    let dir = tempfile::tempdir().unwrap();
    let mu = 0.5 * std::f64::consts::PI.powi(2);
    let (code, _, err) = gpbox(&format!("regime = \"defocusing\"\nmu = {mu}\n"), dir.path(), "ground", &[]);
    assert_eq!(code, 2);
    assert!(err.contains("domain"), "{err}");
}

#[test]
fn kappa_input_reproduces_mu_input() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out, _) = gpbox("mu = 3.0\nhbar = 1.5\nm = 2.0\n", dir.path(), "ground", &[]);
    assert_eq!(code, 0);
    let kappa = manifest_value(&out.join("ground.txt"), "kappa");
    let dir2 = tempfile::tempdir().unwrap();
    let (code, out2, _) = gpbox(&format!("kappa = {kappa}\nhbar = 1.5\nm = 2.0\n"), dir2.path(), "ground", &[]);
    assert_eq!(code, 0);
    let mu2: f64 = manifest_value(&out2.join("ground.txt"), "mu").parse().unwrap();
    assert!((mu2 - 3.0).abs() < 1e-8, "{mu2}");
    let a = numeric_rows(&out.join("ground.dat"));
    let b = numeric_rows(&out2.join("ground.dat"));
    for (ra, rb) in a.iter().zip(&b) {
        assert!((ra[1] - rb[1]).abs() < 1e-8);
    }
}

#[test]
fn invalid_configs_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(gpbox("mu = 1.0\nkappa = 2.0\n", dir.path(), "ground", &[]).0, 2);
    assert_eq!(gpbox("mu = 1.0\n[grid]\nM = 0\n", dir.path(), "ground", &[]).0, 2);
    let (code, _, err) = gpbox("mu = 1.0\n[simulate]\npropagator = \"magic\"\n", dir.path(), "simulate", &[]);
    assert_eq!(code, 2);
    assert!(err.contains("split-step"), "{err}");
}

#[test]
fn endpoint_spectrum_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "mu = 1.0\n[spectrum]\nendpoint = true\n[grid]\nspectral_modes = 128\n";
    let (code, out, err) = gpbox(cfg, dir.path(), "spectrum", &[]);
    assert_eq!(code, 0, "{err}");
    let rows = numeric_rows(&out.join("spectrum.txt"));
    assert!(rows.len() >= 20);
    for r in rows.iter().take(20) {
        assert!((r[1] - r[5]).abs() <= 1e-10 * r[5], "n = {}: {} vs {}", r[0], r[1], r[5]);
    }
}

#[test]
fn certify_clean_mu_and_planted_zero() {
    let dir = tempfile::tempdir().unwrap();
    let base = format!("mu = {FLAGSHIP_MU}\n");
    let (code, out, err) = gpbox(&format!("{base}[certify]\nn_max = 6\n"), dir.path(), "certify", &[]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(manifest_value(&out.join("certificate.txt"), "status"), "certified");

    let zero = -5.25;
    let scan = format!(
        "{base}[scan]\nmu_start = -9.0\nmu_end = -1.0\npoints = 9\nn_min = 2\nn_max = 3\n[certify.sign_flip]\nn = 2\nmu = {zero}\n"
    );
    let (code, out, err) = gpbox(&scan, dir.path(), "scan", &[]);
    assert_eq!(code, 0, "{err}");
    let brackets = numeric_rows(&out.join("brackets.dat"));
    assert_eq!(brackets.len(), 1);
    assert_eq!(brackets[0][0], 2.0);
    assert!(brackets[0][1] <= zero && zero <= brackets[0][2]);

    let at_zero = format!("mu = {zero}\n[certify]\nn_max = 4\n[certify.sign_flip]\nn = 2\nmu = {zero}\n");
    let (code, out, _) = gpbox(&at_zero, dir.path(), "certify", &[]);
    assert_eq!(code, 3);
    assert_eq!(manifest_value(&out.join("certificate.txt"), "status"), "failed(2)");
}

#[test]
fn zero_target_gives_zero_control_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!("mu = {FLAGSHIP_MU}\n[control]\nn_ctrl = 6\n[certify]\nn_max = 6\n[target]\namplitude = 0.0\n");
    let (code, out, err) = gpbox(&cfg, dir.path(), "synth", &[]);
    assert_eq!(code, 0, "{err}");
    let rows = numeric_rows(&out.join("control.dat"));
    assert_eq!(rows.len(), 1001);
    assert!(rows.iter().all(|r| r[1] == 0.0));
}

#[test]
fn synth_reaches_linear_target() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!(
        "mu = {FLAGSHIP_MU}\n[control]\nn_ctrl = 10\nlinear_propagator = \"direct\"\n[certify]\nn_max = 10\n[target]\nmodes = 10\n"
    );
    let (code, out, err) = gpbox(&cfg, dir.path(), "synth", &["--seed", "3"]);
    assert_eq!(code, 0, "{err}");
    let rel: f64 = manifest_value(&out.join("synth.txt"), "linear_relative_error").parse().unwrap();
    assert!(rel < 1e-6, "{rel}");
    let mean: f64 = manifest_value(&out.join("synth.txt"), "u_mean").parse().unwrap();
    assert!(mean.abs() < 1e-8);
}

const DEMO: &str = "regime = \"focusing\"\nmu = -9.369604401089358\nT = 1.0\nseed = 1\n[control]\nn_ctrl = 12\n[target]\nfamily = \"modal\"\namplitude = 1e-3\nmodes = 6\n";

#[test]
fn demo_steering_converges_and_exports() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out, err) = gpbox(DEMO, dir.path(), "steer", &[]);
    assert_eq!(code, 0, "{err}");
    let log = fs::read_to_string(out.join("steer_log.txt")).unwrap();
    assert!(log.contains("status = converged"));

    let control = out.join("control.dat");
    let phys = format!("mu = {FLAGSHIP_MU}\n[control]\nfile = \"{}\"\n", control.display());
    let (code, out, err) = gpbox(&phys, dir.path(), "physical", &[]);
    assert_eq!(code, 0, "{err}");
    let manifest = out.join("physical").join("manifest.txt");
    for key in ["L_start", "L_end"] {
        let l: f64 = manifest_value(&manifest, key).parse().unwrap();
        assert!((l - 1.0).abs() < 1e-8, "{key} = {l}");
    }
}

#[test]
fn exhausted_newton_budget_exits_with_four() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!("{DEMO}[tolerances]\nmax_iter = 0\n");
    let (code, out, _) = gpbox(&cfg, dir.path(), "steer", &[]);
    assert_eq!(code, 4);
    assert!(fs::read_to_string(out.join("steer_log.txt")).unwrap().contains("max-iterations"));
}

#[test]
fn simulate_zero_control_keeps_modulus() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "mu = 4.0\n[grid]\nM = 64\ndt = 1e-3\n[simulate]\nsnapshots = 3\npropagator = \"etdrk4\"\n";
    let (code, out, err) = gpbox(cfg, dir.path(), "simulate", &[]);
    assert_eq!(code, 0, "{err}");
    let first = numeric_rows(&out.join("trajectory").join("snapshot_0000.dat"));
    let last = numeric_rows(&out.join("trajectory").join("snapshot_0002.dat"));
    for (a, b) in first.iter().zip(&last) {
        assert!((a[3] - b[3]).abs() < 1e-7);
    }
}

fn tree_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn repeated_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = format!("mu = {FLAGSHIP_MU}\n[control]\nn_ctrl = 6\n[certify]\nn_max = 6\n[target]\nmodes = 4\n");
    for dir in [&a, &b] {
        assert_eq!(gpbox(&cfg, dir.path(), "synth", &["--seed", "11", "--threads", "2"]).0, 0);
    }
    assert_eq!(tree_bytes(&a.path().join("synth")), tree_bytes(&b.path().join("synth")));
}

use std::path::{Path, PathBuf};
use std::process::Command;

use sgd_theta::penalty::{Grid, PdhgConfig};
use sgd_theta::sampling::{read_array, shepp_logan, write_array, ArrayHeader};
use sgd_theta::spaces::Vector;
use sgd_theta_cli::commands::{self, CliError, RunOptions};
use sgd_theta_cli::config::ExperimentConfig;

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("sgd-theta-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

const SMALL: &str = r#"
seed = 4
[problem]
kind = "ct"
n = 16
angles = 8
lines = 16
[noise]
model = "gaussian"
delta_rel = 0.05
[penalty]
kind = "nonneg"
[solver]
batch_size = 4
max_iters = 200
[[methods]]
step = "adaptive-dp"
[[methods]]
step = "decaying"
t0 = 0.05
"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sgd-theta"))
}

#[test]
fn run_writes_histories_images_and_manifest() {
    let out = tmp("run");
    let cfg = ExperimentConfig::from_toml_str(SMALL).unwrap();
    let summary = commands::run_experiment(&cfg, &RunOptions { out: Some(out.clone()), ..Default::default() }).unwrap();
    assert_eq!(summary.methods.len(), 2);
    assert_eq!(summary.methods.iter().map(|m| m.seed).collect::<Vec<_>>(), vec![4, 5]);
    for stem in ["sgd-theta", "sgd-decaying"] {
        let csv = std::fs::read_to_string(out.join(format!("{stem}.csv"))).unwrap();
        assert!(csv.starts_with("iter,step,batch_residual,"));
        assert_eq!(csv.lines().count(), 202);
        let (x, header) = read_array(&out.join(format!("{stem}.bin"))).unwrap();
        assert_eq!((x.len(), header.dims), (256, vec![16, 16]));
        assert!(out.join(format!("{stem}.pgm")).exists());
    }
    let manifest: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["delta"]["realized"].as_array().unwrap().len(), 8 * 16);
    assert_eq!(manifest["admissibility"][0]["passed"], true);
    assert_eq!(manifest["methods"][1]["step"], "decaying");
    assert_eq!(manifest["config"]["seed"], 4);
}

#[test]
fn seed_and_stride_flags_override_the_config() {
    let cfg = ExperimentConfig::from_toml_str(SMALL).unwrap();
    let opts = RunOptions { out: Some(tmp("flags")), seed: Some(10), stride: Some(50), ..Default::default() };
    let summary = commands::run_experiment(&cfg, &opts).unwrap();
    assert_eq!(summary.methods[1].seed, 11);
    let tele: Vec<u64> = summary.methods[0]
        .history
        .records
        .iter()
        .filter(|r| r.total_sq_residual.is_some())
        .map(|r| r.n)
        .collect();
    assert_eq!(tele, vec![0, 50, 100, 150, 200]);
}

#[test]
fn inadmissible_step_is_refused_without_force() {
    let text = SMALL.replace("batch_size = 4", "batch_size = 4\nmu0 = 0.2\ntau = 1.1");
    let cfg = ExperimentConfig::from_toml_str(&text).unwrap();
    let out = tmp("force");
    let err = commands::run_experiment(&cfg, &RunOptions { out: Some(out.clone()), ..Default::default() }).unwrap_err();
    assert!(matches!(err, CliError::Inadmissible(ref l) if l.len() == 1), "{err}");
    assert!(!out.join("manifest.json").exists());
    commands::run_experiment(&cfg, &RunOptions { out: Some(out.clone()), force: true, ..Default::default() }).unwrap();
    let manifest = std::fs::read_to_string(out.join("manifest.json")).unwrap();
    assert!(manifest.contains("\"forced\": true"));
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("exp.toml");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn binary_reports_config_errors_with_nonzero_exit() {
    let dir = tmp("bad");
    let path = write_config(&dir, &SMALL.replace("angles = 8", "angles = []"));
    let out = bin().args(["run", path.to_str().unwrap()]).output().unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("problem.angles"), "{stderr}");

    let path = write_config(&dir, &SMALL.replace("n = 16", "n = -16"));
    let out = bin().args(["run", path.to_str().unwrap()]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("line"));
}

#[test]
fn binary_honours_the_output_environment_variable() {
    let dir = tmp("env");
    let path = write_config(&dir, SMALL);
    let target = dir.join("from-env");
    let status = bin()
        .args(["run", path.to_str().unwrap()])
        .env(commands::OUT_ENV, &target)
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    assert!(target.join("manifest.json").exists());
    // --out wins over the environment.
    let flag = dir.join("from-flag");
    let status = bin()
        .args(["run", path.to_str().unwrap(), "--out", flag.to_str().unwrap()])
        .env(commands::OUT_ENV, &target)
        .output()
        .unwrap()
        .status;
    assert!(status.success() && flag.join("manifest.json").exists());
}

#[test]
fn phantom_lies_in_the_unit_interval_and_matches_the_library() {
    let dir = tmp("phantom");
    let path = dir.join("p.bin");
    commands::write_phantom(&path, 64).unwrap();
    let (x, header) = read_array(&path).unwrap();
    assert_eq!(header.dims, vec![64, 64]);
    assert!(x.iter().all(|v| (0.0..=1.0).contains(v)));
    assert!(x.contains(&1.0));
    assert_eq!(x, shepp_logan(64).unwrap().to_vec());
}

#[test]
fn zero_image_projects_to_a_zero_sinogram() {
    let dir = tmp("project");
    let input = dir.join("zero.bin");
    write_array(&input, &[0.0; 256], &ArrayHeader::new(vec![16, 16])).unwrap();
    let output = dir.join("sino.bin");
    commands::project_file(&input, &output, &[30.0, 60.0, 90.0], 20).unwrap();
    let (y, header) = read_array(&output).unwrap();
    assert_eq!(header.dims, vec![3, 20]);
    assert!(y.iter().all(|v| *v == 0.0));
}

#[test]
fn constant_image_survives_tv_denoising() {
    let image = Vector::new(vec![0.7; 100]).unwrap();
    let out = commands::cmd_denoise_tv(&image, Grid::new(10, 10).unwrap(), 0.5, &PdhgConfig::default()).unwrap();
    assert_eq!(out, image);
}

#[test]
fn binary_file_tools_match_the_library() {
    let dir = tmp("tools");
    let p = dir.join("p.bin");
    assert!(bin().args(["phantom", "--n", "20", "--out", p.to_str().unwrap()]).output().unwrap().status.success());
    let s = dir.join("s.bin");
    let status = bin().args(["project", p.to_str().unwrap(), "--angles", "6", "--out", s.to_str().unwrap()]).output();
    assert!(status.unwrap().status.success());
    let (sino, _) = read_array(&s).unwrap();
    let truth = shepp_logan(20).unwrap();
    let angles = sgd_theta::operators::equally_spaced_angles(6);
    assert_eq!(sino, commands::cmd_project(&truth, 20, &angles, 20).unwrap().to_vec());

    let d = dir.join("d.bin");
    let status = bin().args(["denoise-tv", p.to_str().unwrap(), "--beta", "0.05", "--out", d.to_str().unwrap()]).output();
    assert!(status.unwrap().status.success());
    let (den, _) = read_array(&d).unwrap();
    let pdhg = PdhgConfig { max_iters: 2000, gap_tol: 1e-6, ..PdhgConfig::default() };
    let want = commands::cmd_denoise_tv(&truth, Grid::square(20).unwrap(), 0.05, &pdhg).unwrap();
    assert_eq!(den, want.to_vec());
}

#[test]
fn check_batteries_all_pass() {
    let checks = commands::cmd_check(0).unwrap();
    assert_eq!(checks.len(), 8);
    for c in &checks {
        assert!(c.passed, "{c}");
    }
}

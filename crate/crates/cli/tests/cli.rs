use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use cef_cli::arch::Architecture;
use cef_cli::checkpoint::Checkpoint;
use cef_cli::config::RunConfig;
use cef_core::data::{read_dataset, write_dataset_csv};
use cef_core::linalg::Tensor;
use cef_core::par::ExecPolicy;
use cef_core::train::Trainer;

fn cef(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cef")).args(args).output().expect("binary runs")
}

fn cef_env(args: &[&str], key: &str, val: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cef")).args(args).env(key, val).output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const TINY: &str = r#"
out_dir = "run"

[dataset]
kind = "sphere"
count = 60
seed = 1

[model]
latent_dim = 2
g = [{ type = "pad", out = 3 }, { type = "sct" }, { type = "orthogonal" }, { type = "translation" }]
h = [{ type = "actnorm" }, { type = "inv_conv1x1" }, { type = "affine_coupling", hidden = 8 }]

[train]
warmup_epochs = 2
main_epochs = 2
finetune_epochs = 1
batch_size = 20
learning_rate = 1e-2
"#;

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("run.toml");
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn malformed_config_is_usage_error_and_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    for bad in [TINY.replace("count = 60", "count = 60\nflavour = 1"), TINY.replace("out = 3", "out = 5"), "not toml [".into()] {
        let cfg = write_config(tmp.path(), &bad);
        let out = cef(&["train", "--config", s(&cfg)]);
        assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
        assert!(!tmp.path().join("run").exists());
    }
    let out = cef(&["train", "--config", s(&tmp.path().join("missing.toml"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn zero_epoch_schedule_writes_initial_checkpoint() {
    let tmp = tempfile::tempdir().unwrap();
    let text = TINY.replace("warmup_epochs = 2", "warmup_epochs = 0")
        .replace("main_epochs = 2", "main_epochs = 0")
        .replace("finetune_epochs = 1", "finetune_epochs = 0");
    let cfg = write_config(tmp.path(), &text);
    let out = cef(&["train", "--config", s(&cfg)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read_to_string(tmp.path().join("run/metrics.txt")).unwrap(), "");
    let ck = Checkpoint::load(&tmp.path().join("run/model.ckpt")).unwrap();
    let fresh = RunConfig::load(&cfg).unwrap().build_model().unwrap();
    assert_eq!(ck.epoch, 0);
    assert_eq!(ck.model.g_params(), fresh.g_params());
}

#[test]
fn same_config_and_seed_reproduce_every_artifact() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), TINY);
    let mut files = Vec::new();
    for d in ["a", "b"] {
        let dir = tmp.path().join(d);
        let out = cef(&["train", "--config", s(&cfg), "--out", s(&dir), "--seed", "5"]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let stdout = String::from_utf8(out.stdout).unwrap();
        assert!(stdout.lines().next().unwrap().contains("wall_ms="));
        files.push((fs::read(dir.join("metrics.txt")).unwrap(), fs::read(dir.join("model.ckpt")).unwrap()));
    }
    assert_eq!(files[0], files[1]);
    let metrics = String::from_utf8(files[0].0.clone()).unwrap();
    assert_eq!(metrics.lines().count(), 5);
    assert!(!metrics.contains("wall_ms"));
    for key in ["epoch=", "nll=", "recon=", "total="] {
        assert!(metrics.lines().all(|l| l.contains(key)));
    }
}

#[test]
fn checkpoint_roundtrip_preserves_log_prob() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = RunConfig::load(&write_config(tmp.path(), TINY)).unwrap();
    let data = cfg.load_dataset().unwrap();
    let mut model = cfg.build_model().unwrap();
    let mut t = Trainer::new(cfg.train.clone(), &model).unwrap();
    t.fit(&mut model, &data, |_| {}).unwrap();
    let path = tmp.path().join("m.ckpt");
    Checkpoint { architecture: cfg.model.clone(), model: model.clone(), seed: 0, epoch: t.epoch, adam: Some((t.adam_g.clone(), t.adam_h.clone())) }
        .save(&path)
        .unwrap();
    let back = Checkpoint::load(&path).unwrap();
    let probe = cef_core::data::sample_gaussian_dataset(3, 50, 9);
    let a = model.log_prob_batch(&probe, ExecPolicy::Sequential);
    let b = back.model.log_prob_batch(&probe, ExecPolicy::Sequential);
    for (x, y) in a.iter().zip(&b) {
        let (x, y) = (x.as_ref().unwrap(), y.as_ref().unwrap());
        assert!((x.log_prob - y.log_prob).abs() <= 1e-12 * x.log_prob.abs().max(1.0));
        assert!((x.reconstruction_sq - y.reconstruction_sq).abs() <= 1e-12);
    }
    let (ag, _) = back.adam.unwrap();
    assert_eq!(ag, t.adam_g);
}

fn save_arch(dir: &Path, arch: Architecture) -> PathBuf {
    let model = arch.build(&mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let path = dir.join("m.ckpt");
    Checkpoint { architecture: arch, model, seed: 0, epoch: 0, adam: None }.save(&path).unwrap();
    path
}

#[test]
fn identity_model_samples_standard_normal_deterministically() {
    let tmp = tempfile::tempdir().unwrap();
    let ck = save_arch(tmp.path(), Architecture { latent_dim: 2, g: vec![], h: vec![] });
    let (a, b) = (tmp.path().join("a.bin"), tmp.path().join("b.bin"));
    for p in [&a, &b] {
        let out = cef(&["sample", "--checkpoint", s(&ck), "--count", "20000", "--seed", "3", "--out", s(p)]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let t = read_dataset(fs::File::open(&a).unwrap()).unwrap();
    assert_eq!(t.shape(), &[20000, 2]);
    for c in 0..2 {
        let col: Vec<f64> = (0..t.rows()).map(|i| t.row(i)[c]).collect();
        let mean = col.iter().sum::<f64>() / col.len() as f64;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / col.len() as f64;
        assert!(mean.abs() < 0.03, "{mean}");
        assert!((var - 1.0).abs() < 0.05, "{var}");
    }
}

#[test]
fn density_points_mode_flags_singular_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let arch: Architecture = toml::from_str(
        "latent_dim = 2\ng = [{ type = \"stereographic\", radius = 1.0 }]\n",
    )
    .unwrap();
    let ck = save_arch(tmp.path(), arch);
    let pts = tmp.path().join("p.csv");
    let rows = vec![vec![0.0, 0.0, -1.0], vec![0.0, 2.5, 0.0], vec![0.0, 0.0, 1.0]];
    write_dataset_csv(&Tensor::from_rows(&rows, 3).unwrap(), fs::File::create(&pts).unwrap()).unwrap();
    let out_csv = tmp.path().join("d.csv");
    let out = cef(&["density", "--checkpoint", s(&ck), "--points", s(&pts), "--out", s(&out_csv)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&out_csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "x0,x1,x2,log_prob,recon_sq,status");
    let field = |l: &str, i: usize| l.split(',').nth(i).unwrap().to_string();
    // south pole: λ = 2 at z = 0, so p = N(0)/λ² = 1/(8π)
    let lp: f64 = field(lines[1], 3).parse().unwrap();
    assert!((lp - (1.0 / (8.0 * std::f64::consts::PI)).ln()).abs() < 1e-12);
    // off the sphere along the axis: finite density, positive reconstruction error
    assert!(field(lines[2], 3).parse::<f64>().unwrap().is_finite());
    assert!(field(lines[2], 4).parse::<f64>().unwrap() > 0.0);
    assert_eq!(field(lines[3], 5), "singular");

    // empty input → header only, success
    let empty = tmp.path().join("e.csv");
    fs::write(&empty, "x0,x1,x2\n").unwrap();
    let out = cef(&["density", "--checkpoint", s(&ck), "--points", s(&empty), "--out", s(&out_csv)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read_to_string(&out_csv).unwrap().lines().count(), 1);
}

#[test]
fn oracle_grid_matches_analytic_pushforward() {
    // oracle embedding with identity stump: p(x) = N(z; 0, I) / λ(z)² at z = g⁻¹(x)
    let tmp = tempfile::tempdir().unwrap();
    let arch: Architecture =
        toml::from_str("latent_dim = 2\ng = [{ type = \"stereographic\", radius = 1.0 }]\n").unwrap();
    let ck = save_arch(tmp.path(), arch);
    let grid = tmp.path().join("grid.csv");
    let out = cef(&["density", "--checkpoint", s(&ck), "--grid", "36x18", "--out", s(&grid)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&grid).unwrap();
    assert!(text.starts_with("phi,theta,x0,x1,x2,log_prob,recon_sq,status"));
    let mut rows = 0;
    for l in text.lines().skip(1) {
        let f: Vec<&str> = l.split(',').collect();
        assert_eq!(f[7], "ok");
        let (phi, theta): (f64, f64) = (f[0].parse().unwrap(), f[1].parse().unwrap());
        // stereographic chart from the north pole, by hand
        let (st, ct) = theta.sin_cos();
        let z = [st * phi.cos() / (1.0 - ct), st * phi.sin() / (1.0 - ct)];
        let r2 = z[0] * z[0] + z[1] * z[1];
        let lambda = 2.0 / (r2 + 1.0);
        let want = -r2 / 2.0 - (2.0 * std::f64::consts::PI).ln() - 2.0 * lambda.ln();
        let got: f64 = f[5].parse().unwrap();
        assert!((got - want).abs() < 1e-10 * want.abs().max(1.0), "φ={phi} θ={theta}: {got} vs {want}");
        assert!(f[6].parse::<f64>().unwrap() < 1e-20);
        rows += 1;
    }
    assert_eq!(rows, 36 * 18);
}

#[test]
fn verify_exit_codes() {
    let out = cef(&["verify", "--suite", "conformality"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().filter(|l| l.starts_with("[PASS]")).count() >= 11);
    assert_eq!(cef(&["verify", "--suite", "bogus"]).status.code(), Some(2));
    assert_eq!(cef(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn thread_cap_must_be_positive() {
    assert_eq!(cef_env(&["verify", "--suite", "oracle"], "CEF_THREADS", "0").status.code(), Some(2));
    assert_eq!(cef_env(&["verify", "--suite", "oracle"], "CEF_THREADS", "1").status.code(), Some(0));
}

#[test]
fn info_describes_checkpoint() {
    let tmp = tempfile::tempdir().unwrap();
    let arch: Architecture = toml::from_str(
        "latent_dim = 2\ng = [{ type = \"pad\", out = 3 }]\nh = [{ type = \"affine_coupling\", hidden = 4 }]\n",
    )
    .unwrap();
    let ck = save_arch(tmp.path(), arch);
    let out = cef(&["info", "--checkpoint", s(&ck)]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("latent 2 → ambient 3"), "{text}");
    assert!(text.contains("affine_coupling"));
    assert_eq!(cef(&["info", "--checkpoint", "/nonexistent"]).status.code(), Some(2));
}

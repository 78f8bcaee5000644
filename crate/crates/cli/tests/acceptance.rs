//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Criteria 6 and 7 go through the same code path as
//! `cef train`, using the shipped presets.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use cef_cli::checkpoint::Checkpoint;
use cef_cli::commands;
use cef_core::data::{direction, sample_sphere_dataset, target_density_sphere, target_log_density, SphereDatasetConfig};
use cef_core::flow::sample;
use cef_core::linalg::norm;
use cef_core::par::ExecPolicy;
use cef_core::verify::{self, Check};

struct Outcome {
    passed: bool,
    detail: String,
}

fn from_checks(checks: Vec<Check>) -> Outcome {
    let failed: Vec<String> = checks.iter().filter(|c| !c.passed).map(|c| c.to_string()).collect();
    let worst = checks
        .iter()
        .max_by(|a, b| a.used.total_cmp(&b.used))
        .map(|c| format!("{}: {:.3e} against {:.1e}", c.name, c.measured, c.tolerance));
    Outcome {
        passed: failed.is_empty(),
        detail: if failed.is_empty() {
            format!("{} checks, tightest {}", checks.len(), worst.unwrap_or_default())
        } else {
            failed.join(" | ")
        },
    }
}

fn preset(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("presets").join(name)
}

fn train_preset(name: &str, dir: &Path) -> Checkpoint {
    let mut sink = Vec::new();
    let out = commands::train(&preset(name), None, Some(dir), ExecPolicy::Parallel, &mut sink)
        .unwrap_or_else(|e| panic!("training {name}: {e}"));
    Checkpoint::load(&out.checkpoint).expect("checkpoint written by train loads")
}

fn held_out() -> cef_core::linalg::Tensor {
    sample_sphere_dataset(&SphereDatasetConfig { count: 1000, seed: 2, ..Default::default() }).unwrap()
}

/// Pearson correlation of model and target densities on a 48×24 (φ, θ) grid.
fn grid_correlation(model: &cef_core::flow::CefModel, mu: &[f64; 3]) -> f64 {
    let (mut pm, mut pt) = (Vec::new(), Vec::new());
    for i in 0..48 {
        for j in 0..24 {
            let phi = 2.0 * std::f64::consts::PI * (i as f64 + 0.5) / 48.0;
            let theta = std::f64::consts::PI * (j as f64 + 0.5) / 24.0;
            pm.push(model.log_prob(&direction(phi, theta)).map_or(0.0, |r| r.log_prob.exp()));
            pt.push(target_density_sphere(phi, theta, mu));
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (a, b) = (mean(&pm), mean(&pt));
    let cov: f64 = pm.iter().zip(&pt).map(|(x, y)| (x - a) * (y - b)).sum();
    let va: f64 = pm.iter().map(|x| (x - a).powi(2)).sum();
    let vb: f64 = pt.iter().map(|y| (y - b).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn sphere_experiment() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let learned = train_preset("sphere_desk.toml", &tmp.path().join("learned"));
    let test = held_out();
    let reports = learned.model.log_prob_batch(&test, ExecPolicy::Parallel);
    let dist: f64 = reports.iter().map(|r| r.as_ref().unwrap().reconstruction_sq.sqrt()).sum::<f64>()
        / test.rows() as f64;
    let xs = sample(&learned.model, 1000, 7, ExecPolicy::Parallel).unwrap();
    let radius = (0..xs.rows()).map(|i| (norm(xs.row(i)) - 1.0).abs()).fold(0.0, f64::max);

    let oracle = train_preset("sphere_oracle.toml", &tmp.path().join("oracle"));
    let mu = SphereDatasetConfig::default().mu;
    let reports = oracle.model.log_prob_batch(&test, ExecPolicy::Parallel);
    let gap = reports
        .iter()
        .enumerate()
        .map(|(i, r)| (r.as_ref().unwrap().log_prob - target_log_density(test.row(i), &mu)).abs())
        .sum::<f64>()
        / test.rows() as f64;

    let corr = grid_correlation(&oracle.model, &mu);

    let (a, b, c) = (dist < 0.05, radius < 0.05, gap < 0.3);
    let mark = |ok: bool| if ok { "ok" } else { "FAIL" };
    Outcome {
        passed: a && b && c,
        detail: format!(
            "(a) mean held-out distance {dist:.2e} < 0.05 {}; (b) worst sample |‖x‖−1| {radius:.2e} < 0.05 {}; \
             (c) oracle-g mean |log p − log p*| {gap:.3} < 0.3 {}; (info) oracle-g grid density correlation {corr:.3}",
            mark(a),
            mark(b),
            mark(c)
        ),
    }
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let run = |d: &str| {
        let mut sink = Vec::new();
        let out = commands::train(&preset("sphere_desk.toml"), None, Some(&tmp.path().join(d)), ExecPolicy::Parallel, &mut sink)
            .expect("train");
        std::fs::read(out.metrics).unwrap()
    };
    let (first, second) = (run("a"), run("b"));
    Outcome {
        passed: !first.is_empty() && first == second,
        detail: format!("metrics files {} and {} bytes, identical: {}", first.len(), second.len(), first == second),
    }
}

fn main() -> ExitCode {
    let criteria: Vec<(&str, Duration, Box<dyn Fn() -> Outcome>)> = vec![
        ("1 conformality", Duration::from_secs(60), Box::new(|| from_checks(verify::conformality_suite(0).unwrap()))),
        ("2 composition", Duration::from_secs(60), Box::new(|| from_checks(verify::composition_suite(0).unwrap()))),
        ("3 stereographic oracle", Duration::from_secs(60), Box::new(|| from_checks(verify::oracle_suite(0).unwrap()))),
        (
            "4 density normalization",
            Duration::from_secs(300),
            Box::new(|| from_checks(verify::normalization_suite(0, 1_000_000).unwrap())),
        ),
        ("5 gradient fidelity", Duration::from_secs(120), Box::new(|| from_checks(verify::gradcheck_suite(0).unwrap()))),
        ("6 sphere experiment", Duration::from_secs(1800), Box::new(sphere_experiment)),
        ("7 determinism", Duration::from_secs(1800), Box::new(determinism)),
    ];
    let mut all = true;
    for (name, budget, run) in criteria {
        let start = Instant::now();
        let out = run();
        let took = start.elapsed();
        let in_time = took <= budget;
        let ok = out.passed && in_time;
        all &= ok;
        println!(
            "criterion {name}: {} [{:.1}s of {}s] {}",
            if ok { "PASS" } else { "FAIL" },
            took.as_secs_f64(),
            budget.as_secs(),
            out.detail
        );
    }
    if all { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}

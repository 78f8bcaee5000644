//! The five subcommands. Each takes its arguments plus a writer for the
//! human-readable stream, so tests can drive them without a subprocess.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use cef_core::data::{direction, is_csv, read_dataset, read_dataset_csv, write_dataset, write_dataset_csv};
use cef_core::flow::sample;
use cef_core::linalg::Tensor;
use cef_core::par::ExecPolicy;
use cef_core::train::{EpochMetrics, Trainer};
use cef_core::verify::{run_suite, SUITES};
use cef_core::CefError;

use crate::checkpoint::Checkpoint;
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

pub const METRICS_FILE: &str = "metrics.txt";
pub const CHECKPOINT_FILE: &str = "model.ckpt";

/// Where `train` put its artifacts.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub metrics: PathBuf,
    pub checkpoint: PathBuf,
    pub epochs: Vec<EpochMetrics>,
}

/// Trains per the config. The metrics file carries only the deterministic
/// fields; the stream written to `log` adds wall-clock time.
pub fn train(
    config: &Path,
    seed: Option<u64>,
    out_dir: Option<&Path>,
    policy: ExecPolicy,
    log: &mut dyn Write,
) -> CliResult<TrainOutcome> {
    let mut cfg = RunConfig::load(config).map_err(CliError::usage)?;
    if let Some(s) = seed {
        cfg.train.seed = s;
    }
    if let Some(d) = out_dir {
        cfg.out_dir = d.to_path_buf();
    }
    let data = cfg.load_dataset().map_err(CliError::usage)?;
    let mut model = cfg.build_model().map_err(CliError::usage)?;
    let mut trainer = Trainer::new(cfg.train.clone(), &model).map_err(CliError::usage)?.with_policy(policy);

    fs::create_dir_all(&cfg.out_dir).map_err(|e| CliError::io(&cfg.out_dir, e))?;
    let metrics_path = cfg.out_dir.join(METRICS_FILE);
    let mut metrics = BufWriter::new(fs::File::create(&metrics_path).map_err(|e| CliError::io(&metrics_path, e))?);

    let mut io_err = None;
    let fitted = trainer.fit(&mut model, &data, |m| {
        let r = writeln!(metrics, "{}", m.deterministic_line()).and_then(|_| writeln!(log, "{}", m.line()));
        if let Err(e) = r {
            io_err.get_or_insert(e);
        }
    });
    metrics.flush().map_err(|e| CliError::io(&metrics_path, e))?;
    if let Some(e) = io_err {
        return Err(CliError::io(&metrics_path, e));
    }
    let epochs = fitted.map_err(CliError::from)?;

    let checkpoint = cfg.out_dir.join(CHECKPOINT_FILE);
    Checkpoint {
        architecture: cfg.model.clone(),
        model,
        seed: cfg.train.seed,
        epoch: trainer.epoch,
        adam: Some((trainer.adam_g.clone(), trainer.adam_h.clone())),
    }
    .save(&checkpoint)
    .map_err(|e| CliError::Usage(format!("writing {}: {e}", checkpoint.display())))?;
    writeln!(log, "wrote {} and {}", metrics_path.display(), checkpoint.display())
        .map_err(|e| CliError::io(Path::new("<stdout>"), e))?;
    Ok(TrainOutcome { metrics: metrics_path, checkpoint, epochs })
}

fn write_table(path: &Path, t: &Tensor) -> CliResult<()> {
    let f = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    let r = if is_csv(path) { write_dataset_csv(t, f) } else { write_dataset(t, BufWriter::new(f)) };
    r.map_err(|e| CliError::Usage(format!("writing {}: {e}", path.display())))
}

/// Writes `count` model samples; binary unless `out` ends in `.csv`.
pub fn sample_cmd(checkpoint: &Path, count: usize, seed: u64, out: &Path, policy: ExecPolicy) -> CliResult<()> {
    let ck = Checkpoint::load(checkpoint).map_err(CliError::usage)?;
    let xs = sample(&ck.model, count, seed, policy).map_err(CliError::from)?;
    write_table(out, &xs)
}

/// Density query: a `(φ, θ)` grid on the unit sphere, or the rows of a
/// dataset file.
#[derive(Debug, Clone, PartialEq)]
pub enum DensityInput {
    Grid { n_phi: usize, n_theta: usize },
    Points(PathBuf),
}

/// Parses `NPHIxNTHETA`, e.g. `64x32`.
pub fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(['x', 'X']).ok_or_else(|| format!("grid '{s}' is not of the form NPHIxNTHETA"))?;
    let p = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("grid '{s}': {e}"));
    Ok((p(a)?, p(b)?))
}

/// Writes one CSV row per point: coordinates, `log_prob`, `recon_sq`, and a
/// status column. Singular points get `NaN` values and are not fatal.
pub fn density(checkpoint: &Path, input: &DensityInput, out: &Path, policy: ExecPolicy) -> CliResult<usize> {
    let ck = Checkpoint::load(checkpoint).map_err(CliError::usage)?;
    let n = ck.model.ambient_dim();
    let (angles, points) = match input {
        DensityInput::Grid { n_phi, n_theta } => {
            if n != 3 {
                return Err(CliError::Usage(format!("grid mode needs a model in R³, this one emits R^{n}")));
            }
            let mut angles = Vec::with_capacity(n_phi * n_theta);
            let mut rows = Vec::with_capacity(n_phi * n_theta);
            for i in 0..*n_phi {
                for j in 0..*n_theta {
                    let phi = 2.0 * std::f64::consts::PI * (i as f64 + 0.5) / *n_phi as f64;
                    let theta = std::f64::consts::PI * (j as f64 + 0.5) / *n_theta as f64;
                    angles.push((phi, theta));
                    rows.push(direction(phi, theta).to_vec());
                }
            }
            (Some(angles), rows)
        }
        DensityInput::Points(path) => {
            let f = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
            let t = if is_csv(path) { read_dataset_csv(f) } else { read_dataset(std::io::BufReader::new(f)) }
                .map_err(CliError::usage)?;
            let rows: Vec<Vec<f64>> = if t.is_empty() { vec![] } else { (0..t.rows()).map(|i| t.row(i).to_vec()).collect() };
            if let Some(r) = rows.first() {
                if r.len() != n {
                    return Err(CliError::Usage(format!("points have dimension {}, model emits {n}", r.len())));
                }
            }
            (None, rows)
        }
    };

    let table = if points.is_empty() { Tensor::zeros(vec![0, n]) } else {
        Tensor::from_rows(&points, n).map_err(CliError::usage)?
    };
    let reports = if points.is_empty() { vec![] } else { ck.model.log_prob_batch(&table, policy) };

    let f = fs::File::create(out).map_err(|e| CliError::io(out, e))?;
    let mut w = BufWriter::new(f);
    let io = |e| CliError::io(out, e);
    let mut header: Vec<String> = Vec::new();
    if angles.is_some() {
        header.extend(["phi".into(), "theta".into()]);
    }
    header.extend((0..n).map(|i| format!("x{i}")));
    header.extend(["log_prob".into(), "recon_sq".into(), "status".into()]);
    writeln!(w, "{}", header.join(",")).map_err(io)?;
    for (k, (x, rep)) in points.iter().zip(&reports).enumerate() {
        let mut fields: Vec<String> = Vec::with_capacity(n + 5);
        if let Some(a) = &angles {
            fields.push(a[k].0.to_string());
            fields.push(a[k].1.to_string());
        }
        fields.extend(x.iter().map(f64::to_string));
        match rep {
            Ok(r) => fields.extend([r.log_prob.to_string(), r.reconstruction_sq.to_string(), "ok".into()]),
            Err(e) => {
                let tag = match e {
                    CefError::Singularity(_) => "singular",
                    CefError::Numeric(_) => "numeric",
                    _ => "error",
                };
                fields.extend(["NaN".into(), "NaN".into(), tag.into()]);
            }
        }
        writeln!(w, "{}", fields.join(",")).map_err(io)?;
    }
    w.flush().map_err(io)?;
    Ok(points.len())
}

/// Runs a property suite; any failure is reported and yields exit code 1.
pub fn verify(suite: &str, seed: u64, log: &mut dyn Write) -> CliResult<()> {
    if suite != "all" && !SUITES.contains(&suite) {
        return Err(CliError::Usage(format!("unknown suite '{suite}'; expected one of {SUITES:?} or all")));
    }
    let checks = run_suite(suite, seed).map_err(CliError::from)?;
    let stdout = |e| CliError::io(Path::new("<stdout>"), e);
    for c in &checks {
        writeln!(log, "{c}").map_err(stdout)?;
    }
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    if failed.is_empty() {
        writeln!(log, "{} checks passed", checks.len()).map_err(stdout)?;
        Ok(())
    } else {
        Err(CliError::CheckFailed(failed.iter().map(|s| s.to_string()).collect()))
    }
}

/// Prints the architecture and bookkeeping of a checkpoint.
pub fn info(checkpoint: &Path, log: &mut dyn Write) -> CliResult<()> {
    let ck = Checkpoint::load(checkpoint).map_err(CliError::usage)?;
    let m = &ck.model;
    let g: Vec<&str> = m.g.iter().map(|b| b.name()).collect();
    let h: Vec<&str> = m.h.iter().map(|b| b.name()).collect();
    let stdout = |e| CliError::io(Path::new("<stdout>"), e);
    let text = format!(
        "latent {} → ambient {}\ng: {}\nh: {}\nparameters: g {}, h {}\nseed {}, epoch {}, optimizer state {}",
        m.latent_dim(),
        m.ambient_dim(),
        if g.is_empty() { "(none)".into() } else { g.join(" → ") },
        if h.is_empty() { "(none)".into() } else { h.join(" → ") },
        m.g_params().len(),
        m.h_params().len(),
        ck.seed,
        ck.epoch,
        if ck.adam.is_some() { "present" } else { "absent" },
    );
    writeln!(log, "{text}").map_err(stdout)
}

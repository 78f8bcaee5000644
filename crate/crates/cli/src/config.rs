//! TOML run configuration. Unknown keys are rejected, and the architecture is
//! built once at load so dimension mismatches never surface mid-training.

use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use cef_core::data::{is_csv, read_dataset, read_dataset_csv, sample_gaussian_dataset, sample_sphere_dataset,
    SphereDatasetConfig};
use cef_core::flow::CefModel;
use cef_core::linalg::Tensor;
use cef_core::train::TrainConfig;
use cef_core::{CefError, Result};

use crate::arch::Architecture;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSpec {
    /// Radially projected `N(μ, I₃)` draws.
    Sphere {
        #[serde(default = "default_mu")]
        mu: [f64; 3],
        #[serde(default = "default_count")]
        count: usize,
        #[serde(default)]
        seed: u64,
    },
    /// Standard normal in `dim` dimensions.
    Gaussian { dim: usize, count: usize, #[serde(default)] seed: u64 },
    /// Binary dataset file, or CSV when the extension is `.csv`. Relative
    /// paths resolve against the config file's directory.
    File { path: PathBuf },
}

fn default_mu() -> [f64; 3] {
    SphereDatasetConfig::default().mu
}

fn default_count() -> usize {
    SphereDatasetConfig::default().count
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: DatasetSpec,
    pub model: Architecture,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
}

fn default_out() -> PathBuf {
    PathBuf::from("runs")
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CefError::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    /// Reads a config; relative dataset and output paths are taken relative
    /// to the file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CefError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| match e {
            CefError::Config(m) => CefError::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let DatasetSpec::File { path: p } = &mut cfg.dataset {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if cfg.out_dir.is_relative() {
            cfg.out_dir = base.join(&cfg.out_dir);
        }
        Ok(cfg)
    }

    fn check(&self) -> Result<()> {
        self.train.validate()?;
        let model = self.build_model()?;
        let want = model.ambient_dim();
        let got = match &self.dataset {
            DatasetSpec::Sphere { count, .. } => {
                if *count == 0 {
                    return Err(CefError::Config("dataset count must be at least 1".into()));
                }
                3
            }
            DatasetSpec::Gaussian { dim, count, .. } => {
                if *count == 0 || *dim == 0 {
                    return Err(CefError::Config("gaussian dataset needs dim ≥ 1 and count ≥ 1".into()));
                }
                *dim
            }
            DatasetSpec::File { .. } => return Ok(()),
        };
        if got != want {
            return Err(CefError::Config(format!("dataset has dimension {got}, model emits {want}")));
        }
        Ok(())
    }

    /// Fresh model; initialization randomness comes from the training seed.
    pub fn build_model(&self) -> Result<CefModel> {
        self.model.build(&mut ChaCha8Rng::seed_from_u64(self.train.seed))
    }

    pub fn load_dataset(&self) -> Result<Tensor> {
        let data = match &self.dataset {
            DatasetSpec::Sphere { mu, count, seed } => {
                sample_sphere_dataset(&SphereDatasetConfig { mu: *mu, count: *count, seed: *seed })?
            }
            DatasetSpec::Gaussian { dim, count, seed } => sample_gaussian_dataset(*dim, *count, *seed),
            DatasetSpec::File { path } => {
                let f = fs::File::open(path)
                    .map_err(|e| CefError::Config(format!("cannot open dataset {}: {e}", path.display())))?;
                let r = std::io::BufReader::new(f);
                if is_csv(path) { read_dataset_csv(r)? } else { read_dataset(r)? }
            }
        };
        let want = self.model.build(&mut ChaCha8Rng::seed_from_u64(0))?.ambient_dim();
        if data.shape().len() != 2 || data.cols() != want {
            return Err(CefError::Config(format!(
                "dataset shape {:?} does not match model ambient dimension {want}",
                data.shape()
            )));
        }
        Ok(data)
    }
}

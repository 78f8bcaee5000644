//! Synthetic data and analytic ground truth for the sphere experiment.

mod files;
pub mod oracle;
mod sphere;

pub use files::{is_csv, read_dataset, read_dataset_csv, write_dataset, write_dataset_csv, DATASET_MAGIC};
pub use oracle::{oracle_embed, oracle_invert, oracle_lambda, oracle_log_lambda};
pub use sphere::{
    direction, sample_gaussian_dataset, sample_sphere_dataset, target_density_direction, target_density_sphere,
    target_log_density, SphereDatasetConfig,
};

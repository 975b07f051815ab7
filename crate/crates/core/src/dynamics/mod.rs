//! Brownian drivers, the Euler-Maruyama integrator for the finite system,
//! the coupled large-ensemble reference for the mean-field limit, and
//! trajectory export.

mod export;
mod paths;
mod simulate;

pub use export::{read_binary, write_binary, write_csv, BINARY_MAGIC, BINARY_VERSION};
pub use paths::{sample_noise_paths, sample_noise_paths_keyed, NoisePaths, StreamKey};
pub use simulate::{
    euler_step, simulate, simulate_finite, simulate_mean_field_keyed, simulate_mean_field_reference,
    HerderControl, MeanFieldFlow, NoControl, RunOptions, TrajectoryBundle,
};

//! Metrics and exact small-instance oracles.

mod acf;
mod is;
mod ising;
mod sw;

pub use acf::{autocorrelation, bootstrap_iat, integrated_time, site_averaged_acf, AcfSeries, IatInterval};
pub use is::{effective_sample_size, importance_sampling, IsEstimate};
pub use ising::{ising_bruteforce, spins_of, state_of, tv_distance, tv_noise_floor, IsingTable, MAX_ISING_DIM};
pub use sw::{random_directions, sliced_wasserstein, sliced_wasserstein_with, wasserstein_1d, DEFAULT_PROJECTIONS};

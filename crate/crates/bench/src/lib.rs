//! Fixtures shared by the benchmarks.

use tilted_core::experiments::{fig3_instance, sample_evolved_prior, GmmInstance};
use tilted_core::{PriorModel, SampleBatch, Semigroup};

/// The `d = 8`, `κ = 20` mixture instance used across benchmarks.
pub fn gmm_fixture(snr: f64) -> GmmInstance {
    fig3_instance(8, 20.0, snr, 7, 0).expect("valid fixture")
}

/// `n` prior draws at time `t`.
pub fn prior_batch(prior: &dyn PriorModel, t: f64, n: usize) -> SampleBatch {
    sample_evolved_prior(prior, t, Semigroup::Ou, n, 11).expect("valid batch")
}

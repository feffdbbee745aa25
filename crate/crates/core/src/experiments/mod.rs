//! End-to-end experiment drivers shared by the CLI and the acceptance suite.

mod gmm;
mod ising;
mod iterated;
mod phi4;
mod pipeline;

pub use gmm::{
    fig3_instance, gmm_sweep, Design, is_collapse, run_methods, table2_instance, GmmInstance, GmmSweepConfig, GmmSweepRow,
    IsCollapseRow, Method, MethodConfig, MethodResult,
};
pub use ising::{ising_experiment, ising_instance, IsingConfig, IsingReport};
pub use iterated::{
    iterated_instance, iterated_transport, IteratedConfig, IteratedPrior, IteratedReport, LegReport,
};
pub use phi4::{phi4_acf, Phi4Config, Phi4Report, Phi4Variant, VariantReport};
pub use pipeline::{
    analytic_boost, exact_posterior, random_orthogonal, sample_evolved_prior, sample_mixture, BoostConfig,
};

/// `p`-th percentile (in `[0, 1]`) by linear interpolation; `NaN` for empty input.
pub fn percentile(values: &[f64], p: f64) -> f64 {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let pos = p.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

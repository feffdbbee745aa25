use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{reverse_sde, BatchMeta, SampleBatch, SdeConfig, TimeGrid};
use crate::error::{Error, Result};
use crate::priors::{GaussianMixturePosterior, PriorModel, Semigroup};
use crate::rng::{stream_rng, Purpose, SimRng};
use crate::spectral::{posterior_tilt, MeasurementModel};
use crate::tilt::{blowup_time, solve_tilt, working_time, DEFAULT_EPSILON};

/// Haar-distributed orthogonal matrix (QR of a Gaussian matrix, signs fixed).
pub fn random_orthogonal(d: usize, rng: &mut SimRng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(d, d, |_, _| StandardNormal.sample(rng));
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// `n` exact draws from an explicit mixture, one stream per row.
pub fn sample_mixture(mix: &GaussianMixturePosterior, n: usize, seed: u64) -> Result<SampleBatch> {
    let d = mix.dim();
    let mut data = vec![0.0; n * d];
    data.par_chunks_mut(d).enumerate().for_each(|(i, row)| {
        let mut rng = stream_rng(seed, Purpose::Exact, i as u64);
        mix.sample_into(&mut rng, row);
    });
    SampleBatch::new(n, d, data, BatchMeta { seed, sampler: "exact-mixture".into(), ..BatchMeta::default() })
}

/// `n` exact draws from `π_t`.
pub fn sample_evolved_prior(prior: &dyn PriorModel, t: f64, sg: Semigroup, n: usize, seed: u64) -> Result<SampleBatch> {
    let d = prior.dim();
    let mut data = vec![0.0; n * d];
    data.par_chunks_mut(d)
        .enumerate()
        .map(|(i, row)| {
            let mut rng = stream_rng(seed, Purpose::Init, i as u64);
            prior.sample_evolved_into(t, sg, &mut rng, row)
        })
        .collect::<Result<Vec<()>>>()?;
    let meta = BatchMeta { seed, sampler: format!("prior-{sg}"), prior: prior.name(), ..BatchMeta::default() };
    SampleBatch::new(n, d, data, meta)
}

/// `n` exact posterior draws, when the prior admits an explicit tilted mixture.
pub fn exact_posterior(prior: &dyn PriorModel, model: &MeasurementModel, n: usize, seed: u64) -> Result<SampleBatch> {
    let mix = prior
        .tilted_mixture(&posterior_tilt(model), 0.0, Semigroup::Ou)
        .ok_or_else(|| Error::Unsupported(format!("no analytic posterior for `{}`", prior.name())))??;
    let mut b = sample_mixture(&mix, n, seed)?;
    b.meta.prior = prior.name();
    b.meta.tilt = "posterior".into();
    Ok(b)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoostConfig {
    pub semigroup: Semigroup,
    /// Distance `ε` below the blow-up time at which the boosted law is sampled.
    pub epsilon: f64,
    pub sde_steps: usize,
    pub grid: TimeGrid,
    pub seed: u64,
}

impl Default for BoostConfig {
    fn default() -> Self {
        Self { semigroup: Semigroup::Ou, epsilon: DEFAULT_EPSILON, sde_steps: 1000, grid: TimeGrid::Geometric, seed: 0 }
    }
}

impl BoostConfig {
    /// Working time `T − ε` for a model.
    pub fn working_time(&self, model: &MeasurementModel) -> f64 {
        working_time(blowup_time(model, self.semigroup), self.epsilon)
    }

    /// Reverse diffusion from `t` back to zero.
    pub fn reverse(&self, prior: &dyn PriorModel, start: &SampleBatch, t: f64) -> Result<SampleBatch> {
        let cfg = SdeConfig::new(self.sde_steps, t, 0.0, self.seed).with_grid(self.grid);
        reverse_sde(prior, start, &cfg, self.semigroup)
    }
}

/// Exact samples of the boosted posterior `ν_t` at the working time, carried
/// back to `ν` by the reverse diffusion.
pub fn analytic_boost(prior: &dyn PriorModel, model: &MeasurementModel, n: usize, cfg: &BoostConfig) -> Result<SampleBatch> {
    let t = cfg.working_time(model);
    let state = solve_tilt(model, t, cfg.semigroup)?;
    let mix = prior
        .tilted_mixture(&state.tilt, t, cfg.semigroup)
        .ok_or_else(|| Error::Unsupported(format!("no analytic boosted posterior for `{}`", prior.name())))??;
    let start = sample_mixture(&mix, n, cfg.seed)?;
    let mut out = cfg.reverse(prior, &start, t)?;
    out.meta.sampler = format!("analytic-boost-{}", cfg.semigroup);
    out.meta.tilt = format!("t={t:e}");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orthogonal_is_orthogonal() {
        let mut rng = stream_rng(1, Purpose::Instance, 0);
        let q = random_orthogonal(5, &mut rng);
        assert!((q.transpose() * &q - DMatrix::identity(5, 5)).norm() < 1e-12);
    }
}

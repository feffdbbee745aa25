use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::pipeline::{random_orthogonal, sample_evolved_prior, sample_mixture};
use crate::dynamics::{reverse_sde, thermalize, SampleBatch, SdeConfig, ThermalizeConfig};
use crate::error::{Error, Result};
use crate::eval::sliced_wasserstein;
use crate::priors::{GaussianMixturePrior, PriorModel, Semigroup};
use crate::rng::{derive_seed, stream_rng, Purpose};
use crate::spectral::{posterior_tilt, MeasurementModel, SpectralOperator};
use crate::tilt::{iterated_schedule, IteratedSchedule, ScheduleSummary};

const SG: Semigroup = Semigroup::Heat;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IteratedConfig {
    pub n_samples: usize,
    /// Reverse-diffusion steps per leg.
    pub sde_steps: usize,
    /// Langevin time spent in each intermediate slice; zero skips thermalization.
    pub thermalize_duration: f64,
    pub thermalize_step: f64,
    /// Langevin time used to reach `ν_{k*}` when it has no explicit form.
    pub init_duration: f64,
    /// Forces the number of legs.
    pub k_star: Option<usize>,
    pub n_proj: usize,
    pub seed: u64,
}

impl Default for IteratedConfig {
    fn default() -> Self {
        Self {
            n_samples: 10_000,
            sde_steps: 200,
            thermalize_duration: 0.0,
            thermalize_step: 1e-3,
            init_duration: 5.0,
            k_star: None,
            n_proj: 256,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LegReport {
    pub k: usize,
    pub t_from: f64,
    pub t_to: f64,
    pub n_pinned: usize,
    /// SW to exact draws of `ν_k`, when the prior has an explicit tilt.
    pub sw: Option<f64>,
    pub wall_time: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IteratedReport {
    pub schedule: ScheduleSummary,
    /// Whether `ν_{k*}` was sampled exactly rather than by Langevin.
    pub exact_start: bool,
    pub legs: Vec<LegReport>,
    /// Errors against the analytic posterior, when available.
    pub sw: Option<f64>,
    pub mean_err: Option<f64>,
    /// Relative Frobenius error of the covariance.
    pub cov_err: Option<f64>,
    pub n: usize,
    pub wall_time: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IteratedPrior {
    /// `N(m, var I)` with a random mean.
    Gaussian { var: f64 },
    /// Equal-weight pair of components `±(separation/2)u` along a random unit `u`.
    Bimodal { separation: f64, var: f64 },
}

/// Prior and measurement `y = A x* + σw` with `A = diag(singulars) Vᵀ` for a
/// random orthogonal `V`. Repeated singular values give tied levels.
pub fn iterated_instance(
    singulars: &[f64],
    sigma: f64,
    prior: &IteratedPrior,
    seed: u64,
) -> Result<(GaussianMixturePrior, MeasurementModel)> {
    let d = singulars.len();
    if d == 0 || singulars.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::InvalidParameter("singular values must be positive".into()));
    }
    let mut rng = stream_rng(seed, Purpose::Instance, 0);
    let v = random_orthogonal(d, &mut rng);
    let mut gauss = |scale: f64| DVector::from_fn(d, |_, _| scale * rng.sample::<f64, _>(StandardNormal));
    let prior = match *prior {
        IteratedPrior::Gaussian { var } => GaussianMixturePrior::gaussian(gauss(0.5).as_slice().to_vec(), var)?,
        IteratedPrior::Bimodal { separation, var } => {
            let u = gauss(1.0).normalize() * (0.5 * separation);
            GaussianMixturePrior::new(vec![u.as_slice().to_vec(), (-u).as_slice().to_vec()], vec![0.5, 0.5], var)?
        }
    };
    let mut x_star = vec![0.0; d];
    prior.sample_into(&mut rng, &mut x_star)?;
    let s = DVector::from_column_slice(singulars);
    let op = SpectralOperator::from_factors(DMatrix::identity(d, d), s.clone(), v.clone())?;
    let ax = DMatrix::from_diagonal(&s) * v.transpose() * DVector::from_vec(x_star);
    let y = ax.map(|a| a + sigma * rng.sample::<f64, _>(StandardNormal));
    Ok((prior, MeasurementModel::new(op, sigma, y)?))
}

fn exact_level(prior: &dyn PriorModel, sched: &IteratedSchedule, k: usize, n: usize, seed: u64) -> Option<Result<SampleBatch>> {
    let tilt = match sched.level_tilt(k) {
        Ok(t) => t,
        Err(e) => return Some(Err(e)),
    };
    prior
        .tilted_mixture(&tilt, sched.threshold(k), SG)
        .map(|m| m.and_then(|m| sample_mixture(&m, n, seed)))
}

fn reset_pinned(sched: &IteratedSchedule, k: usize, batch: &mut SampleBatch) {
    let pinned = sched.pinned_directions(k);
    if pinned.is_empty() {
        return;
    }
    let base = sched.base();
    let d = batch.d();
    for row in batch.data_mut().chunks_mut(d) {
        let mut z = base.to_eigen(row);
        for &i in &pinned {
            z[i] = sched.pinned_values()[i];
        }
        row.copy_from_slice(base.from_eigen(&z).as_slice());
    }
}

/// Iterated tilted transport under the heat semigroup: sample `ν_{k*}`, then
/// for each earlier level run the reverse diffusion across one leg, reset the
/// coordinates pinned at that level and optionally thermalize in the slice.
pub fn iterated_transport(
    prior: &dyn PriorModel,
    model: &MeasurementModel,
    cfg: &IteratedConfig,
) -> Result<(SampleBatch, IteratedReport)> {
    let clock = Instant::now();
    let sched = iterated_schedule(model, &|t| prior.chi_bound(t), cfg.k_star)?;
    let k_star = sched.k_star();
    let n = cfg.n_samples;

    let (mut x, exact_start) = match exact_level(prior, &sched, k_star, n, derive_seed(cfg.seed, 1)) {
        Some(b) => (b?, true),
        None => {
            let t = sched.threshold(k_star);
            let init = sample_evolved_prior(prior, t, SG, n, derive_seed(cfg.seed, 1))?;
            let tc = ThermalizeConfig { duration: cfg.init_duration, step: cfg.thermalize_step, seed: derive_seed(cfg.seed, 2) };
            (thermalize(prior, &sched.level_tilt(k_star)?, t, SG, &init, &tc)?, false)
        }
    };

    let mut legs = Vec::with_capacity(k_star);
    for k in (0..k_star).rev() {
        let leg_clock = Instant::now();
        let (t_from, t_to) = (sched.threshold(k + 1), sched.threshold(k));
        let scfg = SdeConfig::new(cfg.sde_steps, t_from, t_to, derive_seed(cfg.seed, 10 + 2 * k as u64));
        x = reverse_sde(prior, &x, &scfg, SG)?;
        reset_pinned(&sched, k, &mut x);
        if cfg.thermalize_duration > 0.0 {
            let tc = ThermalizeConfig {
                duration: cfg.thermalize_duration,
                step: cfg.thermalize_step,
                seed: derive_seed(cfg.seed, 11 + 2 * k as u64),
            };
            x = thermalize(prior, &sched.level_tilt(k)?, t_to, SG, &x, &tc)?;
        }
        let sw = match exact_level(prior, &sched, k, n, derive_seed(cfg.seed, 1000 + k as u64)) {
            Some(r) => Some(sliced_wasserstein(&x, &r?, cfg.n_proj, derive_seed(cfg.seed, 4))?),
            None => None,
        };
        legs.push(LegReport {
            k,
            t_from,
            t_to,
            n_pinned: sched.pinned_directions(k).len(),
            sw,
            wall_time: leg_clock.elapsed().as_secs_f64(),
        });
    }

    let (mut sw, mut mean_err, mut cov_err) = (None, None, None);
    if let Some(mix) = prior.tilted_mixture(&posterior_tilt(model), 0.0, SG) {
        let mix = mix?;
        let reference = sample_mixture(&mix, n, derive_seed(cfg.seed, 3))?;
        sw = Some(sliced_wasserstein(&x, &reference, cfg.n_proj, derive_seed(cfg.seed, 4))?);
        mean_err = Some((x.mean() - mix.mean()).amax());
        let c = mix.covariance();
        cov_err = Some((x.covariance() - &c).norm() / c.norm());
    }
    x.meta.sampler = format!("iterated-k{k_star}");
    let report = IteratedReport {
        schedule: sched.summary(),
        exact_start,
        legs,
        sw,
        mean_err,
        cov_err,
        n: x.n(),
        wall_time: clock.elapsed().as_secs_f64(),
    };
    Ok((x, report))
}

use std::time::Instant;

use nalgebra::DVector;
use rand::Rng;
use rand_distr::{StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use super::pipeline::{analytic_boost, exact_posterior, random_orthogonal, sample_evolved_prior, BoostConfig};
use super::percentile;
use crate::dynamics::{langevin, LangevinConfig, LangevinVariant, SampleBatch, TiltedTarget};
use crate::error::{Error, Result};
use crate::eval::{importance_sampling, sliced_wasserstein, DEFAULT_PROJECTIONS};
use crate::priors::{grid_prior, GaussianMixturePrior, PriorModel, Semigroup};
use crate::rng::{derive_seed, stream_rng, Purpose, SimRng};
use crate::spectral::{posterior_tilt, MeasurementModel, SpectralOperator};
use crate::tilt::solve_tilt;

/// A random grid-prior instance with its measurement model and ground truth.
#[derive(Clone, Debug)]
pub struct GmmInstance {
    pub prior: GaussianMixturePrior,
    pub model: MeasurementModel,
    pub x_star: Vec<f64>,
}

fn observe(prior: &GaussianMixturePrior, op: SpectralOperator, sigma: f64, rng: &mut SimRng) -> Result<GmmInstance> {
    let mut x_star = vec![0.0; prior.dim()];
    prior.sample_into(rng, &mut x_star)?;
    let ax = op.dense() * DVector::from_column_slice(&x_star);
    let y = ax.map(|v| v + sigma * rng.sample::<f64, _>(StandardNormal));
    let model = MeasurementModel::new(op, sigma, y)?;
    Ok(GmmInstance { prior: prior.clone(), model, x_star })
}

/// Square operator with singular values `1`, `1/κ` and the rest uniform in
/// `[1/κ, 1]`; the noise level makes `λmin(Q) = snr`.
pub fn fig3_instance(d: usize, kappa: f64, snr: f64, seed: u64, index: usize) -> Result<GmmInstance> {
    if d < 2 || !(kappa >= 1.0) || !(snr > 0.0) {
        return Err(Error::InvalidParameter(format!("need d ≥ 2, κ ≥ 1, snr > 0; got {d}, {kappa}, {snr}")));
    }
    let mut rng = stream_rng(seed, Purpose::Instance, index as u64);
    let prior = grid_prior(d, &mut rng)?;
    let u = random_orthogonal(d, &mut rng);
    let v = random_orthogonal(d, &mut rng);
    let lo = 1.0 / kappa;
    let unif = Uniform::new_inclusive(lo, 1.0).expect("valid range");
    let s = DVector::from_fn(d, |i, _| match i {
        0 => 1.0,
        1 => lo,
        _ => rng.sample(unif),
    });
    let sigma = lo / snr.sqrt();
    let op = SpectralOperator::from_factors(u, s, v)?;
    observe(&prior, op, sigma, &mut rng)
}

/// Rank-deficient operator with `d' = round(frac·d)` singular values uniform in
/// `[0, 1]` and noise level uniform in `[0.2 max S, max S]`.
pub fn table2_instance(d: usize, frac: f64, seed: u64, index: usize) -> Result<GmmInstance> {
    let dp = ((frac * d as f64).round() as usize).clamp(1, d);
    let mut rng = stream_rng(seed, Purpose::Instance, index as u64);
    let prior = grid_prior(d, &mut rng)?;
    let u = random_orthogonal(dp, &mut rng);
    let v = random_orthogonal(d, &mut rng);
    let s = DVector::from_fn(dp, |_, _| rng.random::<f64>());
    let smax = s.max();
    let sigma = rng.random_range(0.2 * smax..=smax);
    let op = SpectralOperator::from_factors(u, s, v.columns(0, d).into_owned())?;
    observe(&prior, op, sigma, &mut rng)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Langevin on the posterior itself.
    Langevin,
    /// Langevin on the boosted posterior, then the reverse diffusion.
    BoostedLangevin,
    /// Exact boosted samples, then the reverse diffusion.
    AnalyticBoost,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Langevin => "langevin",
            Method::BoostedLangevin => "boosted_langevin",
            Method::AnalyticBoost => "analytic_boost",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodConfig {
    pub n_samples: usize,
    pub langevin_steps: usize,
    /// Langevin step as a fraction of `1/L`, `L = ‖Q_t‖ + 1/var(π_t components)`.
    pub step_scale: f64,
    pub variant: LangevinVariant,
    pub boost: BoostConfig,
    pub n_proj: usize,
}

impl Default for MethodConfig {
    fn default() -> Self {
        Self {
            n_samples: 2000,
            langevin_steps: 2000,
            step_scale: 0.25,
            variant: LangevinVariant::Ula,
            boost: BoostConfig::default(),
            n_proj: DEFAULT_PROJECTIONS,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub method: Method,
    /// `NaN` when the method failed.
    pub sw: f64,
    pub diverged: usize,
    pub wall_time: f64,
    pub error: Option<String>,
}

/// Component variance of the OU-evolved mixture.
fn component_var(prior: &GaussianMixturePrior, t: f64) -> f64 {
    let (a, v) = Semigroup::Ou.kernel(t);
    a * a * prior.delta() + v
}

fn standard_init(d: usize, n: usize, seed: u64) -> Result<SampleBatch> {
    let g = GaussianMixturePrior::gaussian(vec![0.0; d], 1.0)?;
    sample_evolved_prior(&g, 0.0, Semigroup::Ou, n, seed)
}

fn run_langevin(
    inst: &GmmInstance,
    t: f64,
    boosted: bool,
    init: &SampleBatch,
    cfg: &MethodConfig,
    seed: u64,
) -> Result<SampleBatch> {
    let tilt = if boosted { solve_tilt(&inst.model, t, Semigroup::Ou)?.tilt } else { posterior_tilt(&inst.model) };
    let target = TiltedTarget::new(&inst.prior, &tilt, t, Semigroup::Ou)?;
    let lip = tilt.max_curvature() + 1.0 / component_var(&inst.prior, t);
    let lc = LangevinConfig { step: cfg.step_scale / lip, n_steps: cfg.langevin_steps, seed, variant: cfg.variant };
    let (out, _) = langevin(&target, init, &lc)?;
    Ok(out)
}

fn run_method(inst: &GmmInstance, method: Method, cfg: &MethodConfig, seed: u64) -> Result<SampleBatch> {
    let d = inst.prior.dim();
    let init_seed = derive_seed(seed, 1);
    let chain_seed = derive_seed(seed, 2);
    let boost = BoostConfig { seed: derive_seed(seed, 3), ..cfg.boost };
    match method {
        Method::Langevin => {
            let init = standard_init(d, cfg.n_samples, init_seed)?;
            run_langevin(inst, 0.0, false, &init, cfg, chain_seed)
        }
        Method::BoostedLangevin => {
            let t = boost.working_time(&inst.model);
            let init = standard_init(d, cfg.n_samples, init_seed)?;
            let nu_t = run_langevin(inst, t, true, &init, cfg, chain_seed)?;
            boost.reverse(&inst.prior, &nu_t, t)
        }
        Method::AnalyticBoost => analytic_boost(&inst.prior, &inst.model, cfg.n_samples, &boost),
    }
}

/// Run each method on one instance and score it by sliced Wasserstein
/// distance to exact posterior samples. Failures are recorded, not raised.
pub fn run_methods(inst: &GmmInstance, methods: &[Method], cfg: &MethodConfig, seed: u64) -> Result<Vec<MethodResult>> {
    let reference = exact_posterior(&inst.prior, &inst.model, cfg.n_samples, derive_seed(seed, 0))?;
    let proj_seed = derive_seed(seed, 4);
    Ok(methods
        .iter()
        .map(|&method| {
            let clock = Instant::now();
            let res = run_method(inst, method, cfg, seed)
                .and_then(|s| Ok((sliced_wasserstein(&s, &reference, cfg.n_proj, proj_seed)?, s.meta.diverged)));
            let wall_time = clock.elapsed().as_secs_f64();
            match res {
                Ok((sw, diverged)) => MethodResult { method, sw, diverged, wall_time, error: None },
                Err(e) => {
                    log::warn!("{method} failed: {e}");
                    MethodResult { method, sw: f64::NAN, diverged: 0, wall_time, error: Some(e.to_string()) }
                }
            }
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Design {
    /// Square operator at fixed condition number, swept over SNR.
    Conditioned { kappa: f64, snrs: Vec<f64> },
    /// Rank-deficient operator, `d' = frac·d`.
    Degenerate { frac: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GmmSweepConfig {
    pub d: usize,
    pub design: Design,
    pub n_instances: usize,
    pub methods: Vec<Method>,
    pub method: MethodConfig,
    pub seed: u64,
}

impl Default for GmmSweepConfig {
    fn default() -> Self {
        Self {
            d: 8,
            design: Design::Conditioned { kappa: 20.0, snrs: vec![1e-5, 1e-4, 1e-3, 1e-2, 1e-1] },
            n_instances: 20,
            methods: vec![Method::Langevin, Method::BoostedLangevin, Method::AnalyticBoost],
            method: MethodConfig::default(),
            seed: 0,
        }
    }
}

/// One summary row per `(snr, method)`; `snr` is `NaN` for the degenerate design.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GmmSweepRow {
    pub d: usize,
    pub snr: f64,
    pub method: Method,
    pub sw_median: f64,
    pub sw_p25: f64,
    pub sw_p75: f64,
    pub sw_mean: f64,
    pub sw_std: f64,
    pub n_ok: usize,
    pub n_failed: usize,
    /// Per-instance distances, in instance order.
    #[serde(skip)]
    pub sw: Vec<f64>,
}

pub fn gmm_sweep(cfg: &GmmSweepConfig) -> Result<Vec<GmmSweepRow>> {
    if cfg.n_instances == 0 || cfg.methods.is_empty() {
        return Err(Error::InvalidParameter("sweep needs instances and methods".into()));
    }
    let snrs: Vec<f64> = match &cfg.design {
        Design::Conditioned { snrs, .. } => snrs.clone(),
        Design::Degenerate { .. } => vec![f64::NAN],
    };
    let mut rows = Vec::new();
    for (si, &snr) in snrs.iter().enumerate() {
        let mut per: Vec<Vec<f64>> = vec![Vec::new(); cfg.methods.len()];
        for i in 0..cfg.n_instances {
            // The same prior and operator at every SNR; only the noise level changes.
            let inst = match &cfg.design {
                Design::Conditioned { kappa, .. } => fig3_instance(cfg.d, *kappa, snr, cfg.seed, i)?,
                Design::Degenerate { frac } => table2_instance(cfg.d, *frac, cfg.seed, i)?,
            };
            let run_seed = derive_seed(derive_seed(cfg.seed, si as u64), 1000 + i as u64);
            let res = run_methods(&inst, &cfg.methods, &cfg.method, run_seed)?;
            for (k, r) in res.iter().enumerate() {
                log::info!("d={} snr={snr:e} instance={i} {}: sw={:.4}", cfg.d, r.method, r.sw);
                per[k].push(r.sw);
            }
        }
        for (k, &method) in cfg.methods.iter().enumerate() {
            let ok: Vec<f64> = per[k].iter().copied().filter(|v| v.is_finite()).collect();
            let mean = ok.iter().sum::<f64>() / ok.len().max(1) as f64;
            let var = ok.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (ok.len().max(2) - 1) as f64;
            rows.push(GmmSweepRow {
                d: cfg.d,
                snr,
                method,
                sw_median: percentile(&ok, 0.5),
                sw_p25: percentile(&ok, 0.25),
                sw_p75: percentile(&ok, 0.75),
                sw_mean: if ok.is_empty() { f64::NAN } else { mean },
                sw_std: if ok.len() < 2 { f64::NAN } else { var.sqrt() },
                n_ok: ok.len(),
                n_failed: per[k].len() - ok.len(),
                sw: per[k].clone(),
            });
        }
    }
    Ok(rows)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsCollapseRow {
    pub q_norm: f64,
    pub ess: f64,
    pub ess_fraction: f64,
    /// Self-normalized estimate of the posterior mean's first coordinate.
    pub estimate: f64,
}

/// Importance sampling from the grid prior towards posteriors of growing
/// `‖Q‖` (square operator at condition number `kappa`).
pub fn is_collapse(d: usize, kappa: f64, q_norms: &[f64], n: usize, seed: u64) -> Result<Vec<IsCollapseRow>> {
    q_norms
        .iter()
        .enumerate()
        .map(|(i, &qn)| {
            // λ₁ = 1, so ‖Q‖ = σ⁻² and λmin(Q) = ‖Q‖/κ².
            let inst = fig3_instance(d, kappa, qn / (kappa * kappa), seed, i)?;
            let draws = sample_evolved_prior(&inst.prior, 0.0, Semigroup::Ou, n, derive_seed(seed, 7 + i as u64))?;
            let r = importance_sampling(&draws, &posterior_tilt(&inst.model), &|x| x[0])?;
            Ok(IsCollapseRow { q_norm: qn, ess: r.ess, ess_fraction: r.ess_fraction(), estimate: r.estimate })
        })
        .collect()
}

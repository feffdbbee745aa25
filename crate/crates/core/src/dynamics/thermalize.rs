use std::time::Instant;

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{run_chains, BatchMeta, ChainOutcome, SampleBatch};
use crate::error::{Error, Result};
use crate::priors::{PriorModel, Semigroup};
use crate::rng::{stream_rng, Purpose};
use crate::spectral::{QuadraticTilt, TiltEntry};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThermalizeConfig {
    /// Langevin time `B`; zero disables thermalization.
    pub duration: f64,
    /// Upper bound on the step; the actual step divides `duration` evenly.
    pub step: f64,
    pub seed: u64,
}

/// `(1 + λ)(λχ − κ/(κ−1))`, the gradient Lipschitz bound on a leg with top
/// curvature `λ` and condition number `κ` (use `f64::INFINITY` on a kernel).
pub fn lipschitz_bound(lambda: f64, chi: f64, kappa: f64) -> f64 {
    let ratio = if kappa.is_infinite() { 1.0 } else { kappa / (kappa - 1.0) };
    (1.0 + lambda) * (lambda * chi - ratio)
}

/// ULA on `T_tilt π_t` restricted to the affine slice where every pinned
/// eigen-coordinate equals its constraint. Free coordinates move; pinned ones
/// are reset exactly.
pub fn thermalize(
    prior: &dyn PriorModel,
    tilt: &QuadraticTilt,
    t: f64,
    sg: Semigroup,
    samples: &SampleBatch,
    cfg: &ThermalizeConfig,
) -> Result<SampleBatch> {
    let d = samples.d();
    if d != prior.dim() || d != tilt.dim() {
        return Err(Error::DimensionMismatch { expected: prior.dim(), got: d });
    }
    if !(cfg.duration >= 0.0) || !cfg.duration.is_finite() {
        return Err(Error::InvalidParameter(format!("duration must be nonnegative, got {}", cfg.duration)));
    }
    if cfg.duration == 0.0 {
        return Ok(samples.clone());
    }
    if !(cfg.step > 0.0) {
        return Err(Error::InvalidParameter(format!("step must be positive, got {}", cfg.step)));
    }
    let n_steps = (cfg.duration / cfg.step).ceil() as usize;
    let h = cfg.duration / n_steps as f64;
    let sq = (2.0 * h).sqrt();
    let v = tilt.eigvecs();
    let entries = tilt.entries();
    let clock = Instant::now();
    let (data, diverged) = run_chains(samples, "thermalize", |chain, x| {
        let mut rng = stream_rng(cfg.seed, Purpose::Langevin, chain as u64);
        let mut z = tilt.to_eigen(x);
        let mut s = vec![0.0; d];
        let pin = |z: &mut DVector<f64>| {
            for (zi, e) in z.iter_mut().zip(entries) {
                if let TiltEntry::Pinned { at } = *e {
                    *zi = at;
                }
            }
        };
        pin(&mut z);
        let mut xv = v * &z;
        for step in 0..n_steps {
            prior.score_into(xv.as_slice(), t, sg, &mut s)?;
            let sz = v.tr_mul(&DVector::from_column_slice(&s));
            for (i, e) in entries.iter().enumerate() {
                if let TiltEntry::Finite { q, xi } = *e {
                    let g = sz[i] - q * z[i] + xi;
                    let n: f64 = rng.sample(StandardNormal);
                    z[i] += h * g + sq * n;
                }
            }
            if z.iter().any(|v| !v.is_finite()) {
                return Ok(ChainOutcome::Diverged(step));
            }
            xv = v * &z;
        }
        x.copy_from_slice(xv.as_slice());
        Ok(ChainOutcome::Done)
    })?;
    let meta = BatchMeta {
        seed: cfg.seed,
        sampler: format!("{}+thermalize", samples.meta.sampler),
        prior: prior.name(),
        tilt: samples.meta.tilt.clone(),
        wall_time: samples.meta.wall_time + clock.elapsed().as_secs_f64(),
        diverged: samples.meta.diverged + diverged,
        n_steps: samples.meta.n_steps + n_steps,
    };
    SampleBatch::new(data.len() / d, d, data, meta)
}

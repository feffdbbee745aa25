use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{run_chains, BatchMeta, ChainOutcome, SampleBatch};
use crate::error::{Error, Result};
use crate::priors::{PriorModel, Semigroup};
use crate::rng::{stream_rng, Purpose};
use crate::spectral::QuadraticTilt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeGrid {
    Uniform,
    /// Uniform in `log(t − t_end + ε₀)`, clustering steps near `t_end`.
    Geometric,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SdeConfig {
    pub n_steps: usize,
    pub t_start: f64,
    pub t_end: f64,
    pub grid: TimeGrid,
    pub seed: u64,
    /// Offset `ε₀` of the geometric grid as a fraction of `t_start − t_end`.
    pub eps0_frac: f64,
}

impl SdeConfig {
    pub fn new(n_steps: usize, t_start: f64, t_end: f64, seed: u64) -> Self {
        Self { n_steps, t_start, t_end, grid: TimeGrid::Geometric, seed, eps0_frac: 0.01 }
    }

    pub fn with_grid(mut self, grid: TimeGrid) -> Self {
        self.grid = grid;
        self
    }

    /// Decreasing times `t_start = t₀ > t₁ > … > t_n = t_end`.
    pub fn times(&self) -> Result<Vec<f64>> {
        if !(self.t_end >= 0.0) || !(self.t_start >= self.t_end) || !self.t_start.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "need t_start ≥ t_end ≥ 0, got {} and {}",
                self.t_start, self.t_end
            )));
        }
        let span = self.t_start - self.t_end;
        if span == 0.0 {
            return Ok(vec![self.t_start]);
        }
        if self.n_steps == 0 {
            return Err(Error::InvalidParameter("positive span needs at least one step".into()));
        }
        let n = self.n_steps;
        let mut ts: Vec<f64> = match self.grid {
            TimeGrid::Uniform => (0..=n).map(|i| self.t_start - span * i as f64 / n as f64).collect(),
            TimeGrid::Geometric => {
                let e0 = self.eps0_frac * span;
                if !(e0 > 0.0) {
                    return Err(Error::InvalidParameter("geometric grid needs a positive offset".into()));
                }
                let (a, b) = ((span + e0).ln(), e0.ln());
                (0..=n)
                    .map(|i| self.t_end + (a + (b - a) * i as f64 / n as f64).exp() - e0)
                    .collect()
            }
        };
        ts[0] = self.t_start;
        ts[n] = self.t_end;
        if ts.windows(2).any(|w| !(w[0] > w[1])) {
            return Err(Error::InvalidParameter("degenerate time grid".into()));
        }
        Ok(ts)
    }
}

/// Euler–Maruyama integration of the reverse diffusion from `t_start` down to
/// `t_end`: `X ← X + h(X + 2∇log π_t(X)) + √(2h) Z` (OU) or
/// `X ← X + 2h∇log π_t(X) + √(2h) Z` (heat).
pub fn reverse_sde(prior: &dyn PriorModel, start: &SampleBatch, cfg: &SdeConfig, sg: Semigroup) -> Result<SampleBatch> {
    if start.d() != prior.dim() {
        return Err(Error::DimensionMismatch { expected: prior.dim(), got: start.d() });
    }
    let ts = cfg.times()?;
    let clock = Instant::now();
    let d = start.d();
    let (data, diverged) = run_chains(start, "reverse_sde", |chain, x| {
        let mut rng = stream_rng(cfg.seed, Purpose::Sde, chain as u64);
        let mut s = vec![0.0; d];
        for (step, w) in ts.windows(2).enumerate() {
            let (t, h) = (w[0], w[0] - w[1]);
            prior.score_into(x, t, sg, &mut s)?;
            let sq = (2.0 * h).sqrt();
            for (xi, si) in x.iter_mut().zip(&s) {
                let z: f64 = rng.sample(StandardNormal);
                let drift = match sg {
                    Semigroup::Ou => *xi + 2.0 * si,
                    Semigroup::Heat => 2.0 * si,
                };
                *xi += h * drift + sq * z;
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Ok(ChainOutcome::Diverged(step));
            }
        }
        Ok(ChainOutcome::Done)
    })?;
    let meta = BatchMeta {
        seed: cfg.seed,
        sampler: format!("reverse-sde-{sg}"),
        prior: prior.name(),
        tilt: start.meta.tilt.clone(),
        wall_time: clock.elapsed().as_secs_f64(),
        diverged: start.meta.diverged + diverged,
        n_steps: ts.len() - 1,
    };
    SampleBatch::new(data.len() / d, d, data, meta)
}

/// RK4 integration of the probability-flow ODE
/// `ẋ = −(I + Q_t)x − ∇log π_t(x) + b_t` (OU) or `ẋ = −Q_t x − ∇log π_t(x) + b_t`
/// (heat) from `t_start` down to `t_end`. `tilt_path(t)` returns `(Q_t, b_t)`.
pub fn probability_flow(
    prior: &dyn PriorModel,
    start: &SampleBatch,
    cfg: &SdeConfig,
    sg: Semigroup,
    tilt_path: &(dyn Fn(f64) -> Result<QuadraticTilt> + Sync),
) -> Result<SampleBatch> {
    if start.d() != prior.dim() {
        return Err(Error::DimensionMismatch { expected: prior.dim(), got: start.d() });
    }
    let ts = cfg.times()?;
    let clock = Instant::now();
    let d = start.d();
    // Tilts at every grid time and midpoint, shared across chains.
    let mut tilts = Vec::with_capacity(2 * ts.len());
    for w in ts.windows(2) {
        tilts.push(tilt_path(w[0])?);
        tilts.push(tilt_path(0.5 * (w[0] + w[1]))?);
    }
    if let Some(&last) = ts.last() {
        tilts.push(tilt_path(last)?);
    }
    let velocity = |x: &[f64], t: f64, tilt: &QuadraticTilt, out: &mut [f64]| -> Result<()> {
        let mut g = vec![0.0; d];
        tilt.grad_log_weight_into(x, &mut g);
        prior.score_into(x, t, sg, out)?;
        for ((o, gi), xi) in out.iter_mut().zip(&g).zip(x) {
            // −Q x + b − s, plus −x for OU.
            *o = gi - *o
                - match sg {
                    Semigroup::Ou => *xi,
                    Semigroup::Heat => 0.0,
                };
        }
        Ok(())
    };
    let (data, diverged) = run_chains(start, "probability_flow", |_, x| {
        let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d]);
        let mut tmp = vec![0.0; d];
        for (step, w) in ts.windows(2).enumerate() {
            let (t0, t1) = (w[0], w[1]);
            let h = t1 - t0;
            let tm = 0.5 * (t0 + t1);
            let (ta, tb, tc) = (&tilts[2 * step], &tilts[2 * step + 1], &tilts[2 * step + 2]);
            velocity(x, t0, ta, &mut k1)?;
            for i in 0..d {
                tmp[i] = x[i] + 0.5 * h * k1[i];
            }
            velocity(&tmp, tm, tb, &mut k2)?;
            for i in 0..d {
                tmp[i] = x[i] + 0.5 * h * k2[i];
            }
            velocity(&tmp, tm, tb, &mut k3)?;
            for i in 0..d {
                tmp[i] = x[i] + h * k3[i];
            }
            velocity(&tmp, t1, tc, &mut k4)?;
            for i in 0..d {
                x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Ok(ChainOutcome::Diverged(step));
            }
        }
        Ok(ChainOutcome::Done)
    })?;
    let meta = BatchMeta {
        seed: cfg.seed,
        sampler: format!("probability-flow-{sg}"),
        prior: prior.name(),
        tilt: start.meta.tilt.clone(),
        wall_time: clock.elapsed().as_secs_f64(),
        diverged: start.meta.diverged + diverged,
        n_steps: ts.len() - 1,
    };
    SampleBatch::new(data.len() / d, d, data, meta)
}

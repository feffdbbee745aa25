use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{run_chains, BatchMeta, ChainOutcome, SampleBatch};
use crate::error::{Error, Result};
use crate::priors::{PriorModel, Semigroup};
use crate::rng::{stream_rng, Purpose, SimRng};
use crate::spectral::QuadraticTilt;

/// An unnormalized log-density with gradient.
pub trait LogTarget: Sync {
    fn dim(&self) -> usize;

    fn log_density(&self, x: &[f64]) -> Result<f64>;

    fn grad_into(&self, x: &[f64], out: &mut [f64]) -> Result<()>;

    /// Log-density and gradient together.
    fn value_grad_into(&self, x: &[f64], out: &mut [f64]) -> Result<f64> {
        self.grad_into(x, out)?;
        self.log_density(x)
    }
}

/// `log π_t(x) − ½ xᵀQx + xᵀb` for a finite tilt.
pub struct TiltedTarget<'a> {
    prior: &'a dyn PriorModel,
    t: f64,
    sg: Semigroup,
    q: DMatrix<f64>,
    b: DVector<f64>,
}

impl<'a> TiltedTarget<'a> {
    pub fn new(prior: &'a dyn PriorModel, tilt: &QuadraticTilt, t: f64, sg: Semigroup) -> Result<Self> {
        if tilt.dim() != prior.dim() {
            return Err(Error::DimensionMismatch { expected: prior.dim(), got: tilt.dim() });
        }
        Ok(Self { prior, t, sg, q: tilt.dense_q()?, b: tilt.dense_b()? })
    }

    /// Largest tilt curvature, a lower bound on the gradient's Lipschitz constant.
    pub fn q_norm(&self) -> f64 {
        nalgebra::SymmetricEigen::new(self.q.clone()).eigenvalues.max()
    }
}

impl LogTarget for TiltedTarget<'_> {
    fn dim(&self) -> usize {
        self.prior.dim()
    }

    fn log_density(&self, x: &[f64]) -> Result<f64> {
        let xv = DVector::from_column_slice(x);
        let quad = -0.5 * xv.dot(&(&self.q * &xv)) + xv.dot(&self.b);
        Ok(self.prior.log_density(x, self.t, self.sg)? + quad)
    }

    fn grad_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.prior.score_into(x, self.t, self.sg, out)?;
        self.add_tilt(x, out);
        Ok(())
    }

    fn value_grad_into(&self, x: &[f64], out: &mut [f64]) -> Result<f64> {
        self.prior.score_into(x, self.t, self.sg, out)?;
        let quad = self.add_tilt(x, out);
        Ok(self.prior.log_density(x, self.t, self.sg)? + quad)
    }
}

impl TiltedTarget<'_> {
    /// Adds `b − Qx` to `out` and returns `−½xᵀQx + xᵀb`.
    fn add_tilt(&self, x: &[f64], out: &mut [f64]) -> f64 {
        let d = x.len();
        let mut quad = 0.0;
        for i in 0..d {
            // Q is symmetric, so column i is row i.
            let col = self.q.column(i);
            let mut qx = 0.0;
            for j in 0..d {
                qx += col[j] * x[j];
            }
            out[i] += self.b[i] - qx;
            quad += x[i] * (self.b[i] - 0.5 * qx);
        }
        quad
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LangevinVariant {
    /// Unadjusted Euler discretization.
    Ula,
    /// Metropolis-adjusted.
    Mala,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LangevinConfig {
    pub step: f64,
    pub n_steps: usize,
    pub seed: u64,
    pub variant: LangevinVariant,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LangevinStats {
    /// Fraction of accepted proposals (1 for ULA).
    pub acceptance: f64,
    pub diverged: usize,
}

struct Chain {
    x: Vec<f64>,
    g: Vec<f64>,
    logp: f64,
    prop: Vec<f64>,
    gp: Vec<f64>,
}

impl Chain {
    fn new(target: &dyn LogTarget, x: &[f64], mala: bool) -> Result<Self> {
        let d = x.len();
        let mut g = vec![0.0; d];
        let logp = if mala {
            target.value_grad_into(x, &mut g)?
        } else {
            target.grad_into(x, &mut g)?;
            0.0
        };
        Ok(Self { x: x.to_vec(), g, logp, prop: vec![0.0; d], gp: vec![0.0; d] })
    }

    /// One transition; returns `None` on divergence, else whether it moved.
    fn step(&mut self, target: &dyn LogTarget, cfg: &LangevinConfig, rng: &mut SimRng) -> Result<Option<bool>> {
        let h = cfg.step;
        let sq = (2.0 * h).sqrt();
        for ((p, x), g) in self.prop.iter_mut().zip(&self.x).zip(&self.g) {
            let z: f64 = rng.sample(StandardNormal);
            *p = x + h * g + sq * z;
        }
        if self.prop.iter().any(|v| !v.is_finite()) {
            return Ok(None);
        }
        let lp = match cfg.variant {
            LangevinVariant::Ula => {
                target.grad_into(&self.prop, &mut self.gp)?;
                0.0
            }
            LangevinVariant::Mala => target.value_grad_into(&self.prop, &mut self.gp)?,
        };
        if self.gp.iter().any(|v| !v.is_finite()) {
            return Ok(None);
        }
        match cfg.variant {
            LangevinVariant::Ula => {
                std::mem::swap(&mut self.x, &mut self.prop);
                std::mem::swap(&mut self.g, &mut self.gp);
                Ok(Some(true))
            }
            LangevinVariant::Mala => {
                if !lp.is_finite() {
                    return Ok(Some(false));
                }
                let mut fwd = 0.0;
                let mut bwd = 0.0;
                for i in 0..self.x.len() {
                    let a = self.prop[i] - self.x[i] - h * self.g[i];
                    let b = self.x[i] - self.prop[i] - h * self.gp[i];
                    fwd += a * a;
                    bwd += b * b;
                }
                let log_alpha = lp - self.logp - (bwd - fwd) / (4.0 * h);
                let u: f64 = rng.random();
                if u.ln() < log_alpha {
                    std::mem::swap(&mut self.x, &mut self.prop);
                    std::mem::swap(&mut self.g, &mut self.gp);
                    self.logp = lp;
                    Ok(Some(true))
                } else {
                    Ok(Some(false))
                }
            }
        }
    }
}

fn check(target: &dyn LogTarget, cfg: &LangevinConfig, d: usize) -> Result<()> {
    if !(cfg.step > 0.0) || !cfg.step.is_finite() {
        return Err(Error::InvalidParameter(format!("step must be positive, got {}", cfg.step)));
    }
    if d != target.dim() {
        return Err(Error::DimensionMismatch { expected: target.dim(), got: d });
    }
    Ok(())
}

fn warn_acceptance(acceptance: f64, variant: LangevinVariant) {
    if variant == LangevinVariant::Mala && acceptance < 0.01 {
        log::warn!("MALA acceptance rate {acceptance:.4} is below 1%; reduce the step size");
    }
}

/// Run `n_steps` of Langevin dynamics from every row of `init` in parallel.
pub fn langevin(target: &dyn LogTarget, init: &SampleBatch, cfg: &LangevinConfig) -> Result<(SampleBatch, LangevinStats)> {
    check(target, cfg, init.d())?;
    let clock = Instant::now();
    let accepted = AtomicU64::new(0);
    let mala = cfg.variant == LangevinVariant::Mala;
    let (data, diverged) = run_chains(init, "langevin", |i, row| {
        let mut rng = stream_rng(cfg.seed, Purpose::Langevin, i as u64);
        let mut c = Chain::new(target, row, mala)?;
        let mut acc = 0u64;
        for step in 0..cfg.n_steps {
            match c.step(target, cfg, &mut rng)? {
                None => return Ok(ChainOutcome::Diverged(step)),
                Some(moved) => acc += moved as u64,
            }
        }
        accepted.fetch_add(acc, Ordering::Relaxed);
        row.copy_from_slice(&c.x);
        Ok(ChainOutcome::Done)
    })?;
    let d = init.d();
    let n = data.len() / d;
    let acceptance = if cfg.n_steps == 0 {
        1.0
    } else {
        accepted.load(Ordering::Relaxed) as f64 / (n * cfg.n_steps) as f64
    };
    warn_acceptance(acceptance, cfg.variant);
    let meta = BatchMeta {
        seed: cfg.seed,
        sampler: match cfg.variant {
            LangevinVariant::Ula => "ula".into(),
            LangevinVariant::Mala => "mala".into(),
        },
        prior: init.meta.prior.clone(),
        tilt: init.meta.tilt.clone(),
        wall_time: clock.elapsed().as_secs_f64(),
        diverged: init.meta.diverged + diverged,
        n_steps: cfg.n_steps,
    };
    Ok((SampleBatch::new(n, d, data, meta)?, LangevinStats { acceptance, diverged }))
}

/// A single chain that hands every state to `observe(step, x)`.
pub fn langevin_observed(
    target: &dyn LogTarget,
    x0: &[f64],
    cfg: &LangevinConfig,
    chain: u64,
    observe: &mut dyn FnMut(usize, &[f64]),
) -> Result<LangevinStats> {
    check(target, cfg, x0.len())?;
    let mut rng = stream_rng(cfg.seed, Purpose::Langevin, chain);
    let mut c = Chain::new(target, x0, cfg.variant == LangevinVariant::Mala)?;
    let mut acc = 0usize;
    for step in 0..cfg.n_steps {
        match c.step(target, cfg, &mut rng)? {
            None => return Err(Error::Diverged { chain: chain as usize, step }),
            Some(moved) => acc += moved as usize,
        }
        observe(step, &c.x);
    }
    let acceptance = if cfg.n_steps == 0 { 1.0 } else { acc as f64 / cfg.n_steps as f64 };
    warn_acceptance(acceptance, cfg.variant);
    Ok(LangevinStats { acceptance, diverged: 0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::priors::GaussianMixturePrior;

    struct StdNormal;

    impl LogTarget for StdNormal {
        fn dim(&self) -> usize {
            1
        }
        fn log_density(&self, x: &[f64]) -> Result<f64> {
            Ok(-0.5 * x[0] * x[0])
        }
        fn grad_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
            out[0] = -x[0];
            Ok(())
        }
    }

    #[test]
    fn gaussian_stationarity() {
        let init = SampleBatch::new(4000, 1, vec![0.0; 4000], BatchMeta::default()).unwrap();
        for variant in [LangevinVariant::Ula, LangevinVariant::Mala] {
            let cfg = LangevinConfig { step: 0.05, n_steps: 400, seed: 3, variant };
            let (out, stats) = langevin(&StdNormal, &init, &cfg).unwrap();
            let m = out.mean()[0];
            let v = out.covariance()[(0, 0)];
            assert!(m.abs() < 3.0 / (4000f64).sqrt() * 1.5, "{variant:?} mean {m}");
            // ULA bias: stationary variance 1/(1 − h/2).
            assert!((v - 1.0).abs() < 0.08, "{variant:?} var {v}");
            if variant == LangevinVariant::Mala {
                assert!(stats.acceptance > 0.95);
            }
        }
    }

    #[test]
    fn mala_acceptance_tends_to_one() {
        let init = SampleBatch::new(50, 1, vec![0.5; 50], BatchMeta::default()).unwrap();
        let cfg = LangevinConfig { step: 1e-5, n_steps: 200, seed: 1, variant: LangevinVariant::Mala };
        let (_, stats) = langevin(&StdNormal, &init, &cfg).unwrap();
        assert!(stats.acceptance > 0.999);
    }

    #[test]
    fn divergent_chains_are_dropped() {
        let init = SampleBatch::new(5, 1, vec![1.0; 5], BatchMeta::default()).unwrap();
        let cfg = LangevinConfig { step: 10.0, n_steps: 2000, seed: 1, variant: LangevinVariant::Ula };
        assert!(matches!(langevin(&StdNormal, &init, &cfg), Err(Error::AllDiverged(5))));
    }

    #[test]
    fn tilted_target_gradient() {
        let p = GaussianMixturePrior::new(vec![vec![1.0, 0.0], vec![0.0, -1.0]], vec![0.5, 0.5], 0.4).unwrap();
        let q = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let tilt = QuadraticTilt::from_dense(&q, &DVector::from_vec(vec![0.3, -0.2])).unwrap();
        let tgt = TiltedTarget::new(&p, &tilt, 0.1, Semigroup::Ou).unwrap();
        let x = [0.4, -0.3];
        let mut g = [0.0; 2];
        tgt.grad_into(&x, &mut g).unwrap();
        let h = 1e-6;
        for i in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[i] += h;
            xm[i] -= h;
            let fd = (tgt.log_density(&xp).unwrap() - tgt.log_density(&xm).unwrap()) / (2.0 * h);
            assert!((g[i] - fd).abs() < 1e-6);
        }
        let mut g2 = [0.0; 2];
        let v = tgt.value_grad_into(&x, &mut g2).unwrap();
        assert!((v - tgt.log_density(&x).unwrap()).abs() < 1e-12);
        assert_eq!(g, g2);
    }
}

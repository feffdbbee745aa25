//! Prior models with exact scores along the forward noising semigroups.

mod gmm;
mod hypercube;
mod phi4;

pub use gmm::{gmm_chi_bound, grid_prior, GaussianMixturePosterior, GaussianMixturePrior, GmmSpec};
pub use hypercube::{hypercube_denoise, rounding_reduction, smoothed_hypercube_denoise, HypercubePrior};
pub use phi4::{periodic_laplacian, Phi4Prior, SiteTable};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SimRng;
use crate::spectral::QuadraticTilt;

/// Forward noising process.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Semigroup {
    /// Variance preserving: `X_t = e^{−t} X_0 + √(1 − e^{−2t}) Z`.
    Ou,
    /// Variance exploding: `X_t = X_0 + √(2t) Z`.
    Heat,
}

impl Semigroup {
    /// `(scale, noise variance)` of the transition kernel at time `t`.
    pub fn kernel(self, t: f64) -> (f64, f64) {
        match self {
            Semigroup::Ou => ((-t).exp(), -(-2.0 * t).exp_m1()),
            Semigroup::Heat => (1.0, 2.0 * t),
        }
    }
}

impl std::fmt::Display for Semigroup {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Semigroup::Ou => "ou",
            Semigroup::Heat => "heat",
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Capabilities {
    pub has_analytic_posterior: bool,
    pub has_chi_bound: bool,
}

/// A prior `π` together with its noised versions `π_t`.
pub trait PriorModel: Send + Sync {
    fn dim(&self) -> usize;

    fn name(&self) -> String;

    fn capabilities(&self) -> Capabilities;

    /// `log π_t(x)` up to an additive constant independent of `x`.
    fn log_density(&self, x: &[f64], t: f64, sg: Semigroup) -> Result<f64>;

    /// Writes `∇ log π_t(x)` into `out`.
    fn score_into(&self, x: &[f64], t: f64, sg: Semigroup, out: &mut [f64]) -> Result<()>;

    fn score(&self, x: &[f64], t: f64, sg: Semigroup) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim()];
        self.score_into(x, t, sg, &mut out)?;
        Ok(out)
    }

    /// Denoising oracle `E[X | X + σZ = y]`, `X ∼ π`.
    fn denoise(&self, y: &[f64], sigma: f64) -> Result<Vec<f64>>;

    /// An upper bound on the susceptibility `χ_t(π)`.
    fn chi_bound(&self, t: f64) -> Result<f64>;

    /// Exact draw from `π`.
    fn sample_into(&self, rng: &mut SimRng, out: &mut [f64]) -> Result<()>;

    /// Exact draw from `π_t`.
    fn sample_evolved_into(&self, t: f64, sg: Semigroup, rng: &mut SimRng, out: &mut [f64]) -> Result<()> {
        use rand::Rng;
        use rand_distr::StandardNormal;
        check_time(t)?;
        self.sample_into(rng, out)?;
        let (a, v) = sg.kernel(t);
        let s = v.sqrt();
        for o in out.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *o = a * *o + s * z;
        }
        Ok(())
    }

    /// The tilt `T_{Q,b} π_t` as an explicit Gaussian mixture, when available.
    fn tilted_mixture(
        &self,
        _tilt: &QuadraticTilt,
        _t: f64,
        _sg: Semigroup,
    ) -> Option<Result<GaussianMixturePosterior>> {
        None
    }
}

pub(crate) fn check_time(t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("time must be finite and nonnegative, got {t}")))
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

/// Stable `log cosh`.
pub(crate) fn log_cosh(z: f64) -> f64 {
    let a = z.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

use rand::Rng;
use rand_distr::StandardNormal;

use super::{check_dim, check_time, gmm_chi_bound, log_cosh, Capabilities, PriorModel, Semigroup};
use crate::dynamics::SampleBatch;
use crate::error::{Error, Result};
use crate::rng::SimRng;

/// Uniform measure on `{±1}ᵈ`, optionally smoothed by `N(0, δ I)`.
#[derive(Clone, Debug)]
pub struct HypercubePrior {
    d: usize,
    delta: f64,
}

impl HypercubePrior {
    /// `delta` is the smoothing variance; zero gives the discrete measure.
    pub fn new(d: usize, delta: f64) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidParameter("zero-dimensional hypercube".into()));
        }
        if !(delta >= 0.0) || !delta.is_finite() {
            return Err(Error::InvalidParameter(format!("smoothing variance must be ≥ 0, got {delta}")));
        }
        Ok(Self { d, delta })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    fn params(&self, t: f64, sg: Semigroup) -> Result<(f64, f64)> {
        check_time(t)?;
        let (a, v) = sg.kernel(t);
        let s = a * a * self.delta + v;
        if s <= 0.0 {
            return Err(Error::Unsupported("the discrete hypercube has no density".into()));
        }
        Ok((a, s))
    }
}

impl PriorModel for HypercubePrior {
    fn dim(&self) -> usize {
        self.d
    }

    fn name(&self) -> String {
        if self.delta == 0.0 {
            "hypercube".into()
        } else {
            "smoothed-hypercube".into()
        }
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities { has_analytic_posterior: false, has_chi_bound: true }
    }

    fn log_density(&self, x: &[f64], t: f64, sg: Semigroup) -> Result<f64> {
        check_dim(self.d, x.len())?;
        let (a, s) = self.params(t, sg)?;
        let c = -0.5 * (2.0 * std::f64::consts::PI * s).ln();
        Ok(x.iter()
            .map(|&xi| -(xi * xi + a * a) / (2.0 * s) + log_cosh(a * xi / s) + c)
            .sum())
    }

    fn score_into(&self, x: &[f64], t: f64, sg: Semigroup, out: &mut [f64]) -> Result<()> {
        check_dim(self.d, x.len())?;
        check_dim(self.d, out.len())?;
        let (a, s) = self.params(t, sg)?;
        for (o, &xi) in out.iter_mut().zip(x) {
            *o = -(xi - a * (a * xi / s).tanh()) / s;
        }
        Ok(())
    }

    fn denoise(&self, y: &[f64], sigma: f64) -> Result<Vec<f64>> {
        check_dim(self.d, y.len())?;
        if self.delta == 0.0 {
            hypercube_denoise(y, sigma)
        } else {
            y.iter()
                .map(|&v| smoothed_hypercube_denoise(v, sigma, self.delta.sqrt()))
                .collect()
        }
    }

    fn chi_bound(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        Ok(if self.delta == 0.0 { 1.0 } else { gmm_chi_bound(1.0, self.delta, t) })
    }

    fn sample_into(&self, rng: &mut SimRng, out: &mut [f64]) -> Result<()> {
        check_dim(self.d, out.len())?;
        let sd = self.delta.sqrt();
        for o in out.iter_mut() {
            let s = if rng.random::<bool>() { 1.0 } else { -1.0 };
            let z: f64 = if sd > 0.0 { rng.sample(StandardNormal) } else { 0.0 };
            *o = s + sd * z;
        }
        Ok(())
    }
}

/// Posterior mean of uniform `{±1}ᵈ` under `y = x + σ w`: `tanh(y/σ²)`.
pub fn hypercube_denoise(y: &[f64], sigma: f64) -> Result<Vec<f64>> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParameter(format!("noise std must be positive, got {sigma}")));
    }
    Ok(y.iter().map(|v| (v / (sigma * sigma)).tanh()).collect())
}

/// Posterior mean of `u ∼ ½N(−1, δ²) + ½N(1, δ²)` given `v = u + t w`.
/// Here `t` is the noise std and `delta` the smoothing std.
pub fn smoothed_hypercube_denoise(v: f64, t: f64, delta: f64) -> Result<f64> {
    if !(t > 0.0) || !(delta > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "noise and smoothing scales must be positive, got t={t}, delta={delta}"
        )));
    }
    let (d2, t2) = (delta * delta, t * t);
    let s2 = d2 * t2 / (d2 + t2);
    Ok(s2 * ((v / (d2 + t2)).tanh() / d2 + v / t2))
}

/// Componentwise sign with ties broken to `+1`.
pub fn rounding_reduction(batch: &SampleBatch) -> SampleBatch {
    let mut out = batch.clone();
    for x in out.data_mut() {
        *x = if *x >= 0.0 { 1.0 } else { -1.0 };
    }
    out.meta.sampler = format!("{}+round", batch.meta.sampler);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::simpson;
    use crate::rng::{stream_rng, Purpose};
    use approx::assert_relative_eq;

    #[test]
    fn tanh_oracle_matches_ratio() {
        let g = |y: f64, m: f64, s: f64| (-(y - m) * (y - m) / (2.0 * s * s)).exp();
        let ratio = (g(1.0, 1.0, 1.0) - g(1.0, -1.0, 1.0)) / (g(1.0, 1.0, 1.0) + g(1.0, -1.0, 1.0));
        let t = hypercube_denoise(&[1.0], 1.0).unwrap()[0];
        assert_relative_eq!(t, ratio, epsilon = 1e-15);
        assert_relative_eq!(t, 0.7615941559558, epsilon = 1e-12);
        assert_eq!(hypercube_denoise(&[0.0], 0.3).unwrap()[0], 0.0);
        assert_eq!(hypercube_denoise(&[1e6], 1.0).unwrap()[0], 1.0);
        assert!(hypercube_denoise(&[1.0], 0.0).is_err());
    }

    #[test]
    fn smoothed_denoiser() {
        assert_eq!(smoothed_hypercube_denoise(0.0, 0.5, 0.2).unwrap(), 0.0);
        assert_relative_eq!(smoothed_hypercube_denoise(1.0, 1.0, 1e-4).unwrap(), 1f64.tanh(), epsilon = 1e-6);
        let (v, t, delta) = (0.5, 0.8, 0.1);
        let prior = |u: f64| {
            (-(u - 1.0).powi(2) / (2.0 * delta * delta)).exp() + (-(u + 1.0).powi(2) / (2.0 * delta * delta)).exp()
        };
        let lik = |u: f64| (-(v - u).powi(2) / (2.0 * t * t)).exp();
        // Trapezoid oracle on [−3, 3].
        let n = 200_000;
        let h = 6.0 / n as f64;
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..=n {
            let u = -3.0 + i as f64 * h;
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            let p = w * prior(u) * lik(u);
            num += u * p;
            den += p;
        }
        assert_relative_eq!(smoothed_hypercube_denoise(v, t, delta).unwrap(), num / den, epsilon = 1e-6);
        assert!(smoothed_hypercube_denoise(0.1, 0.0, 0.1).is_err());
        assert!(smoothed_hypercube_denoise(0.1, 1.0, -0.1).is_err());
    }

    #[test]
    fn smoothed_score_and_tweedie() {
        let p = HypercubePrior::new(3, 0.05).unwrap();
        let x = [0.3, -0.8, 1.4];
        for t in [0.05, 0.4, 1.5] {
            let s = p.score(&x, t, Semigroup::Ou).unwrap();
            let sig = (2.0 * t).exp_m1().sqrt();
            let y: Vec<f64> = x.iter().map(|v| t.exp() * v).collect();
            let dn = p.denoise(&y, sig).unwrap();
            for i in 0..3 {
                let tw = -(x[i] - (-t).exp() * dn[i]) / (-(-2.0 * t).exp_m1());
                assert_relative_eq!(s[i], tw, max_relative = 1e-6, epsilon = 1e-9);
            }
            let h = 1e-5;
            for i in 0..3 {
                let mut xp = x;
                let mut xm = x;
                xp[i] += h;
                xm[i] -= h;
                let fd = (p.log_density(&xp, t, Semigroup::Ou).unwrap()
                    - p.log_density(&xm, t, Semigroup::Ou).unwrap())
                    / (2.0 * h);
                assert_relative_eq!(s[i], fd, max_relative = 1e-4);
            }
        }
    }

    #[test]
    fn log_density_normalized() {
        let p = HypercubePrior::new(1, 0.1).unwrap();
        let z = simpson(|x| p.log_density(&[x], 0.3, Semigroup::Heat).unwrap().exp(), -10.0, 10.0, 20_000);
        assert_relative_eq!(z, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn discrete_needs_time() {
        let p = HypercubePrior::new(2, 0.0).unwrap();
        assert!(p.score(&[0.1, 0.2], 0.0, Semigroup::Ou).is_err());
        assert_eq!(p.chi_bound(5.0).unwrap(), 1.0);
        let s = p.score(&[0.1, 0.2], 0.5, Semigroup::Ou).unwrap();
        assert!(s.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn samples_are_near_vertices() {
        let p = HypercubePrior::new(4, 0.0).unwrap();
        let mut rng = stream_rng(0, Purpose::Exact, 0);
        let mut x = [0.0; 4];
        p.sample_into(&mut rng, &mut x).unwrap();
        assert!(x.iter().all(|v| v.abs() == 1.0));
    }

    #[test]
    fn rounding() {
        let b = SampleBatch::from_rows(&[vec![0.2, -0.9], vec![0.0, -0.0]]).unwrap();
        let r = rounding_reduction(&b);
        assert_eq!(r.row(0), &[1.0, -1.0]);
        assert_eq!(r.row(1), &[1.0, 1.0]);
    }
}

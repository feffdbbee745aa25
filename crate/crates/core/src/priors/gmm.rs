use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{ChiSquared, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{check_dim, check_time, Capabilities, PriorModel, Semigroup};
use crate::error::{ensure_finite, Error, Result};
use crate::quad::log_sum_exp;
use crate::rng::SimRng;
use crate::spectral::{QuadraticTilt, TiltEntry};

/// JSON form of a mixture prior.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct GmmSpec {
    pub means: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub delta: f64,
}

/// `π = Σ wₖ N(mₖ, δ I)`.
#[derive(Clone, Debug)]
pub struct GaussianMixturePrior {
    d: usize,
    /// Row-major `K × d`.
    means: Vec<f64>,
    log_weights: Vec<f64>,
    delta: f64,
}

impl GaussianMixturePrior {
    pub fn new(means: Vec<Vec<f64>>, weights: Vec<f64>, delta: f64) -> Result<Self> {
        let k = means.len();
        if k == 0 {
            return Err(Error::InvalidParameter("mixture needs at least one component".into()));
        }
        check_dim(k, weights.len())?;
        let d = means[0].len();
        if d == 0 {
            return Err(Error::InvalidParameter("zero-dimensional mixture".into()));
        }
        for m in &means {
            check_dim(d, m.len())?;
            ensure_finite(m, "mixture means")?;
        }
        ensure_finite(&weights, "mixture weights")?;
        if weights.iter().any(|&w| w <= 0.0) {
            return Err(Error::InvalidParameter("mixture weights must be positive".into()));
        }
        if !(delta >= 0.0) || !delta.is_finite() {
            return Err(Error::InvalidParameter(format!("component variance must be ≥ 0, got {delta}")));
        }
        let raw: Vec<f64> = weights.iter().map(|w| w.ln()).collect();
        let lz = log_sum_exp(&raw);
        Ok(Self {
            d,
            means: means.into_iter().flatten().collect(),
            log_weights: raw.into_iter().map(|l| l - lz).collect(),
            delta,
        })
    }

    /// A single Gaussian `N(mean, var·I)`.
    pub fn gaussian(mean: Vec<f64>, var: f64) -> Result<Self> {
        Self::new(vec![mean], vec![1.0], var)
    }

    pub fn from_spec(spec: &GmmSpec) -> Result<Self> {
        Self::new(spec.means.clone(), spec.weights.clone(), spec.delta)
    }

    pub fn to_spec(&self) -> GmmSpec {
        GmmSpec {
            means: (0..self.n_components()).map(|k| self.mean_of(k).to_vec()).collect(),
            weights: self.weights(),
            delta: self.delta,
        }
    }

    pub fn n_components(&self) -> usize {
        self.log_weights.len()
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn mean_of(&self, k: usize) -> &[f64] {
        &self.means[k * self.d..(k + 1) * self.d]
    }

    pub fn weights(&self) -> Vec<f64> {
        self.log_weights.iter().map(|l| l.exp()).collect()
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    /// Radius of the smallest ball around the unweighted centroid of the means
    /// containing every mean.
    pub fn support_radius(&self) -> f64 {
        let k = self.n_components();
        let mut c = vec![0.0; self.d];
        for j in 0..k {
            for (ci, mi) in c.iter_mut().zip(self.mean_of(j)) {
                *ci += mi / k as f64;
            }
        }
        (0..k)
            .map(|j| {
                self.mean_of(j)
                    .iter()
                    .zip(&c)
                    .map(|(m, c)| (m - c) * (m - c))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max)
    }

    /// `π_t`, again a mixture: means scaled by the kernel, variance `a²δ + v`.
    pub fn evolved(&self, t: f64, sg: Semigroup) -> Result<Self> {
        check_time(t)?;
        let (a, v) = sg.kernel(t);
        Ok(Self {
            d: self.d,
            means: self.means.iter().map(|m| a * m).collect(),
            log_weights: self.log_weights.clone(),
            delta: a * a * self.delta + v,
        })
    }

    /// Log responsibilities `log rₖ(x)` of the mixture with means scaled by
    /// `a` and variance `s`; returns the log-normalizer `log Σ wₖ exp(−‖x−a mₖ‖²/2s)`.
    fn responsibilities(&self, x: &[f64], a: f64, s: f64, logr: &mut [f64]) -> f64 {
        for (k, lr) in logr.iter_mut().enumerate() {
            let m = self.mean_of(k);
            let r2: f64 = x.iter().zip(m).map(|(xi, mi)| (xi - a * mi) * (xi - a * mi)).sum();
            *lr = self.log_weights[k] - 0.5 * r2 / s;
        }
        let lz = log_sum_exp(logr);
        for lr in logr.iter_mut() {
            *lr -= lz;
        }
        lz
    }

    fn evolved_params(&self, t: f64, sg: Semigroup) -> Result<(f64, f64)> {
        check_time(t)?;
        let (a, v) = sg.kernel(t);
        let s = a * a * self.delta + v;
        if s <= 0.0 {
            return Err(Error::Unsupported(
                "score of a point-mass mixture at t = 0 is undefined".into(),
            ));
        }
        Ok((a, s))
    }

    /// `∇² log π_t(x) = s⁻¹(Cov_r[a m]/s − I)`.
    pub fn hessian(&self, x: &[f64], t: f64, sg: Semigroup) -> Result<DMatrix<f64>> {
        check_dim(self.d, x.len())?;
        let (a, s) = self.evolved_params(t, sg)?;
        let mut logr = vec![0.0; self.n_components()];
        self.responsibilities(x, a, s, &mut logr);
        let mut mean = DVector::zeros(self.d);
        let mut second = DMatrix::zeros(self.d, self.d);
        for (k, lr) in logr.iter().enumerate() {
            let r = lr.exp();
            let m = DVector::from_iterator(self.d, self.mean_of(k).iter().map(|v| a * v));
            mean.axpy(r, &m, 1.0);
            second.ger(r, &m, &m, 1.0);
        }
        let cov = second - &mean * mean.transpose();
        Ok((cov / s - DMatrix::identity(self.d, self.d)) / s)
    }

    /// Mixture mean.
    pub fn mean(&self) -> DVector<f64> {
        let mut m = DVector::zeros(self.d);
        for (k, lw) in self.log_weights.iter().enumerate() {
            m.axpy(lw.exp(), &DVector::from_column_slice(self.mean_of(k)), 1.0);
        }
        m
    }

    /// Exact posterior `T_{Q,b} π` by completing the square per component in
    /// the eigenbasis of the tilt.
    pub fn posterior_analytic(&self, tilt: &QuadraticTilt) -> Result<GaussianMixturePosterior> {
        check_dim(self.d, tilt.dim())?;
        let d = self.d;
        let kn = self.n_components();
        let delta = self.delta;
        let v = tilt.eigvecs();
        let entries = tilt.entries();
        if delta == 0.0 && !tilt.is_finite() {
            return Err(Error::Unsupported(
                "pinned direction on a point-mass mixture has zero probability".into(),
            ));
        }
        let var: Vec<f64> = entries
            .iter()
            .map(|e| match *e {
                TiltEntry::Finite { q, .. } if delta > 0.0 => 1.0 / (1.0 / delta + q),
                _ => 0.0,
            })
            .collect();
        let mut means_eig = vec![0.0; kn * d];
        let mut logw = vec![0.0; kn];
        for k in 0..kn {
            let mt = v.tr_mul(&DVector::from_column_slice(self.mean_of(k)));
            let mut lw = self.log_weights[k];
            for i in 0..d {
                let mu = mt[i];
                let c = match entries[i] {
                    TiltEntry::Finite { q, xi } => {
                        if delta > 0.0 {
                            let p = 1.0 / delta + q;
                            let c = (mu / delta + xi) / p;
                            lw += 0.5 * p * c * c - 0.5 * mu * mu / delta;
                            c
                        } else {
                            lw += -0.5 * q * mu * mu + xi * mu;
                            mu
                        }
                    }
                    TiltEntry::Pinned { at } => {
                        lw += -(at - mu) * (at - mu) / (2.0 * delta);
                        at
                    }
                };
                means_eig[k * d + i] = c;
            }
            logw[k] = lw;
        }
        GaussianMixturePosterior::new(v.clone(), logw, means_eig, var)
    }
}

impl PriorModel for GaussianMixturePrior {
    fn dim(&self) -> usize {
        self.d
    }

    fn name(&self) -> String {
        if self.n_components() == 1 {
            "gaussian".into()
        } else {
            format!("gmm{}", self.n_components())
        }
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities { has_analytic_posterior: true, has_chi_bound: true }
    }

    fn log_density(&self, x: &[f64], t: f64, sg: Semigroup) -> Result<f64> {
        check_dim(self.d, x.len())?;
        let (a, s) = self.evolved_params(t, sg)?;
        let mut logr = vec![0.0; self.n_components()];
        let lz = self.responsibilities(x, a, s, &mut logr);
        Ok(lz - 0.5 * self.d as f64 * (2.0 * std::f64::consts::PI * s).ln())
    }

    fn score_into(&self, x: &[f64], t: f64, sg: Semigroup, out: &mut [f64]) -> Result<()> {
        check_dim(self.d, x.len())?;
        check_dim(self.d, out.len())?;
        let (a, s) = self.evolved_params(t, sg)?;
        let mut logr = vec![0.0; self.n_components()];
        self.responsibilities(x, a, s, &mut logr);
        out.fill(0.0);
        for (k, lr) in logr.iter().enumerate() {
            let r = lr.exp();
            if r == 0.0 {
                continue;
            }
            for (o, m) in out.iter_mut().zip(self.mean_of(k)) {
                *o += r * a * m;
            }
        }
        for (o, xi) in out.iter_mut().zip(x) {
            *o = (*o - xi) / s;
        }
        Ok(())
    }

    fn denoise(&self, y: &[f64], sigma: f64) -> Result<Vec<f64>> {
        check_dim(self.d, y.len())?;
        if !(sigma > 0.0) {
            return Err(Error::InvalidParameter(format!("noise std must be positive, got {sigma}")));
        }
        let s2 = sigma * sigma;
        let tot = self.delta + s2;
        let mut logr = vec![0.0; self.n_components()];
        self.responsibilities(y, 1.0, tot, &mut logr);
        let mut out = vec![0.0; self.d];
        for (k, lr) in logr.iter().enumerate() {
            let r = lr.exp();
            for ((o, m), yi) in out.iter_mut().zip(self.mean_of(k)).zip(y) {
                *o += r * (s2 * m + self.delta * yi) / tot;
            }
        }
        Ok(out)
    }

    fn chi_bound(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        Ok(gmm_chi_bound(self.support_radius(), self.delta, t))
    }

    fn sample_into(&self, rng: &mut SimRng, out: &mut [f64]) -> Result<()> {
        check_dim(self.d, out.len())?;
        let k = pick(&self.log_weights, rng);
        let sd = self.delta.sqrt();
        for (o, m) in out.iter_mut().zip(self.mean_of(k)) {
            let z: f64 = rng.sample(StandardNormal);
            *o = m + sd * z;
        }
        Ok(())
    }

    fn tilted_mixture(
        &self,
        tilt: &QuadraticTilt,
        t: f64,
        sg: Semigroup,
    ) -> Option<Result<GaussianMixturePosterior>> {
        Some(self.evolved(t, sg).and_then(|p| p.posterior_analytic(tilt)))
    }
}

fn pick(log_weights: &[f64], rng: &mut SimRng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (k, lw) in log_weights.iter().enumerate() {
        acc += lw.exp();
        if u < acc {
            return k;
        }
    }
    log_weights.len() - 1
}

/// `(R/(1+δt))² + δ/(1+δt)`: susceptibility bound for a mixture whose means lie
/// in a ball of radius `R`.
pub fn gmm_chi_bound(r: f64, delta: f64, t: f64) -> f64 {
    let den = 1.0 + delta * t;
    (r / den).powi(2) + delta / den
}

/// Twenty-five unit-variance components with means `(8i, 8j, 8i, 8j, …)`,
/// `i, j ∈ {−2, …, 2}`, and χ²(1)-distributed unnormalized weights.
pub fn grid_prior(d: usize, rng: &mut SimRng) -> Result<GaussianMixturePrior> {
    let chi = ChiSquared::new(1.0).expect("valid degrees of freedom");
    let mut means = Vec::with_capacity(25);
    let mut weights = Vec::with_capacity(25);
    for i in -2..=2 {
        for j in -2..=2 {
            means.push((0..d).map(|c| 8.0 * if c % 2 == 0 { i } else { j } as f64).collect());
            // Guard against an underflowing draw.
            weights.push(rng.sample::<f64, _>(chi).max(1e-300));
        }
    }
    GaussianMixturePrior::new(means, weights, 1.0)
}

/// An explicit Gaussian mixture `Σ wₖ N(V cₖ, V diag(v) Vᵀ)` with a shared
/// eigenbasis `V`; zero variances mark directions fixed exactly.
#[derive(Clone, Debug)]
pub struct GaussianMixturePosterior {
    basis: DMatrix<f64>,
    log_weights: Vec<f64>,
    /// Row-major `K × d`, eigen-coordinates.
    means_eig: Vec<f64>,
    /// Row-major `K × d`, ambient coordinates.
    means: Vec<f64>,
    var: Vec<f64>,
}

impl GaussianMixturePosterior {
    pub fn new(basis: DMatrix<f64>, log_weights: Vec<f64>, means_eig: Vec<f64>, var: Vec<f64>) -> Result<Self> {
        let d = basis.nrows();
        let k = log_weights.len();
        check_dim(d, var.len())?;
        check_dim(k * d, means_eig.len())?;
        let lz = log_sum_exp(&log_weights);
        if !lz.is_finite() {
            return Err(Error::WeightCollapse);
        }
        let log_weights: Vec<f64> = log_weights.iter().map(|l| l - lz).collect();
        let mut means = vec![0.0; k * d];
        for j in 0..k {
            let c = DVector::from_column_slice(&means_eig[j * d..(j + 1) * d]);
            let m = &basis * c;
            means[j * d..(j + 1) * d].copy_from_slice(m.as_slice());
        }
        Ok(Self { basis, log_weights, means_eig, means, var })
    }

    pub fn dim(&self) -> usize {
        self.var.len()
    }

    pub fn n_components(&self) -> usize {
        self.log_weights.len()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.log_weights.iter().map(|l| l.exp()).collect()
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn mean_of(&self, k: usize) -> &[f64] {
        let d = self.dim();
        &self.means[k * d..(k + 1) * d]
    }

    pub fn eigen_mean_of(&self, k: usize) -> &[f64] {
        let d = self.dim();
        &self.means_eig[k * d..(k + 1) * d]
    }

    /// Per-direction component variance in the eigenbasis.
    pub fn variances(&self) -> &[f64] {
        &self.var
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn sample_into(&self, rng: &mut SimRng, out: &mut [f64]) {
        let d = self.dim();
        let k = pick(&self.log_weights, rng);
        let mut z = DVector::zeros(d);
        for (zi, v) in z.iter_mut().zip(&self.var) {
            if *v > 0.0 {
                let e: f64 = rng.sample(StandardNormal);
                *zi = v.sqrt() * e;
            }
        }
        let x = &self.basis * z;
        for ((o, m), xi) in out.iter_mut().zip(self.mean_of(k)).zip(x.iter()) {
            *o = m + xi;
        }
    }

    pub fn mean(&self) -> DVector<f64> {
        let d = self.dim();
        let mut m = DVector::zeros(d);
        for k in 0..self.n_components() {
            m.axpy(self.log_weights[k].exp(), &DVector::from_column_slice(self.mean_of(k)), 1.0);
        }
        m
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        let mean = self.mean();
        let mut c = &self.basis
            * DMatrix::from_diagonal(&DVector::from_column_slice(&self.var))
            * self.basis.transpose();
        for k in 0..self.n_components() {
            let dm = DVector::from_column_slice(self.mean_of(k)) - &mean;
            c.ger(self.log_weights[k].exp(), &dm, &dm, 1.0);
        }
        c
    }

    /// Log density; requires every variance to be positive.
    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        let d = self.dim();
        check_dim(d, x.len())?;
        if self.var.iter().any(|&v| v <= 0.0) {
            return Err(Error::Unsupported("degenerate mixture has no density".into()));
        }
        let z = self.basis.tr_mul(&DVector::from_column_slice(x));
        let log_norm: f64 = self.var.iter().map(|v| -0.5 * (2.0 * std::f64::consts::PI * v).ln()).sum();
        let terms: Vec<f64> = (0..self.n_components())
            .map(|k| {
                let c = self.eigen_mean_of(k);
                self.log_weights[k]
                    + (0..d).map(|i| -0.5 * (z[i] - c[i]).powi(2) / self.var[i]).sum::<f64>()
            })
            .collect();
        Ok(log_sum_exp(&terms) + log_norm)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{log_density_moments, simpson};
    use crate::rng::{stream_rng, Purpose};
    use approx::assert_relative_eq;

    fn two_point() -> GaussianMixturePrior {
        GaussianMixturePrior::new(vec![vec![-1.0], vec![1.0]], vec![0.5, 0.5], 0.01).unwrap()
    }

    fn fd_score(p: &GaussianMixturePrior, x: &[f64], t: f64, sg: Semigroup, h: f64) -> Vec<f64> {
        (0..x.len())
            .map(|i| {
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[i] += h;
                xm[i] -= h;
                (p.log_density(&xp, t, sg).unwrap() - p.log_density(&xm, t, sg).unwrap()) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn standard_gaussian_score() {
        let p = GaussianMixturePrior::gaussian(vec![0.0, 0.0], 1.0).unwrap();
        let s = p.score(&[0.3, -1.2], 0.0, Semigroup::Ou).unwrap();
        assert_relative_eq!(s[0], -0.3, epsilon = 1e-15);
        assert_relative_eq!(s[1], 1.2, epsilon = 1e-15);
    }

    #[test]
    fn symmetric_score_vanishes() {
        let s = two_point().score(&[0.0], 0.0, Semigroup::Ou).unwrap();
        assert_eq!(s[0], 0.0);
    }

    #[test]
    fn score_matches_finite_differences() {
        let p = two_point();
        let s = p.score(&[0.5], 0.0, Semigroup::Ou).unwrap();
        let fd = fd_score(&p, &[0.5], 0.0, Semigroup::Ou, 1e-6);
        assert_relative_eq!(s[0], fd[0], max_relative = 1e-6);
        for (t, sg) in [(0.3, Semigroup::Ou), (0.2, Semigroup::Heat)] {
            let s = p.score(&[0.37], t, sg).unwrap();
            let fd = fd_score(&p, &[0.37], t, sg, 1e-5);
            assert_relative_eq!(s[0], fd[0], max_relative = 1e-6);
        }
    }

    #[test]
    fn point_masses_need_positive_time() {
        let p = GaussianMixturePrior::new(vec![vec![1.0], vec![-1.0]], vec![1.0, 1.0], 0.0).unwrap();
        assert!(p.score(&[0.1], 0.0, Semigroup::Ou).is_err());
        assert!(p.score(&[0.1], 0.1, Semigroup::Ou).is_ok());
        assert!(p.score(&[0.1], -0.1, Semigroup::Ou).is_err());
    }

    #[test]
    fn huge_arguments_stay_finite() {
        let p = two_point();
        let s = p.score(&[1e6], 0.0, Semigroup::Ou).unwrap();
        assert!(s[0].is_finite());
    }

    #[test]
    fn ou_evolution_matches_convolution() {
        let p = two_point();
        let t = 0.4;
        let (a, v) = Semigroup::Ou.kernel(t);
        for x in [-1.3, 0.0, 0.4, 2.0] {
            // ∫ π(u) N(x; a u, v) du by quadrature.
            let f = |u: f64| {
                let pu = p.log_density(&[u], 0.0, Semigroup::Ou).unwrap().exp();
                pu * (-(x - a * u).powi(2) / (2.0 * v)).exp() / (2.0 * std::f64::consts::PI * v).sqrt()
            };
            let direct = simpson(f, -4.0, 4.0, 40_000);
            let evolved = p.log_density(&[x], t, Semigroup::Ou).unwrap().exp();
            assert_relative_eq!(direct, evolved, max_relative = 1e-6);
        }
        let e = p.evolved(t, Semigroup::Ou).unwrap();
        assert_relative_eq!(e.delta(), a * a * 0.01 + v, epsilon = 1e-15);
        assert_relative_eq!(e.mean_of(1)[0], a, epsilon = 1e-15);
    }

    #[test]
    fn zero_tilt_returns_prior() {
        let mut rng = stream_rng(1, Purpose::Instance, 0);
        let p = grid_prior(4, &mut rng).unwrap();
        let post = p.posterior_analytic(&QuadraticTilt::zero(4)).unwrap();
        for (a, b) in post.weights().iter().zip(p.weights()) {
            assert_relative_eq!(*a, b, max_relative = 1e-12);
        }
        for k in 0..25 {
            for (a, b) in post.mean_of(k).iter().zip(p.mean_of(k)) {
                assert_relative_eq!(*a, *b, epsilon = 1e-12);
            }
        }
        assert!(post.variances().iter().all(|&v| (v - 1.0).abs() < 1e-14));
    }

    #[test]
    fn conjugate_gaussian() {
        let p = GaussianMixturePrior::gaussian(vec![0.0], 1.0).unwrap();
        let tilt = QuadraticTilt::new(DMatrix::identity(1, 1), vec![TiltEntry::Finite { q: 1.0, xi: 1.0 }]).unwrap();
        let post = p.posterior_analytic(&tilt).unwrap();
        assert_relative_eq!(post.mean()[0], 0.5, epsilon = 1e-15);
        assert_relative_eq!(post.covariance()[(0, 0)], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn tilted_two_point_matches_quadrature() {
        let p = two_point();
        let (t, x) = (3.0, 0.2);
        let tilt = QuadraticTilt::new(DMatrix::identity(1, 1), vec![TiltEntry::Finite { q: t, xi: t * x }]).unwrap();
        let post = p.posterior_analytic(&tilt).unwrap();
        let logf = |u: f64| p.log_density(&[u], 0.0, Semigroup::Ou).unwrap() - 0.5 * t * u * u + t * x * u;
        let m = log_density_moments(&logf, -3.0, 3.0, 200_000);
        assert_relative_eq!(post.mean()[0], m.mean, epsilon = 1e-6);
        assert_relative_eq!(post.covariance()[(0, 0)], m.var, epsilon = 1e-6);
        // Component precision 1/δ + t.
        assert_relative_eq!(post.variances()[0], 1.0 / (100.0 + t), epsilon = 1e-15);
        assert_relative_eq!(post.weights().iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn pinned_direction_on_atoms_is_rejected() {
        let p = GaussianMixturePrior::new(vec![vec![1.0], vec![-1.0]], vec![1.0, 1.0], 0.0).unwrap();
        let tilt = QuadraticTilt::new(DMatrix::identity(1, 1), vec![TiltEntry::Pinned { at: 0.3 }]).unwrap();
        assert!(p.posterior_analytic(&tilt).is_err());
        let atoms = QuadraticTilt::new(DMatrix::identity(1, 1), vec![TiltEntry::Finite { q: 0.0, xi: 0.0 }]).unwrap();
        let post = p.posterior_analytic(&atoms).unwrap();
        assert_eq!(post.variances()[0], 0.0);
    }

    #[test]
    fn denoiser_matches_tweedie() {
        let p = GaussianMixturePrior::new(
            vec![vec![1.0, 0.0], vec![-1.0, 2.0], vec![0.5, -1.0]],
            vec![0.2, 0.5, 0.3],
            0.3,
        )
        .unwrap();
        for (x, t) in [([0.3, -0.2], 0.1), ([1.5, 0.7], 0.8), ([-2.0, 1.0], 2.0)] {
            let s = p.score(&x, t, Semigroup::Ou).unwrap();
            let sig = (2.0 * t).exp_m1().sqrt();
            let y: Vec<f64> = x.iter().map(|v| t.exp() * v).collect();
            let dn = p.denoise(&y, sig).unwrap();
            for i in 0..2 {
                let tw = -(x[i] - (-t).exp() * dn[i]) / (-(-2.0 * t).exp_m1());
                assert_relative_eq!(s[i], tw, max_relative = 1e-6, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn hessian_matches_finite_differences() {
        let p = GaussianMixturePrior::new(vec![vec![1.0, 0.0], vec![-1.0, 2.0]], vec![0.4, 0.6], 0.5).unwrap();
        let x = [0.2, 0.9];
        let h = p.hessian(&x, 0.1, Semigroup::Heat).unwrap();
        let eps = 1e-5;
        for j in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[j] += eps;
            xm[j] -= eps;
            let sp = p.score(&xp, 0.1, Semigroup::Heat).unwrap();
            let sm = p.score(&xm, 0.1, Semigroup::Heat).unwrap();
            for i in 0..2 {
                assert_relative_eq!(h[(i, j)], (sp[i] - sm[i]) / (2.0 * eps), epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn chi_bound_examples() {
        assert_relative_eq!(gmm_chi_bound(2.0, 0.5, 2.0), 1.25, epsilon = 1e-15);
        let g = GaussianMixturePrior::gaussian(vec![0.0; 3], 1.0).unwrap();
        assert_relative_eq!(g.chi_bound(1.0).unwrap(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn grid_prior_layout() {
        let mut rng = stream_rng(3, Purpose::Instance, 0);
        let p = grid_prior(6, &mut rng).unwrap();
        assert_eq!(p.n_components(), 25);
        assert_eq!(p.mean_of(0), &[-16.0, -16.0, -16.0, -16.0, -16.0, -16.0]);
        assert_eq!(p.mean_of(1), &[-16.0, -8.0, -16.0, -8.0, -16.0, -8.0]);
        assert_relative_eq!(p.weights().iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(p.support_radius(), (6.0 * 256.0f64).sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn spec_round_trip() {
        let p = two_point();
        let json = serde_json::to_string(&p.to_spec()).unwrap();
        let q = GaussianMixturePrior::from_spec(&serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(q.to_spec(), p.to_spec());
    }
}

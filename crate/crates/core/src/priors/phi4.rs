use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;

use super::{check_dim, check_time, Capabilities, PriorModel, Semigroup};
use crate::certify::{chi_numeric_1d, ChiSearch, Density1d};
use crate::error::{Error, Result};
use crate::quad::{auto_domain, log_density_moments};
use crate::rng::SimRng;

const SAMPLE_GRID: usize = 8000;
const SAMPLE_RANGE: f64 = 4.0;

/// Product measure on an `L × L` lattice with site density
/// `∝ exp(−φ⁴ + (1 + 2β) φ²)`. The nearest-neighbour coupling enters as the
/// quadratic tilt `β(−Δ)`, see [`periodic_laplacian`].
#[derive(Clone, Debug)]
pub struct Phi4Prior {
    l: usize,
    beta: f64,
    cdf: Arc<Vec<f64>>,
    log_z: f64,
    table: Option<Arc<SiteTable>>,
}

/// Evolved single-site log-density and score tabulated on a uniform grid.
#[derive(Debug)]
pub struct SiteTable {
    t: f64,
    sg: Semigroup,
    lo: f64,
    h: f64,
    log_density: Vec<f64>,
    score: Vec<f64>,
}

impl SiteTable {
    fn lookup(&self, x: f64) -> Option<(f64, f64)> {
        let u = (x - self.lo) / self.h;
        if !(u >= 0.0) || u >= (self.score.len() - 1) as f64 {
            return None;
        }
        let i = u as usize;
        let w = u - i as f64;
        Some((
            (1.0 - w) * self.log_density[i] + w * self.log_density[i + 1],
            (1.0 - w) * self.score[i] + w * self.score[i + 1],
        ))
    }
}

impl Phi4Prior {
    pub fn new(l: usize, beta: f64) -> Result<Self> {
        if l == 0 {
            return Err(Error::InvalidParameter("lattice side must be positive".into()));
        }
        if !(beta >= 0.0) || !beta.is_finite() {
            return Err(Error::InvalidParameter(format!("beta must be ≥ 0, got {beta}")));
        }
        let c = 1.0 + 2.0 * beta;
        let h = 2.0 * SAMPLE_RANGE / SAMPLE_GRID as f64;
        let dens: Vec<f64> = (0..=SAMPLE_GRID)
            .map(|i| {
                let p = -SAMPLE_RANGE + i as f64 * h;
                -p.powi(4) + c * p * p
            })
            .collect();
        let m = dens.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut cdf = Vec::with_capacity(SAMPLE_GRID + 1);
        let mut acc = 0.0;
        cdf.push(0.0);
        for i in 1..=SAMPLE_GRID {
            acc += 0.5 * h * ((dens[i - 1] - m).exp() + (dens[i] - m).exp());
            cdf.push(acc);
        }
        for v in cdf.iter_mut() {
            *v /= acc;
        }
        let logf = |p: f64| -p.powi(4) + c * p * p;
        let log_z = log_density_moments(&logf, -SAMPLE_RANGE, SAMPLE_RANGE, 4000).log_z;
        Ok(Self { l, beta, cdf: Arc::new(cdf), log_z, table: None })
    }

    pub fn side(&self) -> usize {
        self.l
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `−φ⁴ + (1 + 2β) φ²`
    pub fn site_log_density(&self, phi: f64) -> f64 {
        -phi.powi(4) + (1.0 + 2.0 * self.beta) * phi * phi
    }

    /// `−4φ³ + 2(1 + 2β) φ`
    pub fn site_score(&self, phi: f64) -> f64 {
        -4.0 * phi.powi(3) + 2.0 * (1.0 + 2.0 * self.beta) * phi
    }

    /// Log-density (normalized) and score of the single-site marginal of `π_t`
    /// by quadrature over the clean field value.
    pub fn evolved_site(&self, x: f64, t: f64, sg: Semigroup) -> Result<(f64, f64)> {
        check_time(t)?;
        let (a, v) = sg.kernel(t);
        if v == 0.0 {
            return Ok((self.site_log_density(x) - self.site_log_z(), self.site_score(x)));
        }
        let m = self.posterior_moments(x, a, v)?;
        let log_g = m.log_z - 0.5 * (2.0 * std::f64::consts::PI * v).ln() - self.site_log_z();
        Ok((log_g, (a * m.mean - x) / v))
    }

    /// Moments of `φ ∝ μ(φ) exp(−(x − aφ)²/2v)`.
    fn posterior_moments(&self, x: f64, a: f64, v: f64) -> Result<crate::quad::Moments> {
        let logf = |p: f64| self.site_log_density(p) - (x - a * p).powi(2) / (2.0 * v);
        // Locate the dominant mode on a coarse grid before bracketing.
        let (mut best, mut best_v) = (0.0, f64::NEG_INFINITY);
        let center = (x / a).clamp(-6.0, 6.0);
        for i in 0..=400 {
            let p = -6.0 + 12.0 * i as f64 / 400.0;
            for c in [p, center + (p / 6.0) * 0.2] {
                let lv = logf(c);
                if lv > best_v {
                    best = c;
                    best_v = lv;
                }
            }
        }
        let width = (0.1 + 5.0 * v.sqrt() / a).min(1.0);
        let (lo, hi) = auto_domain(&logf, best, width, 40.0)?;
        Ok(log_density_moments(&logf, lo, hi, 1200))
    }

    fn site_log_z(&self) -> f64 {
        self.log_z
    }

    /// Attach a table of the evolved single-site marginal at time `t` so that
    /// scores at that time cost one interpolation.
    pub fn with_table(&self, t: f64, sg: Semigroup) -> Result<Self> {
        check_time(t)?;
        let (a, v) = sg.kernel(t);
        let half = 8.0 * a.max(v.sqrt()).max(0.5);
        let n = 8000;
        let h = 2.0 * half / n as f64;
        let lz = self.site_log_z();
        let mut log_density = Vec::with_capacity(n + 1);
        let mut score = Vec::with_capacity(n + 1);
        for i in 0..=n {
            let x = -half + i as f64 * h;
            let (lg, s) = if v == 0.0 {
                (self.site_log_density(x) - lz, self.site_score(x))
            } else {
                let m = self.posterior_moments(x, a, v)?;
                (m.log_z - 0.5 * (2.0 * std::f64::consts::PI * v).ln() - lz, (a * m.mean - x) / v)
            };
            log_density.push(lg);
            score.push(s);
        }
        let mut out = self.clone();
        out.table = Some(Arc::new(SiteTable { t, sg, lo: -half, h, log_density, score }));
        Ok(out)
    }

    fn site_eval(&self, x: f64, t: f64, sg: Semigroup) -> Result<(f64, f64)> {
        if let Some(tab) = &self.table {
            if tab.t == t && tab.sg == sg {
                if let Some(r) = tab.lookup(x) {
                    return Ok(r);
                }
            }
        }
        self.evolved_site(x, t, sg)
    }

    fn sample_site(&self, rng: &mut SimRng) -> f64 {
        let u: f64 = rng.random();
        let i = self.cdf.partition_point(|&c| c < u).clamp(1, SAMPLE_GRID);
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        let w = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.5 };
        let h = 2.0 * SAMPLE_RANGE / SAMPLE_GRID as f64;
        -SAMPLE_RANGE + (i as f64 - 1.0 + w) * h
    }
}

impl PriorModel for Phi4Prior {
    fn dim(&self) -> usize {
        self.l * self.l
    }

    fn name(&self) -> String {
        format!("phi4-L{}-beta{}", self.l, self.beta)
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities { has_analytic_posterior: false, has_chi_bound: true }
    }

    fn log_density(&self, x: &[f64], t: f64, sg: Semigroup) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        check_time(t)?;
        if t == 0.0 {
            return Ok(x.iter().map(|&p| self.site_log_density(p)).sum());
        }
        let mut acc = 0.0;
        for &p in x {
            acc += self.site_eval(p, t, sg)?.0;
        }
        Ok(acc)
    }

    fn score_into(&self, x: &[f64], t: f64, sg: Semigroup, out: &mut [f64]) -> Result<()> {
        check_dim(self.dim(), x.len())?;
        check_dim(self.dim(), out.len())?;
        check_time(t)?;
        if t == 0.0 {
            for (o, &p) in out.iter_mut().zip(x) {
                *o = self.site_score(p);
            }
            return Ok(());
        }
        for (o, &p) in out.iter_mut().zip(x) {
            *o = self.site_eval(p, t, sg)?.1;
        }
        Ok(())
    }

    fn denoise(&self, y: &[f64], sigma: f64) -> Result<Vec<f64>> {
        check_dim(self.dim(), y.len())?;
        if !(sigma > 0.0) {
            return Err(Error::InvalidParameter(format!("noise std must be positive, got {sigma}")));
        }
        y.iter()
            .map(|&v| self.posterior_moments(v, 1.0, sigma * sigma).map(|m| m.mean))
            .collect()
    }

    fn chi_bound(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        let beta = self.beta;
        let density = Density1d::Continuous(Box::new(move |p: f64| -p.powi(4) + (1.0 + 2.0 * beta) * p * p));
        chi_numeric_1d(&density, t, &ChiSearch::default())
    }

    fn sample_into(&self, rng: &mut SimRng, out: &mut [f64]) -> Result<()> {
        check_dim(self.dim(), out.len())?;
        for o in out.iter_mut() {
            *o = self.sample_site(rng);
        }
        Ok(())
    }
}

/// The discrete operator `−Δ` on the periodic `L × L` lattice, normalized so
/// that its spectrum is `2 − cos(2πk/L) − cos(2πm/L) ∈ [0, 4]`.
pub fn periodic_laplacian(l: usize) -> DMatrix<f64> {
    let d = l * l;
    let mut m = DMatrix::zeros(d, d);
    let idx = |i: usize, j: usize| (i % l) * l + (j % l);
    for i in 0..l {
        for j in 0..l {
            let s = idx(i, j);
            m[(s, s)] += 2.0;
            for n in [idx(i + 1, j), idx(i + l - 1, j), idx(i, j + 1), idx(i, j + l - 1)] {
                m[(s, n)] -= 0.5;
            }
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, Purpose};
    use approx::assert_relative_eq;
    use nalgebra::SymmetricEigen;

    #[test]
    fn site_score_examples() {
        let p = Phi4Prior::new(2, 0.0).unwrap();
        assert_eq!(p.score(&[0.0; 4], 0.0, Semigroup::Ou).unwrap(), vec![0.0; 4]);
        assert_eq!(p.score(&[1.0; 4], 0.0, Semigroup::Ou).unwrap(), vec![-2.0; 4]);
    }

    #[test]
    fn score_matches_finite_differences() {
        let p = Phi4Prior::new(3, 0.4).unwrap();
        let mut rng = stream_rng(2, Purpose::Init, 0);
        let x: Vec<f64> = (0..9).map(|_| rng.random::<f64>() * 3.0 - 1.5).collect();
        let s = p.score(&x, 0.0, Semigroup::Ou).unwrap();
        let h = 1e-5;
        for i in 0..9 {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            let fd = (p.log_density(&xp, 0.0, Semigroup::Ou).unwrap()
                - p.log_density(&xm, 0.0, Semigroup::Ou).unwrap())
                / (2.0 * h);
            assert_relative_eq!(s[i], fd, max_relative = 1e-5, epsilon = 1e-8);
        }
    }

    #[test]
    fn evolved_score_matches_finite_differences() {
        let p = Phi4Prior::new(1, 0.2).unwrap();
        for (x, t, sg) in [(0.3, 0.2, Semigroup::Ou), (-1.1, 0.05, Semigroup::Heat), (2.5, 0.4, Semigroup::Ou)] {
            let (_, s) = p.evolved_site(x, t, sg).unwrap();
            let h = 1e-4;
            let fd = (p.evolved_site(x + h, t, sg).unwrap().0 - p.evolved_site(x - h, t, sg).unwrap().0) / (2.0 * h);
            assert_relative_eq!(s, fd, max_relative = 1e-5, epsilon = 1e-7);
        }
    }

    #[test]
    fn evolved_density_is_normalized() {
        let p = Phi4Prior::new(1, 0.4).unwrap();
        let z = crate::quad::simpson(|x| p.evolved_site(x, 0.3, Semigroup::Ou).unwrap().0.exp(), -6.0, 6.0, 2000);
        assert_relative_eq!(z, 1.0, epsilon = 1e-8);
    }

    #[test]
    fn table_agrees_with_quadrature() {
        let p = Phi4Prior::new(2, 0.4).unwrap();
        let t = 0.2;
        let tp = p.with_table(t, Semigroup::Ou).unwrap();
        for x in [-2.3, -0.7, 0.0, 0.11, 1.9] {
            let exact = p.evolved_site(x, t, Semigroup::Ou).unwrap();
            let tab = tp.site_eval(x, t, Semigroup::Ou).unwrap();
            assert_relative_eq!(exact.1, tab.1, epsilon = 1e-5);
            assert_relative_eq!(exact.0, tab.0, epsilon = 1e-5);
        }
    }

    #[test]
    fn sampler_matches_site_moments() {
        let p = Phi4Prior::new(1, 0.2).unwrap();
        let mut rng = stream_rng(9, Purpose::Exact, 0);
        let n = 200_000;
        let mut s2 = 0.0;
        let mut x = [0.0];
        for _ in 0..n {
            p.sample_into(&mut rng, &mut x).unwrap();
            s2 += x[0] * x[0];
        }
        let logf = |q: f64| p.site_log_density(q);
        let m = log_density_moments(&logf, -4.0, 4.0, 4000);
        assert_relative_eq!(s2 / n as f64, m.var, epsilon = 0.01);
    }

    #[test]
    fn laplacian_spectrum() {
        let l = 4;
        let lap = periodic_laplacian(l);
        assert_relative_eq!(lap.clone(), lap.transpose(), epsilon = 0.0);
        let eig = SymmetricEigen::new(lap);
        assert_relative_eq!(eig.eigenvalues.max(), 4.0, epsilon = 1e-12);
        assert!(eig.eigenvalues.min().abs() < 1e-12);
    }
}

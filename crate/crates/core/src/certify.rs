//! Susceptibility bounds and strong-log-concavity certificates for boosted
//! posteriors.

use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::priors::{GaussianMixturePrior, PriorModel, Semigroup};
use crate::quad::{auto_domain, golden_max, log_density_moments};
use crate::spectral::{posterior_tilt, MeasurementModel, QuadraticTilt};

/// A one-dimensional reference measure.
pub enum Density1d {
    /// Unnormalized log-density.
    Continuous(Box<dyn Fn(f64) -> f64 + Send + Sync>),
    /// Finitely many atoms with positive weights.
    Atomic { points: Vec<f64>, weights: Vec<f64> },
}

/// Search parameters for the supremum over the linear field.
#[derive(Clone, Copy, Debug)]
pub struct ChiSearch {
    /// The field `h` ranges over `[−field_max, field_max]`.
    pub field_max: f64,
    pub n_coarse: usize,
    /// Simpson intervals per variance evaluation.
    pub n_quad: usize,
    pub tol: f64,
}

impl Default for ChiSearch {
    fn default() -> Self {
        Self { field_max: 30.0, n_coarse: 121, n_quad: 4000, tol: 1e-9 }
    }
}

/// `Var[T_{t,h} π]` for the tilt `exp(−½ t u² + h u)`.
pub fn tilted_variance(density: &Density1d, t: f64, h: f64, n_quad: usize) -> Result<f64> {
    match density {
        Density1d::Continuous(f) => {
            let logf = |u: f64| f(u) - 0.5 * t * u * u + h * u;
            let mut best = (0.0, f64::NEG_INFINITY);
            for i in 0..=2000 {
                let u = -50.0 + 0.05 * i as f64;
                let v = logf(u);
                if v > best.1 {
                    best = (u, v);
                }
            }
            let (lo, hi) = auto_domain(&logf, best.0, 1.0, 40.0)?;
            Ok(log_density_moments(&logf, lo, hi, n_quad).var)
        }
        Density1d::Atomic { points, weights } => {
            if points.is_empty() || points.len() != weights.len() {
                return Err(Error::InvalidParameter("atomic measure needs matching points and weights".into()));
            }
            let logw: Vec<f64> = points
                .iter()
                .zip(weights)
                .map(|(&u, &w)| w.ln() - 0.5 * t * u * u + h * u)
                .collect();
            let m = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let (mut z, mut s1) = (0.0, 0.0);
            for (&u, &l) in points.iter().zip(&logw) {
                let p = (l - m).exp();
                z += p;
                s1 += p * u;
            }
            let mean = s1 / z;
            let s2: f64 = points
                .iter()
                .zip(&logw)
                .map(|(&u, &l)| (l - m).exp() * (u - mean) * (u - mean))
                .sum();
            Ok(s2 / z)
        }
    }
}

/// `χ_t(π) = sup_h Var[T_{t,h} π]` for a one-dimensional `π`.
pub fn chi_numeric_1d(density: &Density1d, t: f64, search: &ChiSearch) -> Result<f64> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidParameter(format!("tilt strength must be ≥ 0, got {t}")));
    }
    let n = search.n_coarse.max(3);
    let step = 2.0 * search.field_max / (n - 1) as f64;
    let hs: Vec<f64> = (0..n).map(|i| -search.field_max + i as f64 * step).collect();
    let vals = hs
        .iter()
        .map(|&h| tilted_variance(density, t, h, search.n_quad))
        .collect::<Result<Vec<f64>>>()?;
    let (imax, vmax) = vals
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
    let rising_left = imax == 0 && vals[0] > vals[1] * (1.0 + 1e-9);
    let rising_right = imax == n - 1 && vals[n - 1] > vals[n - 2] * (1.0 + 1e-9);
    if rising_left || rising_right {
        return Err(Error::ChiNotConverged { field: hs[imax] });
    }
    let lo = hs[imax.saturating_sub(1)];
    let hi = hs[(imax + 1).min(n - 1)];
    let (_, v) = golden_max(
        |h| tilted_variance(density, t, h, search.n_quad).unwrap_or(f64::NEG_INFINITY),
        lo,
        hi,
        search.tol.max(1e-12) * (1.0 + search.field_max),
    );
    Ok(v.max(vmax))
}

/// Outcome of the strong-log-concavity check `χ_{‖Q‖}(π) < ‖Q‖⁻¹ κ/(κ−1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub passed: bool,
    pub chi_value: f64,
    pub q_norm: f64,
    /// `λmax(Q)/λmin(Q)`, infinite for a singular `Q`.
    pub kappa_q: f64,
    pub rhs: f64,
    pub margin: f64,
    pub provenance: String,
}

/// `‖Q‖⁻¹ κ/(κ−1) = 1/(λmax − λmin)`; `‖Q‖⁻¹` when `λmin = 0` and `+∞` when
/// `Q` is a multiple of the identity.
pub fn certificate_rhs(lambda_max: f64, lambda_min: f64) -> f64 {
    if lambda_max <= lambda_min {
        f64::INFINITY
    } else {
        1.0 / (lambda_max - lambda_min.max(0.0))
    }
}

/// Assemble a report from a susceptibility value and the extreme tilt curvatures.
pub fn certificate_from_parts(chi: f64, lambda_max: f64, lambda_min: f64, provenance: &str) -> CertificateReport {
    let rhs = certificate_rhs(lambda_max, lambda_min);
    let margin = rhs - chi;
    let kappa_q = if lambda_min > 0.0 { lambda_max / lambda_min } else { f64::INFINITY };
    CertificateReport {
        passed: margin > 0.0,
        chi_value: chi,
        q_norm: lambda_max,
        kappa_q,
        rhs,
        margin,
        provenance: provenance.to_string(),
    }
}

/// Certificate for `T_{Q,b} π` given the tilt directly.
pub fn certify_tilt(prior: &dyn PriorModel, tilt: &QuadraticTilt) -> Result<CertificateReport> {
    let q = tilt.curvatures()?;
    let lmax = q.iter().copied().fold(0.0, f64::max);
    if lmax == 0.0 {
        return Err(Error::ZeroOperator);
    }
    let lmin = q.iter().copied().fold(f64::INFINITY, f64::min);
    let chi = prior.chi_bound(lmax)?;
    Ok(certificate_from_parts(chi, lmax, lmin, &format!("chi bound of {}", prior.name())))
}

/// Certificate for the posterior of a measurement model.
pub fn certify_slc(prior: &dyn PriorModel, model: &MeasurementModel) -> Result<CertificateReport> {
    certify_tilt(prior, &posterior_tilt(model))
}

/// One cell of the mixture phase diagram.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseCell {
    /// Amplitude signal-to-noise ratio `λmin(A)/σ`.
    pub snr: f64,
    /// `λmin(Q) = snr²`.
    pub snr_q: f64,
    pub kappa: f64,
    pub margin: f64,
}

/// `(1 + δS²)(δκ² + S⁻²)/(κ² − 1) − R²`, infinite at `κ = 1`.
pub fn phase_margin(r: f64, delta: f64, snr: f64, kappa: f64) -> f64 {
    if kappa <= 1.0 {
        return f64::INFINITY;
    }
    let s2 = snr * snr;
    let k2 = kappa * kappa;
    (1.0 + delta * s2) * (delta * k2 + 1.0 / s2) / (k2 - 1.0) - r * r
}

/// Margins over the product grid, SNR-major.
pub fn phase_diagram(r: f64, delta: f64, snr_grid: &[f64], kappa_grid: &[f64]) -> Result<Vec<PhaseCell>> {
    if snr_grid.iter().chain(kappa_grid).any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidParameter("phase-diagram grids must be positive and finite".into()));
    }
    if !(r >= 0.0) || !(delta >= 0.0) {
        return Err(Error::InvalidParameter("radius and variance must be nonnegative".into()));
    }
    let mut out = Vec::with_capacity(snr_grid.len() * kappa_grid.len());
    for &snr in snr_grid {
        for &kappa in kappa_grid {
            out.push(PhaseCell { snr, snr_q: snr * snr, kappa, margin: phase_margin(r, delta, snr, kappa) });
        }
    }
    Ok(out)
}

/// Largest value of `λmax(∇² log π_T(x)) − λmin(Q_T)` over the given points,
/// where `T` is the OU blow-up time of the model. Negative values certify that
/// `log ν_T` is strictly concave at every point.
pub fn gmm_hessian_margin(prior: &GaussianMixturePrior, model: &MeasurementModel, points: &[Vec<f64>]) -> Result<f64> {
    let q = posterior_tilt(model).curvatures()?;
    let qmax = q.iter().copied().fold(0.0, f64::max);
    let qmin = q.iter().copied().fold(f64::INFINITY, f64::min);
    if qmax == 0.0 {
        return Err(Error::ZeroOperator);
    }
    let t_blow = 0.5 * (1.0 / qmax).ln_1p();
    let qt_min = if qmin > 0.0 && qmin < qmax {
        (1.0 + 1.0 / qmax) / (1.0 / qmin - 1.0 / qmax)
    } else if qmin == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    let mut worst = f64::NEG_INFINITY;
    for x in points {
        let h = prior.hessian(x, t_blow, Semigroup::Ou)?;
        let top = SymmetricEigen::new(h).eigenvalues.max();
        worst = worst.max(top - qt_min);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::priors::{HypercubePrior, Phi4Prior};
    use approx::assert_relative_eq;
    use nalgebra::{DMatrix, DVector};

    fn gaussian() -> Density1d {
        Density1d::Continuous(Box::new(|u| -0.5 * u * u))
    }

    #[test]
    fn gaussian_chi() {
        for t in [0.1, 1.0, 10.0] {
            let c = chi_numeric_1d(&gaussian(), t, &ChiSearch::default()).unwrap();
            assert_relative_eq!(c, 1.0 / (1.0 + t), epsilon = 1e-6);
        }
    }

    #[test]
    fn two_point_chi_is_one() {
        let d = Density1d::Atomic { points: vec![-1.0, 1.0], weights: vec![0.5, 0.5] };
        for t in [0.0, 0.7, 5.0] {
            assert_relative_eq!(chi_numeric_1d(&d, t, &ChiSearch::default()).unwrap(), 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn phi4_eta() {
        let d = Density1d::Continuous(Box::new(|u: f64| -u.powi(4) + u * u));
        let eta = chi_numeric_1d(&d, 0.0, &ChiSearch::default()).unwrap();
        assert!((eta - 0.52).abs() < 0.02, "eta = {eta}");
    }

    #[test]
    fn phi4_chi_monotone() {
        let p = Phi4Prior::new(1, 0.3).unwrap();
        let mut prev = f64::INFINITY;
        for t in [0.0, 0.5, 1.0, 2.0, 4.0] {
            let c = p.chi_bound(t).unwrap();
            assert!(c <= prev + 1e-9);
            prev = c;
        }
    }

    #[test]
    fn rising_edge_is_reported() {
        // Laplace density: the tilted variance blows up as |h| → 1.
        let d = Density1d::Continuous(Box::new(|u: f64| -u.abs()));
        let s = ChiSearch { field_max: 0.9, n_coarse: 11, ..ChiSearch::default() };
        assert!(matches!(chi_numeric_1d(&d, 0.0, &s), Err(Error::ChiNotConverged { .. })));
    }

    #[test]
    fn ising_flip() {
        let p = HypercubePrior::new(3, 0.0).unwrap();
        for (gap, pass) in [(1.0 - 1e-9, true), (1.0 + 1e-9, false), (0.9, true), (1.5, false)] {
            let q = DMatrix::from_diagonal(&DVector::from_vec(vec![0.3 + gap, 0.5, 0.3]));
            let tilt = QuadraticTilt::from_dense(&q, &DVector::zeros(3)).unwrap();
            let r = certify_tilt(&p, &tilt).unwrap();
            assert_eq!(r.passed, pass, "gap {gap}");
            assert_eq!(r.passed, r.margin > 0.0);
        }
    }

    #[test]
    fn rhs_branches() {
        assert_eq!(certificate_rhs(2.0, 2.0), f64::INFINITY);
        assert_relative_eq!(certificate_rhs(4.0, 0.0), 0.25);
        let (lmax, lmin) = (5.0, 2.0);
        let k = lmax / lmin;
        assert_relative_eq!(certificate_rhs(lmax, lmin), k / (lmax * (k - 1.0)), epsilon = 1e-15);
    }

    #[test]
    fn phase_u_shape() {
        let (r, delta, kappa) = (3.0, 0.1, 5.0);
        let lo = phase_margin(r, delta, 1e-3, kappa);
        let mid = phase_margin(r, delta, 1.0, kappa);
        let hi = phase_margin(r, delta, 1e3, kappa);
        assert!(lo > 0.0 && hi > 0.0 && mid < 0.0);
        assert_eq!(phase_margin(r, delta, 1.0, 1.0), f64::INFINITY);
    }
}

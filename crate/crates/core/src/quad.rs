//! One-dimensional numerics: log-sum-exp, Simpson quadrature of unnormalized
//! log-densities, and golden-section maximization.

use crate::error::{Error, Result};

/// `log Σ exp(xᵢ)`, returning `−∞` for an empty or all-`−∞` input.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    if m == f64::INFINITY {
        return m;
    }
    m + xs.iter().map(|&x| (x - m).exp()).sum::<f64>().ln()
}

/// Composite Simpson rule with `n` (rounded up to even) intervals.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = (n.max(2) + 1) & !1;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// Normalizer and first two moments of a 1-D density given by its log.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Moments {
    pub log_z: f64,
    pub mean: f64,
    pub var: f64,
}

/// Simpson moments of `exp(logf)` on `[a, b]` with `n` intervals.
pub fn log_density_moments(logf: &impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> Moments {
    let n = (n.max(2) + 1) & !1;
    let h = (b - a) / n as f64;
    let xs: Vec<f64> = (0..=n).map(|i| a + i as f64 * h).collect();
    let ls: Vec<f64> = xs.iter().map(|&x| logf(x)).collect();
    let m = ls.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (mut z, mut s1) = (0.0, 0.0);
    for (i, (&x, &l)) in xs.iter().zip(&ls).enumerate() {
        let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
        let p = w * (l - m).exp();
        z += p;
        s1 += p * x;
    }
    let mean = s1 / z;
    // Central second moment in a separate pass for accuracy.
    let mut s2 = 0.0;
    for (i, (&x, &l)) in xs.iter().zip(&ls).enumerate() {
        let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
        s2 += w * (l - m).exp() * (x - mean) * (x - mean);
    }
    Moments { log_z: m + (z * h / 3.0).ln(), mean, var: s2 / z }
}

/// Find a symmetric-ish interval around `center` outside of which `logf` is at
/// least `drop` below its maximum on the interval. Starts from half-width
/// `width` and doubles up to 40 times.
pub fn auto_domain(logf: &impl Fn(f64) -> f64, center: f64, width: f64, drop: f64) -> Result<(f64, f64)> {
    let (mut lo, mut hi) = (center - width, center + width);
    for _ in 0..40 {
        let n = 400;
        let h = (hi - lo) / n as f64;
        let vals: Vec<f64> = (0..=n).map(|i| logf(lo + i as f64 * h)).collect();
        let m = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !m.is_finite() {
            return Err(Error::NonFinite("log-density on quadrature domain"));
        }
        let left_ok = vals[0] < m - drop;
        let right_ok = vals[n] < m - drop;
        if left_ok && right_ok {
            return Ok((lo, hi));
        }
        let w = hi - lo;
        if !left_ok {
            lo -= w;
        }
        if !right_ok {
            hi += w;
        }
    }
    Err(Error::InvalidParameter("density tails do not decay".into()))
}

/// Golden-section search for a maximum of a unimodal `f` on `[a, b]`.
pub fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn lse_basics() {
        assert_relative_eq!(log_sum_exp(&[0.0, 0.0]), 2f64.ln(), epsilon = 1e-15);
        assert_relative_eq!(log_sum_exp(&[1000.0, 1000.0]), 1000.0 + 2f64.ln(), epsilon = 1e-12);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY; 3]), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
    }

    #[test]
    fn simpson_polynomial_exact() {
        assert_relative_eq!(simpson(|x| x * x * x, 0.0, 2.0, 2), 4.0, epsilon = 1e-12);
    }

    #[test]
    fn gaussian_moments() {
        let logf = |x: f64| -0.5 * (x - 1.0) * (x - 1.0) / 4.0;
        let (a, b) = auto_domain(&logf, 0.0, 1.0, 40.0).unwrap();
        let m = log_density_moments(&logf, a, b, 2000);
        assert_relative_eq!(m.mean, 1.0, epsilon = 1e-9);
        assert_relative_eq!(m.var, 4.0, epsilon = 1e-9);
        assert_relative_eq!(m.log_z, (2.0 * std::f64::consts::PI * 4.0).sqrt().ln(), epsilon = 1e-9);
    }

    #[test]
    fn golden_finds_peak() {
        let (x, fx) = golden_max(|x| -(x - 0.3) * (x - 0.3), -2.0, 3.0, 1e-10);
        assert_relative_eq!(x, 0.3, epsilon = 1e-8);
        assert!(fx <= 0.0 && fx > -1e-15);
    }
}

use rand::Rng;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream_rng, Purpose};

/// Normalized autocorrelation up to `max_lag` with its integrated time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcfSeries {
    pub lags: Vec<usize>,
    pub acf: Vec<f64>,
    pub iat: f64,
}

/// IAT with a bootstrap interval over sites.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IatInterval {
    pub iat: f64,
    pub lo: f64,
    pub hi: f64,
}

impl IatInterval {
    pub fn overlaps(&self, other: &IatInterval) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }
}

fn raw_acf(trace: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let n = trace.len();
    if max_lag == 0 || n < 10 * max_lag {
        return Err(Error::InvalidParameter(format!(
            "trace of length {n} is too short for max_lag {max_lag} (need 10×)"
        )));
    }
    let mean = trace.iter().sum::<f64>() / n as f64;
    let m = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = trace.iter().map(|&x| Complex::new(x - mean, 0.0)).collect();
    buf.resize(m, Complex::new(0.0, 0.0));
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(m).process(&mut buf);
    for c in buf.iter_mut() {
        *c = Complex::new(c.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(m).process(&mut buf);
    let c0 = buf[0].re;
    let scale = trace.iter().map(|x| x.abs()).fold(0.0, f64::max).max(1.0);
    if !(c0 > 1e-24 * scale * scale * n as f64 * m as f64) {
        return Err(Error::ConstantTrace);
    }
    Ok(buf[..=max_lag].iter().map(|c| c.re / c0).collect())
}

/// `½ + Σ_{k=1}^{W} ρ_k` with the smallest window satisfying `W ≥ 5τ(W)`;
/// falls back to the full series when no such window exists. Never below ½.
pub fn integrated_time(acf: &[f64]) -> f64 {
    let mut tau = 0.5;
    for (w, &r) in acf.iter().enumerate().skip(1) {
        tau += r;
        if w as f64 >= 5.0 * tau {
            return tau.max(0.5);
        }
    }
    log::debug!("IAT window not reached within {} lags", acf.len().saturating_sub(1));
    tau.max(0.5)
}

/// Biased normalized ACF of one trace, computed by FFT.
pub fn autocorrelation(trace: &[f64], max_lag: usize) -> Result<AcfSeries> {
    let acf = raw_acf(trace, max_lag)?;
    Ok(AcfSeries { lags: (0..=max_lag).collect(), iat: integrated_time(&acf), acf })
}

fn per_site(traces: &[Vec<f64>], max_lag: usize) -> Result<Vec<Vec<f64>>> {
    if traces.is_empty() {
        return Err(Error::InvalidParameter("no traces".into()));
    }
    traces.iter().map(|t| raw_acf(t, max_lag)).collect()
}

fn average(rows: &[&Vec<f64>]) -> Vec<f64> {
    let mut out = vec![0.0; rows[0].len()];
    for r in rows {
        for (o, v) in out.iter_mut().zip(r.iter()) {
            *o += v;
        }
    }
    out.iter().map(|v| v / rows.len() as f64).collect()
}

/// ACF computed per site and then averaged.
pub fn site_averaged_acf(traces: &[Vec<f64>], max_lag: usize) -> Result<AcfSeries> {
    let acfs = per_site(traces, max_lag)?;
    let acf = average(&acfs.iter().collect::<Vec<_>>());
    Ok(AcfSeries { lags: (0..=max_lag).collect(), iat: integrated_time(&acf), acf })
}

/// Site-averaged IAT with a percentile interval at `level` (e.g. 0.68) from
/// resampling sites with replacement.
pub fn bootstrap_iat(traces: &[Vec<f64>], max_lag: usize, n_boot: usize, level: f64, seed: u64) -> Result<IatInterval> {
    if !(level > 0.0 && level < 1.0) || n_boot == 0 {
        return Err(Error::InvalidParameter("bootstrap needs 0 < level < 1 and n_boot ≥ 1".into()));
    }
    let acfs = per_site(traces, max_lag)?;
    let iat = integrated_time(&average(&acfs.iter().collect::<Vec<_>>()));
    let mut rng = stream_rng(seed, Purpose::Bootstrap, 0);
    let mut reps: Vec<f64> = (0..n_boot)
        .map(|_| {
            let pick: Vec<&Vec<f64>> = (0..acfs.len()).map(|_| &acfs[rng.random_range(0..acfs.len())]).collect();
            integrated_time(&average(&pick))
        })
        .collect();
    reps.sort_by(f64::total_cmp);
    let q = |p: f64| reps[((p * (n_boot - 1) as f64).round() as usize).min(n_boot - 1)];
    let tail = 0.5 * (1.0 - level);
    Ok(IatInterval { iat, lo: q(tail), hi: q(1.0 - tail) })
}

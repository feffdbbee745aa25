use serde::{Deserialize, Serialize};

use crate::dynamics::SampleBatch;
use crate::error::{Error, Result};
use crate::quad::log_sum_exp;
use crate::spectral::QuadraticTilt;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsEstimate {
    pub estimate: f64,
    /// `(Σw)²/Σw²`, in `[1, n]`.
    pub ess: f64,
    pub n: usize,
}

impl IsEstimate {
    pub fn ess_fraction(&self) -> f64 {
        self.ess / self.n as f64
    }
}

/// Kish effective sample size from log-weights.
pub fn effective_sample_size(log_w: &[f64]) -> Result<f64> {
    let lz = log_sum_exp(log_w);
    if !lz.is_finite() {
        return Err(Error::WeightCollapse);
    }
    let doubled: Vec<f64> = log_w.iter().map(|w| 2.0 * w).collect();
    Ok((2.0 * lz - log_sum_exp(&doubled)).exp())
}

/// Self-normalized importance sampling of `E_ν[f]` for `ν = T_{Q,b}π`
/// from prior draws, with weights `exp(−½xᵀQx + xᵀb)`.
pub fn importance_sampling(prior_samples: &SampleBatch, tilt: &QuadraticTilt, f: &dyn Fn(&[f64]) -> f64) -> Result<IsEstimate> {
    if tilt.dim() != prior_samples.d() {
        return Err(Error::DimensionMismatch { expected: tilt.dim(), got: prior_samples.d() });
    }
    let log_w: Vec<f64> = prior_samples.rows().map(|r| tilt.log_weight(r)).collect();
    let ess = effective_sample_size(&log_w)?;
    let lz = log_sum_exp(&log_w);
    let estimate = prior_samples
        .rows()
        .zip(&log_w)
        .map(|(r, lw)| (lw - lz).exp() * f(r))
        .sum();
    Ok(IsEstimate { estimate, ess, n: prior_samples.n() })
}

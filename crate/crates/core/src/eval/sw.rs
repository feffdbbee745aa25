use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::dynamics::SampleBatch;
use crate::error::{Error, Result};
use crate::rng::{stream_rng, Purpose};

pub const DEFAULT_PROJECTIONS: usize = 256;

/// `n` directions drawn uniformly on the unit sphere in `ℝᵈ`.
pub fn random_directions(d: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = stream_rng(seed, Purpose::Projection, 0);
    (0..n)
        .map(|_| loop {
            let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-12 {
                break v.into_iter().map(|x| x / norm).collect();
            }
        })
        .collect()
}

/// W₂ between two empirical measures on the line, coupling their quantile
/// functions exactly (sample sizes may differ).
pub fn wasserstein_1d(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    if a.len() == b.len() {
        let s: f64 = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum();
        return (s / na).sqrt();
    }
    let (mut i, mut j) = (0usize, 0usize);
    let mut u = 0.0;
    let mut acc = 0.0;
    while i < a.len() && j < b.len() {
        let ua = (i + 1) as f64 / na;
        let ub = (j + 1) as f64 / nb;
        let next = ua.min(ub);
        let diff = a[i] - b[j];
        acc += (next - u) * diff * diff;
        u = next;
        if ua <= ub {
            i += 1;
        }
        if ub <= ua {
            j += 1;
        }
    }
    acc.max(0.0).sqrt()
}

/// Mean over the given directions of the projected 1-D W₂ distances.
pub fn sliced_wasserstein_with(x: &SampleBatch, y: &SampleBatch, dirs: &[Vec<f64>]) -> Result<f64> {
    if x.d() != y.d() {
        return Err(Error::DimensionMismatch { expected: x.d(), got: y.d() });
    }
    if x.n() < 2 || y.n() < 2 {
        return Err(Error::InvalidParameter("sliced Wasserstein needs at least two samples per batch".into()));
    }
    if dirs.is_empty() {
        return Err(Error::InvalidParameter("need at least one projection".into()));
    }
    if let Some(bad) = dirs.iter().find(|t| t.len() != x.d()) {
        return Err(Error::DimensionMismatch { expected: x.d(), got: bad.len() });
    }
    let total: f64 = dirs.par_iter().map(|t| wasserstein_1d(&x.project(t), &y.project(t))).sum();
    Ok(total / dirs.len() as f64)
}

/// Sliced W₂ distance over `n_proj` seeded random directions.
pub fn sliced_wasserstein(x: &SampleBatch, y: &SampleBatch, n_proj: usize, seed: u64) -> Result<f64> {
    if x.d() != y.d() {
        return Err(Error::DimensionMismatch { expected: x.d(), got: y.d() });
    }
    sliced_wasserstein_with(x, y, &random_directions(x.d(), n_proj, seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn batch(v: &[f64]) -> SampleBatch {
        SampleBatch::from_rows(&v.iter().map(|&x| vec![x]).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn identical_batches() {
        let x = SampleBatch::from_rows(&[vec![1.0, 2.0], vec![-1.0, 0.5], vec![0.0, 0.0]]).unwrap();
        assert!(sliced_wasserstein(&x, &x, 64, 1).unwrap() < 1e-12);
    }

    #[test]
    fn shift_in_one_dimension() {
        let a = batch(&[0.0, 1.0, 2.0]);
        let b = batch(&[0.5, 1.5, 2.5]);
        assert!((sliced_wasserstein(&a, &b, 8, 3).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn unequal_sizes_merge_quantiles() {
        // Quantiles of {0,1} vs {0,0,3}: on [0,1/3] 0 vs 0, [1/3,1/2] 0 vs 0, [1/2,2/3] 1 vs 0, [2/3,1] 1 vs 3.
        let w = wasserstein_1d(&[0.0, 1.0], &[0.0, 0.0, 3.0]);
        let expect = ((1.0 / 6.0) * 1.0 + (1.0 / 3.0) * 4.0f64).sqrt();
        assert!((w - expect).abs() < 1e-12);
    }

    #[test]
    fn rejects_mismatch() {
        let a = batch(&[0.0, 1.0]);
        let b = SampleBatch::from_rows(&[vec![0.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert!(sliced_wasserstein(&a, &b, 4, 0).is_err());
        assert!(sliced_wasserstein(&a, &batch(&[1.0]), 4, 0).is_err());
    }
}

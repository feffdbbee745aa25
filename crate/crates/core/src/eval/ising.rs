use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::dynamics::{BatchMeta, SampleBatch};
use crate::error::{Error, Result};
use crate::quad::log_sum_exp;
use crate::rng::{stream_rng, Purpose};

pub const MAX_ISING_DIM: usize = 15;

/// Spin configuration of state `idx`: bit `i` set means `+1`.
pub fn spins_of(idx: usize, d: usize) -> Vec<f64> {
    (0..d).map(|i| if idx >> i & 1 == 1 { 1.0 } else { -1.0 }).collect()
}

/// Inverse of [`spins_of`]; nonnegative entries count as `+1`.
pub fn state_of(x: &[f64]) -> usize {
    x.iter().enumerate().filter(|(_, v)| **v >= 0.0).fold(0, |acc, (i, _)| acc | 1 << i)
}

/// Exact law `∝ exp(−½sᵀQs + bᵀs)` on `{±1}ᵈ`.
#[derive(Clone, Debug)]
pub struct IsingTable {
    d: usize,
    probs: Vec<f64>,
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
}

pub fn ising_bruteforce(q: &DMatrix<f64>, b: &DVector<f64>) -> Result<IsingTable> {
    let d = b.len();
    if d == 0 || d > MAX_ISING_DIM {
        return Err(Error::InvalidParameter(format!("exact enumeration needs 1 ≤ d ≤ {MAX_ISING_DIM}, got {d}")));
    }
    if q.nrows() != d || q.ncols() != d {
        return Err(Error::DimensionMismatch { expected: d, got: q.nrows() });
    }
    let n = 1usize << d;
    let log_w: Vec<f64> = (0..n)
        .map(|s| {
            let x = DVector::from_vec(spins_of(s, d));
            -0.5 * x.dot(&(q * &x)) + b.dot(&x)
        })
        .collect();
    let lz = log_sum_exp(&log_w);
    if !lz.is_finite() {
        return Err(Error::NonFinite("Ising partition function"));
    }
    let probs: Vec<f64> = log_w.iter().map(|l| (l - lz).exp()).collect();
    let mut mean = DVector::zeros(d);
    let mut second = DMatrix::zeros(d, d);
    for (s, &p) in probs.iter().enumerate() {
        let x = DVector::from_vec(spins_of(s, d));
        mean.axpy(p, &x, 1.0);
        second.ger(p, &x, &x, 1.0);
    }
    let covariance = second - &mean * mean.transpose();
    Ok(IsingTable { d, probs, mean, covariance })
}

impl IsingTable {
    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    /// Exact i.i.d. draws by inverse CDF.
    pub fn sample(&self, n: usize, seed: u64) -> Result<SampleBatch> {
        let mut cdf = Vec::with_capacity(self.probs.len());
        let mut acc = 0.0;
        for p in &self.probs {
            acc += p;
            cdf.push(acc);
        }
        let mut rng = stream_rng(seed, Purpose::Exact, 0);
        let mut data = Vec::with_capacity(n * self.d);
        for _ in 0..n {
            let u: f64 = rng.random::<f64>() * acc;
            let s = cdf.partition_point(|&c| c < u).min(cdf.len() - 1);
            data.extend(spins_of(s, self.d));
        }
        let meta = BatchMeta { seed, sampler: "ising-exact".into(), ..BatchMeta::default() };
        SampleBatch::new(n, self.d, data, meta)
    }
}

/// `½ Σ |p̂ − p|` between the empirical law of `samples` and the table.
pub fn tv_distance(samples: &SampleBatch, table: &IsingTable) -> Result<f64> {
    if samples.d() != table.d {
        return Err(Error::DimensionMismatch { expected: table.d, got: samples.d() });
    }
    let mut counts = vec![0usize; table.probs.len()];
    for r in samples.rows() {
        counts[state_of(r)] += 1;
    }
    let n = samples.n() as f64;
    Ok(0.5 * counts.iter().zip(&table.probs).map(|(&c, p)| (c as f64 / n - p).abs()).sum::<f64>())
}

/// Order of the TV error of an exact sampler: `√(2ᵈ/n)`.
pub fn tv_noise_floor(d: usize, n: usize) -> f64 {
    ((1u64 << d) as f64 / n as f64).sqrt()
}

//! Stochastic integrators: reverse SDE, probability flow, Langevin and
//! thermalization inside an affine slice.
//!
//! Every chain owns a random stream selected by its index, so outputs are
//! bitwise reproducible regardless of the thread count.

mod batch;
mod langevin;
mod sde;
mod thermalize;

pub use batch::{BatchMeta, SampleBatch};
pub use langevin::{
    langevin, langevin_observed, LangevinConfig, LangevinStats, LangevinVariant, LogTarget, TiltedTarget,
};
pub use sde::{probability_flow, reverse_sde, SdeConfig, TimeGrid};
pub use thermalize::{lipschitz_bound, thermalize, ThermalizeConfig};

use rayon::prelude::*;

use crate::error::{Error, Result};

pub(crate) enum ChainOutcome {
    Done,
    Diverged(usize),
}

/// Run `step` on every row in parallel, dropping diverged chains.
pub(crate) fn run_chains<F>(start: &SampleBatch, sampler: &str, f: F) -> Result<(Vec<f64>, usize)>
where
    F: Fn(usize, &mut [f64]) -> Result<ChainOutcome> + Sync,
{
    let d = start.d();
    let mut data = start.data().to_vec();
    let outcomes = data
        .par_chunks_mut(d)
        .enumerate()
        .map(|(i, row)| f(i, row))
        .collect::<Result<Vec<_>>>()?;
    let mut kept = Vec::with_capacity(data.len());
    let mut diverged = 0;
    for (i, (row, o)) in data.chunks(d).zip(&outcomes).enumerate() {
        match o {
            ChainOutcome::Done => kept.extend_from_slice(row),
            ChainOutcome::Diverged(step) => {
                diverged += 1;
                log::debug!("{sampler}: chain {i} diverged at step {step}");
            }
        }
    }
    if diverged > 0 {
        log::warn!("{sampler}: {diverged} of {} chains diverged and were excluded", start.n());
    }
    if kept.is_empty() {
        return Err(Error::AllDiverged(start.n()));
    }
    Ok((kept, diverged))
}

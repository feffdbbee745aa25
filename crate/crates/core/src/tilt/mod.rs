//! Closed-form solutions of the tilt ODEs, blow-up times, boosted observation
//! models and the iterated schedule.
//!
//! Under the OU semigroup each curvature obeys `q̇ = 2(1+q)q` and each linear
//! coefficient `ξ̇ = (1+2q)ξ`; under the heat semigroup `q̇ = 2q²`, `ξ̇ = 2qξ`.
//! Both are solved per eigendirection in closed form.

mod schedule;

pub use schedule::{iterated_schedule, IteratedSchedule, ScheduleLevel, ScheduleSummary};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::priors::Semigroup;
use crate::spectral::{posterior_tilt, MeasurementModel, QuadraticTilt, SpectralOperator, TiltEntry};

/// Default gap between the working time and the blow-up time.
pub const DEFAULT_EPSILON: f64 = 0.01;

/// Time at which a curvature `q_max` diverges; infinite for `q_max = 0`.
pub fn blowup_from_curvature(q_max: f64, sg: Semigroup) -> f64 {
    if q_max <= 0.0 {
        return f64::INFINITY;
    }
    match sg {
        Semigroup::Ou => 0.5 * (1.0 / q_max).ln_1p(),
        Semigroup::Heat => 0.5 / q_max,
    }
}

/// Blow-up time of the posterior tilt of `model`.
pub fn blowup_time(model: &MeasurementModel, sg: Semigroup) -> f64 {
    blowup_from_curvature(posterior_tilt(model).max_curvature(), sg)
}

/// `T − ε`, or `T/2` when `T ≤ ε`.
pub fn working_time(blowup: f64, epsilon: f64) -> f64 {
    if blowup > epsilon {
        blowup - epsilon
    } else {
        0.5 * blowup
    }
}

/// Evolve one direction forward by `t`. Pinned entries are unchanged.
pub fn evolve_entry(entry: TiltEntry, t: f64, sg: Semigroup) -> Result<TiltEntry> {
    match entry {
        TiltEntry::Pinned { .. } => Ok(entry),
        TiltEntry::Finite { q, xi } => {
            if q == 0.0 {
                return Ok(TiltEntry::Finite { q: 0.0, xi: 0.0 });
            }
            let (den, growth) = match sg {
                Semigroup::Ou => (1.0 - q * (2.0 * t).exp_m1(), t.exp()),
                Semigroup::Heat => (1.0 - 2.0 * t * q, 1.0),
            };
            if !(den > 0.0) {
                return Err(Error::BeyondBlowup { t, blowup: blowup_from_curvature(q, sg) });
            }
            let gq = match sg {
                Semigroup::Ou => growth * growth,
                Semigroup::Heat => 1.0,
            };
            Ok(TiltEntry::Finite { q: q * gq / den, xi: xi * growth / den })
        }
    }
}

/// A tilt evolved to time `t` along with its blow-up time.
#[derive(Clone, Debug)]
pub struct TiltState {
    pub t: f64,
    pub semigroup: Semigroup,
    pub blowup: f64,
    pub tilt: QuadraticTilt,
}

impl TiltState {
    pub fn dense_q(&self) -> Result<DMatrix<f64>> {
        self.tilt.dense_q()
    }

    pub fn dense_b(&self) -> Result<DVector<f64>> {
        self.tilt.dense_b()
    }
}

/// Evolve an arbitrary finite tilt to time `t`.
pub fn evolve_tilt(tilt: &QuadraticTilt, t: f64, sg: Semigroup) -> Result<TiltState> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidParameter(format!("time must be ≥ 0, got {t}")));
    }
    let blowup = blowup_from_curvature(tilt.max_curvature(), sg);
    if t >= blowup {
        return Err(Error::BeyondBlowup { t, blowup });
    }
    let entries = tilt
        .entries()
        .iter()
        .map(|&e| evolve_entry(e, t, sg))
        .collect::<Result<Vec<_>>>()?;
    Ok(TiltState { t, semigroup: sg, blowup, tilt: tilt.with_entries(entries)? })
}

/// `(Q_t, b_t)` for the posterior of `model`.
pub fn solve_tilt(model: &MeasurementModel, t: f64, sg: Semigroup) -> Result<TiltState> {
    evolve_tilt(&posterior_tilt(model), t, sg)
}

/// A unit-noise observation model whose posterior tilt equals `(Q_t, b_t)`:
/// singular values `√q(t)`, identity left factor, observation `ξ(t)/√q(t)`.
pub fn boosted_observation(model: &MeasurementModel, t: f64, sg: Semigroup) -> Result<MeasurementModel> {
    let state = solve_tilt(model, t, sg)?;
    let op = model.operator();
    let dp = op.d_prime();
    let mut s = DVector::zeros(dp);
    let mut y = DVector::zeros(dp);
    for i in 0..dp {
        if let TiltEntry::Finite { q, xi } = state.tilt.entries()[i] {
            if q > 0.0 {
                s[i] = q.sqrt();
                y[i] = xi / s[i];
            }
        }
    }
    let boosted = SpectralOperator::from_factors(DMatrix::identity(dp, dp), s, op.v().clone())?;
    MeasurementModel::new(boosted, 1.0, y)
}

/// What to do with directions whose curvature is infinite at the heat blow-up.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PinnedPolicy {
    /// Keep them as exact constraints.
    Keep,
    /// Drop the constraint and leave the direction untilted.
    Exclude,
}

/// The heat-semigroup target at the blow-up time: `Q*` with eigenvalues
/// `λ/(1 − λ/‖Q‖)` on the sub-leading directions, the top directions pinned,
/// together with the smoothing variance `‖Q‖⁻¹` applied to the prior.
pub fn boosted_heat_target(model: &MeasurementModel, policy: PinnedPolicy) -> Result<(QuadraticTilt, f64)> {
    let base = posterior_tilt(model);
    let qmax = base.max_curvature();
    if qmax == 0.0 {
        return Err(Error::ZeroOperator);
    }
    let entries = base
        .entries()
        .iter()
        .map(|&e| match e {
            TiltEntry::Finite { q, xi } if q > 0.0 => {
                let r = q / qmax;
                if r >= 1.0 - schedule::TIE_TOLERANCE {
                    match policy {
                        PinnedPolicy::Keep => TiltEntry::Pinned { at: xi / q },
                        PinnedPolicy::Exclude => TiltEntry::Finite { q: 0.0, xi: 0.0 },
                    }
                } else {
                    let qs = q / (1.0 - r);
                    TiltEntry::Finite { q: qs, xi: qs * xi / q }
                }
            }
            other => other,
        })
        .collect();
    Ok((base.with_entries(entries)?, 1.0 / qmax))
}

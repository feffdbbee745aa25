//! Bookkeeping for iterated transport under the heat semigroup.
//!
//! Distinct curvature levels `λ₁ > λ₂ > … > λ_m > 0` of the posterior tilt blow
//! up one after another at `T_j = 1/(2λ_j)`. Level `k` of the schedule is the
//! measure `ν_k` at time `T_k`, in which every direction of levels `1..=k` is
//! pinned and the rest carry curvature `λ_j/(1 − λ_j/λ_k)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{posterior_tilt, MeasurementModel, QuadraticTilt, TiltEntry};

/// Eigenvalues whose blow-up times differ by less than this are one level.
pub(crate) const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleLevel {
    pub lambda: f64,
    pub threshold: f64,
    /// Indices into the tilt's eigenbasis.
    pub directions: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct IteratedSchedule {
    base: QuadraticTilt,
    levels: Vec<ScheduleLevel>,
    k_star: usize,
    /// `ξ/q` per direction, zero on the kernel.
    pinned_values: Vec<f64>,
}

/// JSON summary for provenance logs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSummary {
    pub levels: Vec<ScheduleLevel>,
    pub k_star: usize,
    pub leg_durations: Vec<f64>,
}

/// Build the schedule. `chi_bound(t)` returns a bound on `χ_t(π)`; when it
/// errors, no level is certified and the full schedule is used. `k_override`
/// forces the number of legs.
pub fn iterated_schedule(
    model: &MeasurementModel,
    chi_bound: &dyn Fn(f64) -> Result<f64>,
    k_override: Option<usize>,
) -> Result<IteratedSchedule> {
    IteratedSchedule::from_tilt(posterior_tilt(model), chi_bound, k_override)
}

impl IteratedSchedule {
    pub fn from_tilt(
        base: QuadraticTilt,
        chi_bound: &dyn Fn(f64) -> Result<f64>,
        k_override: Option<usize>,
    ) -> Result<Self> {
        let entries = base.entries().to_vec();
        let mut order: Vec<usize> = Vec::new();
        let mut pinned_values = vec![0.0; entries.len()];
        for (i, e) in entries.iter().enumerate() {
            match *e {
                TiltEntry::Finite { q, xi } if q > 0.0 => {
                    order.push(i);
                    pinned_values[i] = xi / q;
                }
                TiltEntry::Finite { .. } => {}
                TiltEntry::Pinned { .. } => {
                    return Err(Error::InvalidParameter("schedule needs a finite initial tilt".into()))
                }
            }
        }
        if order.is_empty() {
            return Err(Error::ZeroOperator);
        }
        let q = |i: usize| entries[i].curvature().unwrap_or(0.0);
        order.sort_by(|&a, &b| q(b).total_cmp(&q(a)));

        let mut levels: Vec<ScheduleLevel> = Vec::new();
        for &i in &order {
            let thr = 0.5 / q(i);
            match levels.last_mut() {
                Some(lv) if thr - lv.threshold < TIE_TOLERANCE => lv.directions.push(i),
                _ => levels.push(ScheduleLevel { lambda: q(i), threshold: thr, directions: vec![i] }),
            }
        }
        // Representative curvature of a merged level: the mean of its members.
        for lv in levels.iter_mut() {
            lv.lambda = lv.directions.iter().map(|&i| q(i)).sum::<f64>() / lv.directions.len() as f64;
            lv.threshold = 0.5 / lv.lambda;
        }

        let m = levels.len();
        let has_kernel = entries.iter().any(|e| e.curvature() == Some(0.0));
        let lambda_min = if has_kernel { 0.0 } else { levels[m - 1].lambda };
        let k_star = match k_override {
            Some(k) if k == 0 || k > m => {
                return Err(Error::InvalidParameter(format!("k* must lie in 1..={m}, got {k}")))
            }
            Some(k) => k,
            None => {
                let mut found = m;
                for (k, lv) in levels.iter().enumerate() {
                    let rhs = if lambda_min > 0.0 && lv.lambda > lambda_min {
                        1.0 / (lv.lambda - lambda_min)
                    } else if lambda_min > 0.0 {
                        f64::INFINITY
                    } else {
                        1.0 / lv.lambda
                    };
                    match chi_bound(lv.lambda) {
                        Ok(chi) if chi <= rhs => {
                            found = k + 1;
                            break;
                        }
                        Ok(_) => {}
                        Err(_) => break,
                    }
                }
                found
            }
        };
        Ok(Self { base, levels, k_star, pinned_values })
    }

    pub fn levels(&self) -> &[ScheduleLevel] {
        &self.levels
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn k_star(&self) -> usize {
        self.k_star
    }

    pub fn base(&self) -> &QuadraticTilt {
        &self.base
    }

    /// `T_k`, with `T_0 = 0`.
    pub fn threshold(&self, k: usize) -> f64 {
        if k == 0 {
            0.0
        } else {
            self.levels[k - 1].threshold
        }
    }

    /// `η_k = T_{k+1} − T_k`.
    pub fn leg_duration(&self, k: usize) -> f64 {
        self.threshold(k + 1) - self.threshold(k)
    }

    /// Directions pinned in `ν_k`.
    pub fn pinned_directions(&self, k: usize) -> Vec<usize> {
        self.levels[..k].iter().flat_map(|lv| lv.directions.iter().copied()).collect()
    }

    /// Constrained value `ξ/q` of every eigendirection.
    pub fn pinned_values(&self) -> &[f64] {
        &self.pinned_values
    }

    fn level_of(&self, i: usize) -> Option<usize> {
        self.levels.iter().position(|lv| lv.directions.contains(&i))
    }

    /// The tilt of `ν_k`: levels `1..=k` pinned, curvature `λ/(1 − λ/λ_k)` and
    /// linear term `q·(ξ/q)₀` elsewhere.
    pub fn level_tilt(&self, k: usize) -> Result<QuadraticTilt> {
        let t = self.threshold(k);
        let entries = self
            .base
            .entries()
            .iter()
            .enumerate()
            .map(|(i, &e)| {
                let q0 = e.curvature().unwrap_or(0.0);
                match self.level_of(i) {
                    Some(l) if l < k => TiltEntry::Pinned { at: self.pinned_values[i] },
                    Some(_) => {
                        let q = q0 / (1.0 - 2.0 * t * q0);
                        TiltEntry::Finite { q, xi: q * self.pinned_values[i] }
                    }
                    None => TiltEntry::Finite { q: 0.0, xi: 0.0 },
                }
            })
            .collect();
        self.base.with_entries(entries)
    }

    /// Curvatures `λ̃_j(T_k)` of the law reached after running leg `k` from
    /// `ν_{k+1}`: `λ_{k+1}/(1 − λ_{k+1}/λ_k)` on levels `1..=k+1` and
    /// `λ_j/(1 − λ_j/λ_k)` beyond. At `k = 0` these are the original curvatures.
    pub fn lambda_tilde(&self, k: usize) -> Vec<f64> {
        let t = self.threshold(k);
        let eta = self.leg_duration(k);
        self.base
            .entries()
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let q0 = e.curvature().unwrap_or(0.0);
                match self.level_of(i) {
                    Some(l) if l <= k => 0.5 / eta,
                    Some(_) => q0 / (1.0 - 2.0 * t * q0),
                    None => 0.0,
                }
            })
            .collect()
    }

    pub fn summary(&self) -> ScheduleSummary {
        ScheduleSummary {
            levels: self.levels.clone(),
            k_star: self.k_star,
            leg_durations: (0..self.k_star).map(|k| self.leg_duration(k)).collect(),
        }
    }
}

//! Tilted transport for posterior sampling in linear-Gaussian inverse problems.
//!
//! A posterior `ν ∝ exp(−½xᵀQx + xᵀb) π(x)` is reduced to a boosted posterior
//! `ν_t = T_{Q_t,b_t} π_t` with larger curvature and a smoother prior; samples
//! of `ν_t` are carried back to `ν` by the reverse diffusion of `π`.

pub mod certify;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod eval;
pub mod priors;
pub mod quad;
pub mod rng;
pub mod spectral;
pub mod tilt;

pub use certify::CertificateReport;
pub use dynamics::SampleBatch;
pub use error::{Error, Result};
pub use priors::{GaussianMixturePrior, HypercubePrior, Phi4Prior, PriorModel, Semigroup};
pub use spectral::{build_measurement, MeasurementModel, QuadraticTilt, SpectralOperator, TiltEntry};
pub use tilt::{IteratedSchedule, TiltState};

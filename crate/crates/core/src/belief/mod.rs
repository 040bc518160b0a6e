//! Linear-Gaussian system model, offline belief propagation, and the
//! closed-loop simulator used to check it.

mod lqr;
mod propagate;
mod simulate;
mod system;

use thiserror::Error;

pub use lqr::dlqr;
pub use propagate::{propagate_belief, propagate_covariances, BOUNDS_TOL};
pub use simulate::{psd_sqrt, simulate_closed_loop, simulate_from_belief, Rollout};
pub use system::{
    Belief, BoxBounds, LinearGaussianSystem, MeasurementNoise, MeasurementZone, NominalPlan,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid noise covariance: {0}")]
    Noise(String),
    #[error("closed loop A - BK is not stable (spectral radius {radius:.4})")]
    UnstableGain { radius: f64 },
    #[error("innovation covariance is singular")]
    SingularInnovation,
    #[error("nominal state leaves the state bounds")]
    BoundaryViolation,
    #[error("control is outside the input bounds")]
    InputOutOfBounds,
    #[error("LQR design failed: {0}")]
    Lqr(&'static str),
}

use nalgebra::DMatrix;
use nalgebra::DVector;

use super::system::{Belief, LinearGaussianSystem, MeasurementNoise};
use super::DynamicsError;

/// Bounds tolerance for nominal states and controls.
pub const BOUNDS_TOL: f64 = 1e-9;

pub(crate) fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Kalman gain for prior covariance `prior` and measurement noise `r`.
/// `None` when the innovation covariance cannot be inverted.
pub(crate) fn kalman_gain(
    c: &DMatrix<f64>,
    prior: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
    let innovation = symmetrize(&(c * prior * c.transpose() + r));
    let chol = innovation.clone().cholesky()?;
    // L = Σ⁻ Cᵀ S⁻¹, solved as S Lᵀ = C Σ⁻.
    let gain_t = chol.solve(&(c * prior));
    Some((gain_t.transpose(), innovation))
}

/// Posterior covariance in Joseph form.
pub(crate) fn joseph(
    prior: &DMatrix<f64>,
    gain: &DMatrix<f64>,
    c: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> DMatrix<f64> {
    let n = prior.nrows();
    let i_lc = DMatrix::identity(n, n) - gain * c;
    symmetrize(&(&i_lc * prior * i_lc.transpose() + gain * r * gain.transpose()))
}

/// Covariance part of one step, with the measurement noise given explicitly.
pub fn propagate_covariances(
    sys: &LinearGaussianSystem,
    est_cov: &DMatrix<f64>,
    mean_cov: &DMatrix<f64>,
    noise: &MeasurementNoise,
) -> Result<(DMatrix<f64>, DMatrix<f64>), DynamicsError> {
    let prior = symmetrize(&(&sys.a * est_cov * sys.a.transpose() + &sys.process_noise));
    let closed = sys.closed_loop();
    let carried = &closed * mean_cov * closed.transpose();
    match noise {
        MeasurementNoise::Unavailable => Ok((prior, symmetrize(&carried))),
        MeasurementNoise::Cov(r) => {
            let (gain, innovation) =
                kalman_gain(&sys.c, &prior, r).ok_or(DynamicsError::SingularInnovation)?;
            let posterior = joseph(&prior, &gain, &sys.c, r);
            // L C Σ⁻ written as L S Lᵀ, which is symmetric by construction.
            let gained = &gain * innovation * gain.transpose();
            Ok((posterior, symmetrize(&(carried + gained))))
        }
    }
}

/// One step of the nominal mean and the two covariance recursions.
/// Measurement noise is looked up at the new nominal mean.
pub fn propagate_belief(
    sys: &LinearGaussianSystem,
    belief: &Belief,
    control: &DVector<f64>,
) -> Result<Belief, DynamicsError> {
    if !sys.input_bounds.contains(control, BOUNDS_TOL) {
        return Err(DynamicsError::InputOutOfBounds);
    }
    let mean = &sys.a * &belief.mean + &sys.b * control;
    if !sys.state_bounds.contains(&mean, BOUNDS_TOL) {
        return Err(DynamicsError::BoundaryViolation);
    }
    let (est_cov, mean_cov) =
        propagate_covariances(sys, &belief.est_cov, &belief.mean_cov, sys.noise_at(&mean))?;
    Ok(Belief {
        mean,
        est_cov,
        mean_cov,
    })
}

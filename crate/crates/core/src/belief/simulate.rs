use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::propagate::{joseph, symmetrize, BOUNDS_TOL};
use super::system::{Belief, LinearGaussianSystem, MeasurementNoise, NominalPlan};

/// Symmetric square root of a PSD matrix (negative eigenvalues floored at 0).
pub fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = symmetrize(m).symmetric_eigen();
    let root = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&root) * eig.eigenvectors.transpose()
}

pub(crate) fn gaussian<R: Rng + ?Sized>(
    rng: &mut R,
    mean: &DVector<f64>,
    sqrt_cov: &DMatrix<f64>,
) -> DVector<f64> {
    let z = DVector::from_iterator(mean.len(), (0..mean.len()).map(|_| StandardNormal.sample(rng)));
    mean + sqrt_cov * z
}

/// Pseudo-inverse with a relative singular-value cutoff.
fn pinv(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eps = 1e-12 * m.amax().max(1e-300);
    m.clone()
        .pseudo_inverse(eps)
        .unwrap_or_else(|_| DMatrix::zeros(m.ncols(), m.nrows()))
}

/// One closed-loop rollout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rollout {
    pub true_states: Vec<DVector<f64>>,
    pub estimates: Vec<DVector<f64>>,
    /// `None` where no measurement was available.
    pub measurements: Vec<Option<DVector<f64>>>,
    pub applied_inputs: Vec<DVector<f64>>,
    /// Steps (indices into `true_states`) where the true state left the state box.
    pub state_violations: Vec<usize>,
    /// Steps where the feedback input had to be clamped.
    pub clamped_inputs: Vec<usize>,
}

/// Executes `plan` with the tracking controller `u_k = ǔ_k − K(x̂_k − x̌_k)`
/// against sampled process and measurement noise, estimating the state with
/// a Kalman filter seeded at `(estimate, initial_cov)`.
///
/// Measurement noise is drawn with the covariance of the zone holding the
/// true state; the filter uses the covariance of the measurement it actually
/// received.
pub fn simulate_closed_loop<R: Rng + ?Sized>(
    sys: &LinearGaussianSystem,
    plan: &NominalPlan,
    true_start: DVector<f64>,
    estimate: DVector<f64>,
    initial_cov: DMatrix<f64>,
    rng: &mut R,
) -> Rollout {
    let q_sqrt = psd_sqrt(&sys.process_noise);
    let n = sys.state_dim();
    let mut x = true_start;
    let mut xhat = estimate;
    let mut cov = initial_cov;
    let mut out = Rollout {
        true_states: vec![x.clone()],
        estimates: vec![xhat.clone()],
        measurements: vec![None],
        applied_inputs: Vec::with_capacity(plan.len()),
        state_violations: Vec::new(),
        clamped_inputs: Vec::new(),
    };
    if !sys.state_bounds.contains(&x, BOUNDS_TOL) {
        out.state_violations.push(0);
    }
    for (k, nominal_u) in plan.controls.iter().enumerate() {
        let raw = nominal_u - &sys.gain * (&xhat - &plan.states[k]);
        let u = sys.input_bounds.clamp(&raw);
        if u != raw {
            out.clamped_inputs.push(k);
        }
        let w = gaussian(rng, &DVector::zeros(n), &q_sqrt);
        x = &sys.a * &x + &sys.b * &u + w;

        let pred = &sys.a * &xhat + &sys.b * &u;
        let prior = symmetrize(&(&sys.a * &cov * sys.a.transpose() + &sys.process_noise));
        match sys.noise_at(&x) {
            MeasurementNoise::Unavailable => {
                xhat = pred;
                cov = prior;
                out.measurements.push(None);
            }
            MeasurementNoise::Cov(r) => {
                let v = gaussian(rng, &DVector::zeros(sys.meas_dim()), &psd_sqrt(r));
                let z = &sys.c * &x + &sys.d * &u + v;
                let innovation = &sys.c * &prior * sys.c.transpose() + r;
                let gain = &prior * sys.c.transpose() * pinv(&innovation);
                xhat = &pred + &gain * (&z - &sys.c * &pred - &sys.d * &u);
                cov = joseph(&prior, &gain, &sys.c, r);
                out.measurements.push(Some(z));
            }
        }
        if !sys.state_bounds.contains(&x, BOUNDS_TOL) {
            out.state_violations.push(k + 1);
        }
        out.true_states.push(x.clone());
        out.estimates.push(xhat.clone());
        out.applied_inputs.push(u);
    }
    out
}

/// Rollout from a true state sampled from `start`, with the estimate at the
/// belief mean.
pub fn simulate_from_belief<R: Rng + ?Sized>(
    sys: &LinearGaussianSystem,
    plan: &NominalPlan,
    start: &Belief,
    rng: &mut R,
) -> Rollout {
    let cov = start.total_cov();
    let x0 = gaussian(rng, &start.mean, &psd_sqrt(&cov));
    simulate_closed_loop(sys, plan, x0, start.mean.clone(), start.est_cov.clone(), rng)
}

use nalgebra::DMatrix;

use super::DynamicsError;

/// Infinite-horizon discrete LQR gain by Riccati iteration.
///
/// Minimizes `Σ xᵀQx + uᵀRu` for `x⁺ = Ax + Bu`; returns `K` with `u = -Kx`.
pub fn dlqr(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<DMatrix<f64>, DynamicsError> {
    let mut p = q.clone();
    for _ in 0..100_000 {
        let btp = b.transpose() * &p;
        let s = r + &btp * b;
        let k = s
            .clone()
            .cholesky()
            .ok_or(DynamicsError::Lqr("R + BᵀPB is not positive definite"))?
            .solve(&(&btp * a));
        let next = q + a.transpose() * &p * a - a.transpose() * &p * b * &k;
        let next = (&next + next.transpose()) * 0.5;
        let delta = (&next - &p).amax();
        p = next;
        if delta <= 1e-12 * p.amax().max(1.0) {
            let btp = b.transpose() * &p;
            let s = r + &btp * b;
            return s
                .cholesky()
                .map(|c| c.solve(&(&btp * a)))
                .ok_or(DynamicsError::Lqr("R + BᵀPB is not positive definite"));
        }
        if !p.iter().all(|v| v.is_finite()) {
            break;
        }
    }
    Err(DynamicsError::Lqr("Riccati iteration did not converge"))
}

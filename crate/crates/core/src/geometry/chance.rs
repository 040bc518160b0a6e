//! Closed-form chance-constraint bounds for Gaussians against polytopes.
//!
//! Membership uses Boole's inequality over the faces, non-membership uses
//! the single best separating face. Both are lower bounds on the true
//! probability.

use nalgebra::{DMatrix, DVector};
use statrs::function::erf::erfc;

use super::polytope::{Halfspace, Polytope};
use super::GeometryError;

/// Tolerance for the symmetry and eigenvalue checks on covariances.
pub const PSD_TOL: f64 = 1e-9;

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

pub fn check_psd(cov: &DMatrix<f64>) -> Result<(), GeometryError> {
    if !cov.is_square() {
        return Err(GeometryError::NotPsd("covariance is not square".into()));
    }
    let scale = cov.amax().max(1.0);
    if (cov - cov.transpose()).amax() > PSD_TOL * scale {
        return Err(GeometryError::NotPsd("covariance is not symmetric".into()));
    }
    if cov.nrows() > 0 {
        let min = cov.clone().symmetric_eigenvalues().min();
        if min < -PSD_TOL * scale {
            return Err(GeometryError::NotPsd(format!(
                "covariance has negative eigenvalue {min:e}"
            )));
        }
    }
    Ok(())
}

/// `P(aᵀx <= b)` for `x ~ N(mean, cov)`, skipping the PSD check.
fn halfspace_prob_unchecked(mean: &DVector<f64>, cov: &DMatrix<f64>, h: &Halfspace) -> f64 {
    let mu = h.normal.dot(mean);
    let var = (cov * &h.normal).dot(&h.normal);
    if var <= 0.0 {
        return if mu <= h.offset { 1.0 } else { 0.0 };
    }
    normal_cdf((h.offset - mu) / var.sqrt())
}

/// Exact `P(aᵀx <= b)` for `x ~ N(mean, cov)`. A degenerate direction
/// (`aᵀ cov a = 0`) yields 1 or 0 depending on the mean.
pub fn halfspace_prob(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    h: &Halfspace,
) -> Result<f64, GeometryError> {
    check_psd(cov)?;
    Ok(halfspace_prob_unchecked(mean, cov, h))
}

fn check_dims(mean: &DVector<f64>, cov: &DMatrix<f64>, region: &Polytope) -> Result<(), GeometryError> {
    if mean.len() != region.dim() || cov.nrows() != region.dim() {
        return Err(GeometryError::Dimension {
            region: region.name().to_string(),
            expected: region.dim(),
        });
    }
    Ok(())
}

/// `max(0, 1 - Σ_j P(a_jᵀx > b_j))`, a lower bound on `P(x ∈ region)`.
pub fn polytope_prob_lower_bound(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    region: &Polytope,
) -> Result<f64, GeometryError> {
    check_dims(mean, cov, region)?;
    check_psd(cov)?;
    let tails: f64 = region
        .halfspaces()
        .iter()
        .map(|h| 1.0 - halfspace_prob_unchecked(mean, cov, h))
        .sum();
    Ok((1.0 - tails).max(0.0))
}

/// `max_j P(a_jᵀx > b_j)`, a lower bound on `P(x ∉ region)`.
pub fn polytope_avoid_lower_bound(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    region: &Polytope,
) -> Result<f64, GeometryError> {
    check_dims(mean, cov, region)?;
    check_psd(cov)?;
    Ok(region
        .halfspaces()
        .iter()
        .map(|h| 1.0 - halfspace_prob_unchecked(mean, cov, h))
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn symmetric_half() {
        let h = Halfspace::new(&[1.0], 0.0).unwrap();
        let p = halfspace_prob(&v(&[0.0]), &DMatrix::from_element(1, 1, 1.0), &h).unwrap();
        assert!((p - 0.5).abs() < 1e-15);
    }

    #[test]
    fn point_mass() {
        let h = Halfspace::new(&[1.0], 0.0).unwrap();
        let p = halfspace_prob(&v(&[1.0]), &DMatrix::zeros(1, 1), &h).unwrap();
        assert_eq!(p, 0.0);
        let q = halfspace_prob(&v(&[0.0]), &DMatrix::zeros(1, 1), &h).unwrap();
        assert_eq!(q, 1.0);
    }

    #[test]
    fn rejects_indefinite_or_asymmetric() {
        let h = Halfspace::new(&[1.0, 0.0], 0.0).unwrap();
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            halfspace_prob(&v(&[0.0, 0.0]), &bad, &h),
            Err(GeometryError::NotPsd(_))
        ));
        let skew = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        assert!(halfspace_prob(&v(&[0.0, 0.0]), &skew, &h).is_err());
    }

    #[test]
    fn far_outside_clamps_to_zero() {
        let sq = Polytope::from_box("u", &[0.0, 0.0], &[1.0, 1.0]).unwrap();
        let b = polytope_prob_lower_bound(&v(&[50.0, 50.0]), &(DMatrix::identity(2, 2) * 0.01), &sq)
            .unwrap();
        assert_eq!(b, 0.0);
    }

    #[test]
    fn deep_inside_avoid_is_zero() {
        let sq = Polytope::from_box("u", &[0.0, 0.0], &[1.0, 1.0]).unwrap();
        let b = polytope_avoid_lower_bound(&v(&[0.5, 0.5]), &(DMatrix::identity(2, 2) * 1e-6), &sq)
            .unwrap();
        assert!(b < 1e-100);
    }

    #[test]
    fn dimension_mismatch() {
        let sq = Polytope::from_box("u", &[0.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!(polytope_prob_lower_bound(&v(&[0.5]), &DMatrix::identity(1, 1), &sq).is_err());
    }
}

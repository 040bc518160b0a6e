use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::lp::{maximize, LpFailure};
use super::GeometryError;

/// Halfspace `normal · x <= offset` with a unit-norm normal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Halfspace {
    pub normal: DVector<f64>,
    pub offset: f64,
}

impl Halfspace {
    /// Normalizes `(a, b)` so that `|a| = 1`.
    pub fn new(a: &[f64], b: f64) -> Result<Self, GeometryError> {
        let normal = DVector::from_column_slice(a);
        let norm = normal.norm();
        if !(norm > 1e-12) || !norm.is_finite() || !b.is_finite() {
            return Err(GeometryError::DegenerateHalfspace);
        }
        Ok(Self {
            normal: normal / norm,
            offset: b / norm,
        })
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.value(x) <= self.offset
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.normal.iter().zip(x).map(|(a, v)| a * v).sum()
    }
}

/// Bounded convex polytope with non-empty interior, stored as halfspaces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polytope {
    name: String,
    dim: usize,
    halfspaces: Vec<Halfspace>,
}

impl Polytope {
    pub fn from_halfspaces(
        name: &str,
        dim: usize,
        halfspaces: Vec<Halfspace>,
    ) -> Result<Self, GeometryError> {
        if halfspaces.iter().any(|h| h.normal.len() != dim) {
            return Err(GeometryError::Dimension {
                region: name.to_string(),
                expected: dim,
            });
        }
        let p = Self {
            name: name.to_string(),
            dim,
            halfspaces,
        };
        p.check_bounded()?;
        if p.inradius() <= 1e-9 {
            return Err(GeometryError::EmptyInterior(name.to_string()));
        }
        Ok(p)
    }

    /// Axis-aligned box `lo <= x <= hi`.
    pub fn from_box(name: &str, lo: &[f64], hi: &[f64]) -> Result<Self, GeometryError> {
        if lo.len() != hi.len() {
            return Err(GeometryError::Dimension {
                region: name.to_string(),
                expected: lo.len(),
            });
        }
        let d = lo.len();
        let mut hs = Vec::with_capacity(2 * d);
        for k in 0..d {
            let mut e = vec![0.0; d];
            e[k] = 1.0;
            hs.push(Halfspace::new(&e, hi[k])?);
            e[k] = -1.0;
            hs.push(Halfspace::new(&e, -lo[k])?);
        }
        Self::from_halfspaces(name, d, hs)
    }

    /// Convex hull of planar points.
    pub fn from_vertices_2d(name: &str, points: &[[f64; 2]]) -> Result<Self, GeometryError> {
        let hull = convex_hull_2d(points);
        if hull.len() < 3 {
            return Err(GeometryError::EmptyInterior(name.to_string()));
        }
        let mut hs = Vec::with_capacity(hull.len());
        for i in 0..hull.len() {
            let p = hull[i];
            let q = hull[(i + 1) % hull.len()];
            // Counter-clockwise hull: outward normal is the edge rotated clockwise.
            let n = [q[1] - p[1], p[0] - q[0]];
            hs.push(Halfspace::new(&n, n[0] * p[0] + n[1] * p[1])?);
        }
        Self::from_halfspaces(name, 2, hs)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn halfspaces(&self) -> &[Halfspace] {
        &self.halfspaces
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.halfspaces.iter().all(|h| h.contains(x))
    }

    fn rows(&self) -> (Vec<Vec<f64>>, Vec<f64>) {
        let rows = self
            .halfspaces
            .iter()
            .map(|h| h.normal.iter().copied().collect())
            .collect();
        let rhs = self.halfspaces.iter().map(|h| h.offset).collect();
        (rows, rhs)
    }

    fn check_bounded(&self) -> Result<(), GeometryError> {
        let (rows, rhs) = self.rows();
        for k in 0..self.dim {
            for sign in [1.0, -1.0] {
                let mut c = vec![0.0; self.dim];
                c[k] = sign;
                match maximize(&c, &rows, &rhs) {
                    Ok(_) => {}
                    Err(LpFailure::Unbounded) => {
                        return Err(GeometryError::Unbounded(self.name.clone()))
                    }
                    Err(LpFailure::Infeasible) => {
                        return Err(GeometryError::EmptyInterior(self.name.clone()))
                    }
                    Err(LpFailure::Other) => {
                        return Err(GeometryError::Solver(self.name.clone()))
                    }
                }
            }
        }
        Ok(())
    }

    /// Center and radius of the largest inscribed ball.
    pub fn chebyshev_ball(&self) -> (Vec<f64>, f64) {
        let (mut rows, rhs) = self.rows();
        for r in rows.iter_mut() {
            r.push(1.0);
        }
        let mut c = vec![0.0; self.dim];
        c.push(1.0);
        match maximize(&c, &rows, &rhs) {
            Ok((r, mut x)) => {
                x.pop();
                (x, r)
            }
            Err(_) => (vec![0.0; self.dim], 0.0),
        }
    }

    pub fn inradius(&self) -> f64 {
        self.chebyshev_ball().1
    }

    /// Axis-aligned bounding box `(lo, hi)`.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let (rows, rhs) = self.rows();
        let mut lo = vec![0.0; self.dim];
        let mut hi = vec![0.0; self.dim];
        for k in 0..self.dim {
            let mut c = vec![0.0; self.dim];
            c[k] = 1.0;
            hi[k] = maximize(&c, &rows, &rhs).map(|r| r.0).unwrap_or(f64::INFINITY);
            c[k] = -1.0;
            lo[k] = maximize(&c, &rows, &rhs).map(|r| -r.0).unwrap_or(f64::NEG_INFINITY);
        }
        (lo, hi)
    }

    /// Largest `t` such that both polytopes, each shrunk by `t` along every
    /// face, still share a point. Positive means overlapping interiors, zero
    /// means touching, negative means separated.
    pub fn contact_depth(&self, other: &Polytope) -> f64 {
        let (mut rows, mut rhs) = self.rows();
        let (r2, b2) = other.rows();
        rows.extend(r2);
        rhs.extend(b2);
        for r in rows.iter_mut() {
            r.push(1.0);
        }
        let mut c = vec![0.0; self.dim];
        c.push(1.0);
        match maximize(&c, &rows, &rhs) {
            Ok((t, _)) => t,
            Err(_) => f64::NEG_INFINITY,
        }
    }

    /// Whether `self ⊆ other` (up to `tol`).
    pub fn is_inside(&self, other: &Polytope, tol: f64) -> bool {
        let (rows, rhs) = self.rows();
        other.halfspaces.iter().all(|h| {
            let c: Vec<f64> = h.normal.iter().copied().collect();
            match maximize(&c, &rows, &rhs) {
                Ok((v, _)) => v <= h.offset + tol,
                Err(_) => false,
            }
        })
    }
}

/// Andrew's monotone chain; counter-clockwise, no collinear points.
fn convex_hull_2d(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut pts: Vec<[f64; 2]> = points.to_vec();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| {
        (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
    };
    let mut lower: Vec<[f64; 2]> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<[f64; 2]> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_faces_are_normalized() {
        let p = Polytope::from_box("u", &[0.0, 0.0], &[1.0, 2.0]).unwrap();
        assert_eq!(p.halfspaces().len(), 4);
        for h in p.halfspaces() {
            assert!((h.normal.norm() - 1.0).abs() < 1e-15);
        }
        assert!(p.contains(&[0.5, 1.5]));
        assert!(!p.contains(&[1.5, 1.5]));
        assert!((p.inradius() - 0.5).abs() < 1e-9);
    }

    #[test]
    fn halfspace_normalization_scales_offset() {
        let h = Halfspace::new(&[3.0, 4.0], 10.0).unwrap();
        assert!((h.offset - 2.0).abs() < 1e-15);
        assert!(Halfspace::new(&[0.0, 0.0], 1.0).is_err());
    }

    #[test]
    fn hull_from_vertices() {
        let p = Polytope::from_vertices_2d(
            "tri",
            &[[0.0, 0.0], [2.0, 0.0], [0.0, 2.0], [0.5, 0.5]],
        )
        .unwrap();
        assert_eq!(p.halfspaces().len(), 3);
        assert!(p.contains(&[0.4, 0.4]));
        assert!(!p.contains(&[1.5, 1.5]));
        let (lo, hi) = p.bounding_box();
        assert!((lo[0]).abs() < 1e-9 && (hi[1] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn unbounded_rejected() {
        let hs = vec![
            Halfspace::new(&[1.0, 0.0], 1.0).unwrap(),
            Halfspace::new(&[-1.0, 0.0], 1.0).unwrap(),
            Halfspace::new(&[0.0, 1.0], 1.0).unwrap(),
        ];
        assert_eq!(
            Polytope::from_halfspaces("slab", 2, hs),
            Err(GeometryError::Unbounded("slab".into()))
        );
    }

    #[test]
    fn degenerate_rejected() {
        assert!(Polytope::from_box("flat", &[0.0, 0.0], &[1.0, 0.0]).is_err());
        assert!(Polytope::from_vertices_2d("line", &[[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]]).is_err());
    }

    #[test]
    fn containment() {
        let small = Polytope::from_box("s", &[0.2, 0.2], &[0.8, 0.8]).unwrap();
        let big = Polytope::from_box("b", &[0.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!(small.is_inside(&big, 1e-9));
        assert!(!big.is_inside(&small, 1e-9));
    }
}

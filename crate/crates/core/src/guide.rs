//! Simplified-model guides: a kinematic fixed-speed model over a projected
//! subspace, optionally carrying the covariance of the full system, and the
//! sampling bias that steers the full belief search toward its paths.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::{propagate_covariances, Belief, BoxBounds, LinearGaussianSystem};
use crate::geometry::Labeler;
use crate::ltlf::{StateId, Symbol};
use crate::task::{PrunedDfa, TaskPlan};
use crate::tree::{BeliefTree, Budget, GrowOutcome, SearchModel, TreeError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GuideError {
    #[error("direction must be nonzero")]
    ZeroDirection,
    #[error("maximum speed must be positive")]
    Speed,
    #[error("projection index {0} is outside the state")]
    Projection(usize),
    #[error("projection must include every workspace coordinate")]
    Workspace,
    #[error("lift defaults must have one entry per state coordinate")]
    Lift,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimbaKind {
    /// Kinematic model that keeps the full system's covariance.
    Sba,
    /// Kinematic model without uncertainty; labels by mean membership.
    #[serde(alias = "geo")]
    Geometric,
}

/// Kinematic model `x̃' = x̃ + v` with `|v| = v_max·dt` on a coordinate
/// subset of the full state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplifiedModel {
    pub projection: Vec<usize>,
    pub kind: SimbaKind,
    pub v_max: f64,
    /// Full-state values used for coordinates outside the projection.
    pub lift: Vec<f64>,
}

impl SimplifiedModel {
    pub fn validate(&self, sys: &LinearGaussianSystem) -> Result<(), GuideError> {
        let n = sys.state_dim();
        if !(self.v_max > 0.0 && self.v_max.is_finite()) {
            return Err(GuideError::Speed);
        }
        if let Some(&i) = self.projection.iter().find(|&&i| i >= n) {
            return Err(GuideError::Projection(i));
        }
        if !sys.workspace.iter().all(|i| self.projection.contains(i)) {
            return Err(GuideError::Workspace);
        }
        if self.lift.len() != n {
            return Err(GuideError::Lift);
        }
        Ok(())
    }

    pub fn project(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.projection.len(), self.projection.iter().map(|&i| x[i]))
    }

    /// Full state with the projected coordinates set from `xt`.
    pub fn lift_point(&self, xt: &DVector<f64>) -> DVector<f64> {
        let mut x = DVector::from_column_slice(&self.lift);
        for (k, &i) in self.projection.iter().enumerate() {
            x[i] = xt[k];
        }
        x
    }
}

/// `x̃ + v_max·dt·dir` with `dir` normalized.
pub fn sba_step(
    x: &DVector<f64>,
    dir: &DVector<f64>,
    v_max: f64,
    dt: f64,
) -> Result<DVector<f64>, GuideError> {
    let norm = dir.norm();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(GuideError::ZeroDirection);
    }
    Ok(x + dir * (v_max * dt / norm))
}

/// The simplified model as seen by the hybrid tree. Vertex means live in the
/// projected space; for the SBA kind the covariances are full-state.
pub struct GuideModel<'a> {
    sys: &'a LinearGaussianSystem,
    labeler: &'a Labeler,
    model: &'a SimplifiedModel,
    bounds: BoxBounds,
}

impl<'a> GuideModel<'a> {
    pub fn new(
        sys: &'a LinearGaussianSystem,
        labeler: &'a Labeler,
        model: &'a SimplifiedModel,
    ) -> Self {
        Self {
            sys,
            labeler,
            model,
            bounds: sys.state_bounds.select(&model.projection),
        }
    }

    pub fn kind(&self) -> SimbaKind {
        self.model.kind
    }

    /// Root of a guide tree for a full-state initial belief.
    pub fn root(&self, full: &Belief) -> Belief {
        let mean = self.model.project(&full.mean);
        match self.model.kind {
            SimbaKind::Sba => Belief {
                mean,
                est_cov: full.est_cov.clone(),
                mean_cov: full.mean_cov.clone(),
            },
            SimbaKind::Geometric => Belief {
                mean,
                est_cov: DMatrix::zeros(0, 0),
                mean_cov: DMatrix::zeros(0, 0),
            },
        }
    }

    /// Projected points from the root to vertex `id`, with their automaton
    /// states.
    pub fn path(&self, tree: &BeliefTree, id: usize) -> GuidePath {
        let root = tree.root();
        let mut x = root.belief.mean.clone();
        let mut points = vec![GuidePoint {
            x: x.iter().copied().collect(),
            q: root.q,
        }];
        for step in tree.steps_to(id) {
            x = sba_step(&x, &step.control, self.model.v_max, self.sys.dt)
                .expect("stored directions are nonzero");
            points.push(GuidePoint {
                x: x.iter().copied().collect(),
                q: step.q,
            });
        }
        GuidePath { points }
    }
}

impl SearchModel for GuideModel<'_> {
    fn sample_bounds(&self) -> &BoxBounds {
        &self.bounds
    }

    fn control_toward(&self, from: &Belief, target: &DVector<f64>) -> Option<DVector<f64>> {
        let d = target - &from.mean;
        let norm = d.norm();
        (norm > 1e-12).then(|| d / norm)
    }

    fn apply(&self, from: &Belief, u: &DVector<f64>) -> Option<Belief> {
        let mean = sba_step(&from.mean, u, self.model.v_max, self.sys.dt).ok()?;
        if !self.bounds.contains(&mean, crate::belief::BOUNDS_TOL) {
            return None;
        }
        match self.model.kind {
            SimbaKind::Geometric => Some(Belief {
                mean,
                est_cov: from.est_cov.clone(),
                mean_cov: from.mean_cov.clone(),
            }),
            SimbaKind::Sba => {
                let lifted = self.model.lift_point(&mean);
                let noise = self.sys.noise_at(&lifted);
                let (est_cov, mean_cov) =
                    propagate_covariances(self.sys, &from.est_cov, &from.mean_cov, noise).ok()?;
                Some(Belief {
                    mean,
                    est_cov,
                    mean_cov,
                })
            }
        }
    }

    fn label(&self, belief: &Belief) -> Option<Symbol> {
        let lifted = self.model.lift_point(&belief.mean);
        let cov = match self.model.kind {
            SimbaKind::Sba => belief.total_cov(),
            SimbaKind::Geometric => DMatrix::zeros(lifted.len(), lifted.len()),
        };
        self.labeler.label_gaussian(&lifted, &cov).ok()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuidePoint {
    pub x: Vec<f64>,
    pub q: StateId,
}

/// Hybrid path `(x̃, q)` produced by the guide layer.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GuidePath {
    pub points: Vec<GuidePoint>,
}

impl GuidePath {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// CSV with columns `index,q,x0,x1,…`.
    pub fn to_csv(&self) -> String {
        let dim = self.points.first().map_or(0, |p| p.x.len());
        let mut out = String::from("index,q");
        for i in 0..dim {
            out.push_str(&format!(",x{i}"));
        }
        out.push('\n');
        for (k, p) in self.points.iter().enumerate() {
            out.push_str(&format!("{k},{}", p.q));
            for v in &p.x {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Runs the guide tree for at most `budget` and returns the path to its
/// first accepting vertex.
#[allow(clippy::too_many_arguments)]
pub fn plan_guide<R: Rng + ?Sized>(
    model: &GuideModel,
    tree: &mut BeliefTree,
    dfa: &PrunedDfa,
    plan: &TaskPlan,
    n_prop: usize,
    budget: Budget,
    rng: &mut R,
) -> Option<GuidePath> {
    let bounds = model.sample_bounds().clone();
    let mut uniform = |_: StateId, r: &mut R| bounds.sample(r);
    match tree.grow(model, dfa, plan, n_prop, budget, &mut uniform, rng) {
        GrowOutcome::Accepted(id) => Some(model.path(tree, id)),
        _ => None,
    }
}

/// Fresh guide tree rooted at the projection of `full_root`.
pub fn guide_tree(
    model: &GuideModel,
    dfa: &PrunedDfa,
    full_root: &Belief,
) -> Result<BeliefTree, TreeError> {
    BeliefTree::new(model, dfa, model.root(full_root))
}

/// The sub-task segment for `q`: from the first point in `q` through the
/// following run of `q` points, plus the point that leaves `q`.
pub fn segment_for<'g>(q: StateId, guide: &'g GuidePath) -> &'g [GuidePoint] {
    let Some(start) = guide.points.iter().position(|p| p.q == q) else {
        return &[];
    };
    let mut end = start;
    while end < guide.points.len() && guide.points[end].q == q {
        end += 1;
    }
    let end = (end + 1).min(guide.points.len());
    &guide.points[start..end]
}

/// Maps projected samples to full-state targets.
#[derive(Debug, Clone)]
pub struct Lift {
    pub projection: Vec<usize>,
    pub defaults: Vec<f64>,
    pub bounds: BoxBounds,
}

impl Lift {
    pub fn new(model: &SimplifiedModel, bounds: &BoxBounds) -> Self {
        Self {
            projection: model.projection.clone(),
            defaults: model.lift.clone(),
            bounds: bounds.clone(),
        }
    }

    fn free_coordinate<R: Rng + ?Sized>(&self, i: usize, rng: &mut R) -> f64 {
        let (lo, hi) = (self.bounds.lo[i], self.bounds.hi[i]);
        if lo.is_finite() && hi.is_finite() && hi > lo {
            rng.random_range(lo..hi)
        } else {
            self.defaults[i]
        }
    }

    /// Uniform over the state box; unbounded coordinates take the default.
    pub fn uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let n = self.defaults.len();
        DVector::from_iterator(n, (0..n).map(|i| self.free_coordinate(i, rng)))
    }
}

/// Uniform point in the `d`-ball around the origin of dimension `dim`.
fn ball<R: Rng + ?Sized>(dim: usize, d: f64, rng: &mut R) -> DVector<f64> {
    loop {
        let g = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = g.norm();
        if norm > 0.0 {
            let r = d * rng.random::<f64>().powf(1.0 / dim as f64);
            return g * (r / norm);
        }
    }
}

/// With probability `pr`, a point within `d` of a random waypoint of
/// `segment` (other coordinates drawn as in [`Lift::uniform`]); otherwise,
/// or when the segment is empty, uniform over the state box.
pub fn biased_sample<R: Rng + ?Sized>(
    segment: &[GuidePoint],
    d: f64,
    pr: f64,
    lift: &Lift,
    rng: &mut R,
) -> DVector<f64> {
    let mut x = lift.uniform(rng);
    if segment.is_empty() || !rng.random_bool(pr.clamp(0.0, 1.0)) {
        return x;
    }
    let waypoint = &segment[rng.random_range(0..segment.len())];
    let offset = ball(lift.projection.len(), d, rng);
    for (k, &i) in lift.projection.iter().enumerate() {
        x[i] = waypoint.x[k] + offset[k];
    }
    x
}

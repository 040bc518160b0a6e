//! Convex regions, their contact graph, and conservative labeling of
//! Gaussian beliefs against them.

mod adjacency;
mod chance;
mod label;
mod lp;
mod polytope;

use thiserror::Error;

pub use adjacency::{build_adjacency_graph, AdjacencyGraph, Contact, ADJACENCY_TOL, OVERLAP_MARGIN};
pub use chance::{
    check_psd, halfspace_prob, normal_cdf, polytope_avoid_lower_bound, polytope_prob_lower_bound,
    PSD_TOL,
};
pub use label::Labeler;
pub use polytope::{Halfspace, Polytope};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("halfspace normal is zero or not finite")]
    DegenerateHalfspace,
    #[error("region `{0}` is unbounded")]
    Unbounded(String),
    #[error("region `{0}` has an empty interior")]
    EmptyInterior(String),
    #[error("linear program failed for region `{0}`")]
    Solver(String),
    #[error("region `{region}` does not have dimension {expected}")]
    Dimension { region: String, expected: usize },
    #[error("invalid covariance: {0}")]
    NotPsd(String),
    #[error("proposition `{prop}` refers to undeclared region `{region}`")]
    UnresolvedRegion { prop: String, region: String },
    #[error("proposition `{0}` is not declared")]
    UnknownProp(String),
}

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::polytope::Polytope;
use super::GeometryError;

/// Closures closer than this count as touching.
pub const ADJACENCY_TOL: f64 = 1e-6;
/// Interiors must overlap by more than this to count as intersecting.
pub const OVERLAP_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Contact {
    Adjacent,
    Intersecting,
}

/// Region contact graph. Node `regions.len()` is the remainder of the
/// workspace outside every region.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdjacencyGraph {
    names: Vec<String>,
    edges: BTreeMap<(usize, usize), Contact>,
}

impl AdjacencyGraph {
    pub fn region_names(&self) -> &[String] {
        &self.names
    }

    pub fn remainder(&self) -> usize {
        self.names.len()
    }

    pub fn node_count(&self) -> usize {
        self.names.len() + 1
    }

    fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn contact_by_index(&self, i: usize, j: usize) -> Option<Contact> {
        let key = if i <= j { (i, j) } else { (j, i) };
        self.edges.get(&key).copied()
    }

    /// Contact between two named regions.
    pub fn contact(&self, a: &str, b: &str) -> Option<Contact> {
        self.contact_by_index(self.index(a)?, self.index(b)?)
    }

    pub fn touches_remainder(&self, a: &str) -> bool {
        self.index(a)
            .is_some_and(|i| self.contact_by_index(i, self.remainder()).is_some())
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Edges as name pairs, each pair sorted, remainder spelled `None`.
    pub fn named_edges(&self) -> Vec<(Option<String>, Option<String>, Contact)> {
        let name = |i: usize| self.names.get(i).cloned();
        let mut out: Vec<_> = self
            .edges
            .iter()
            .map(|(&(i, j), &c)| {
                let (a, b) = (name(i), name(j));
                if a <= b {
                    (a, b, c)
                } else {
                    (b, a, c)
                }
            })
            .collect();
        out.sort_by(|x, y| (&x.0, &x.1).cmp(&(&y.0, &y.1)));
        out
    }
}

/// Pairwise contact classification by one LP per pair. Every region is
/// linked to the remainder node.
pub fn build_adjacency_graph(regions: &[Polytope]) -> Result<AdjacencyGraph, GeometryError> {
    if let Some(first) = regions.first() {
        if let Some(bad) = regions.iter().find(|r| r.dim() != first.dim()) {
            return Err(GeometryError::Dimension {
                region: bad.name().to_string(),
                expected: first.dim(),
            });
        }
    }
    let mut edges = BTreeMap::new();
    for i in 0..regions.len() {
        for j in i + 1..regions.len() {
            let depth = regions[i].contact_depth(&regions[j]);
            if depth > OVERLAP_MARGIN {
                edges.insert((i, j), Contact::Intersecting);
            } else if depth >= -ADJACENCY_TOL {
                edges.insert((i, j), Contact::Adjacent);
            }
        }
        edges.insert((i, regions.len()), Contact::Adjacent);
    }
    Ok(AdjacencyGraph {
        names: regions.iter().map(|r| r.name().to_string()).collect(),
        edges,
    })
}

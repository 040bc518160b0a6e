use nalgebra::{DMatrix, DVector};

use super::chance::{check_psd, polytope_avoid_lower_bound, polytope_prob_lower_bound};
use super::polytope::Polytope;
use super::GeometryError;
use crate::belief::Belief;
use crate::ltlf::{Alphabet, Polarity, PropTable, Symbol};

#[derive(Debug, Clone)]
struct Entry {
    bit: usize,
    region: Polytope,
    level: f64,
    polarity: Polarity,
}

/// Conservative labeling of Gaussian beliefs. A proposition is reported
/// only when a lower bound on its event probability clears the threshold.
#[derive(Debug, Clone)]
pub struct Labeler {
    alphabet: Alphabet,
    entries: Vec<Entry>,
    workspace: Vec<usize>,
}

impl Labeler {
    /// `workspace` lists the state indices the regions are defined over.
    pub fn new(
        alphabet: &Alphabet,
        props: &PropTable,
        regions: &[Polytope],
        workspace: &[usize],
    ) -> Result<Self, GeometryError> {
        let mut entries = Vec::new();
        for (bit, name) in alphabet.names().iter().enumerate() {
            let prop = props
                .get(name)
                .ok_or_else(|| GeometryError::UnknownProp(name.clone()))?;
            let region = regions
                .iter()
                .find(|r| r.name() == prop.region)
                .ok_or_else(|| GeometryError::UnresolvedRegion {
                    prop: name.clone(),
                    region: prop.region.clone(),
                })?;
            if region.dim() != workspace.len() {
                return Err(GeometryError::Dimension {
                    region: region.name().to_string(),
                    expected: workspace.len(),
                });
            }
            entries.push(Entry {
                bit,
                region: region.clone(),
                level: prop.level(),
                polarity: prop.polarity,
            });
        }
        Ok(Self {
            alphabet: alphabet.clone(),
            entries,
            workspace: workspace.to_vec(),
        })
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn workspace(&self) -> &[usize] {
        &self.workspace
    }

    /// Workspace marginal of a full-state Gaussian.
    pub fn marginal(&self, mean: &DVector<f64>, cov: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let w = &self.workspace;
        let m = DVector::from_iterator(w.len(), w.iter().map(|&i| mean[i]));
        let c = DMatrix::from_fn(w.len(), w.len(), |r, s| cov[(w[r], w[s])]);
        (m, c)
    }

    /// Label of `N(mean, cov)` over the full state.
    pub fn label_gaussian(&self, mean: &DVector<f64>, cov: &DMatrix<f64>) -> Result<Symbol, GeometryError> {
        let (m, c) = self.marginal(mean, cov);
        check_psd(&c)?;
        let mut bits = 0u32;
        for e in &self.entries {
            let holds = match e.polarity {
                Polarity::Reach => polytope_prob_lower_bound(&m, &c, &e.region)? > e.level,
                Polarity::Avoid => polytope_avoid_lower_bound(&m, &c, &e.region)? >= e.level,
            };
            if holds {
                bits |= 1 << e.bit;
            }
        }
        Ok(Symbol(bits))
    }

    /// Label of a belief, using its total covariance `Σ⁺ + Λ⁺`.
    pub fn label(&self, belief: &Belief) -> Result<Symbol, GeometryError> {
        self.label_gaussian(&belief.mean, &belief.total_cov())
    }

    /// Whether the event behind proposition `bit` holds at a concrete state
    /// (membership for reach, non-membership for avoid).
    pub fn event_holds(&self, bit: usize, state: &DVector<f64>) -> bool {
        let e = self
            .entries
            .iter()
            .find(|e| e.bit == bit)
            .expect("bit belongs to the alphabet");
        let x: Vec<f64> = self.workspace.iter().map(|&i| state[i]).collect();
        let inside = e.region.contains(&x);
        match e.polarity {
            Polarity::Reach => inside,
            Polarity::Avoid => !inside,
        }
    }

    /// Probability level required of proposition `bit`.
    pub fn level(&self, bit: usize) -> f64 {
        self.entries
            .iter()
            .find(|e| e.bit == bit)
            .map(|e| e.level)
            .expect("bit belongs to the alphabet")
    }
}

//! Hybrid discrete-continuous search tree: Gaussian belief vertices tagged
//! with automaton states, grown RRT-style inside the states of a task plan.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::{propagate_belief, Belief, BoxBounds, LinearGaussianSystem, NominalPlan};
use crate::geometry::Labeler;
use crate::ltlf::{StateId, Symbol};
use crate::task::{PrunedDfa, TaskPlan};

/// Default number of propagation steps per extension.
pub const DEFAULT_N_PROP: usize = 5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TreeError {
    #[error("initial belief cannot be labeled: {0}")]
    Label(String),
    #[error("initial belief label {0} is a pruned letter")]
    PrunedRoot(String),
    #[error("initial belief already violates the specification (label {0})")]
    DeadRoot(String),
}

/// Attempts between wall-clock checks.
pub const CLOCK_STRIDE: usize = 64;

/// Extension budget for one call to [`BeliefTree::grow`].
#[derive(Debug, Clone, Copy)]
pub struct Budget {
    pub extensions: usize,
    pub deadline: Option<Instant>,
}

impl Budget {
    pub fn expired(&self) -> bool {
        self.deadline.is_some_and(|d| Instant::now() >= d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GrowOutcome {
    Accepted(usize),
    Exhausted,
    TimedOut,
}

/// Dynamics, steering, and labeling seen by the tree.
pub trait SearchModel {
    /// Box that uniform targets are drawn from.
    fn sample_bounds(&self) -> &BoxBounds;

    /// Control that steers `from` toward `target` in one step.
    fn control_toward(&self, from: &Belief, target: &DVector<f64>) -> Option<DVector<f64>>;

    /// Successor belief under `u`, or `None` when it violates the constraints.
    fn apply(&self, from: &Belief, u: &DVector<f64>) -> Option<Belief>;

    fn label(&self, belief: &Belief) -> Option<Symbol>;
}

/// The full linear-Gaussian system with pseudo-inverse steering.
pub struct FullModel<'a> {
    sys: &'a LinearGaussianSystem,
    labeler: &'a Labeler,
    b_pinv: DMatrix<f64>,
}

impl<'a> FullModel<'a> {
    pub fn new(sys: &'a LinearGaussianSystem, labeler: &'a Labeler) -> Self {
        let b_pinv = sys
            .b
            .clone()
            .pseudo_inverse(1e-12)
            .unwrap_or_else(|_| DMatrix::zeros(sys.input_dim(), sys.state_dim()));
        Self {
            sys,
            labeler,
            b_pinv,
        }
    }

    pub fn system(&self) -> &LinearGaussianSystem {
        self.sys
    }
}

impl SearchModel for FullModel<'_> {
    fn sample_bounds(&self) -> &BoxBounds {
        &self.sys.state_bounds
    }

    fn control_toward(&self, from: &Belief, target: &DVector<f64>) -> Option<DVector<f64>> {
        let raw = &self.b_pinv * (target - &self.sys.a * &from.mean);
        Some(self.sys.input_bounds.clamp(&raw))
    }

    fn apply(&self, from: &Belief, u: &DVector<f64>) -> Option<Belief> {
        propagate_belief(self.sys, from, u).ok()
    }

    fn label(&self, belief: &Belief) -> Option<Symbol> {
        self.labeler.label(belief).ok()
    }
}

/// One propagation step stored on a tree edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub control: DVector<f64>,
    pub label: Symbol,
    pub q: StateId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeVertex {
    pub belief: Belief,
    pub q: StateId,
    pub parent: Option<usize>,
    /// Steps from the parent; the last one ends at this vertex.
    pub steps: Vec<Step>,
    /// Propagation steps from the root.
    pub depth: usize,
}

/// Counters describing how extensions ended.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeStats {
    pub attempts: usize,
    pub added: usize,
    /// Steps rejected because the label was a pruned letter.
    pub pruned_label_hits: usize,
    /// Steps rejected because the automaton could no longer accept.
    pub dead_state_hits: usize,
    /// Steps rejected by state or input bounds.
    pub bound_hits: usize,
}

/// Belief tree indexed by automaton state.
#[derive(Debug, Clone)]
pub struct BeliefTree {
    vertices: Vec<TreeVertex>,
    by_state: Vec<Vec<usize>>,
    root_label: Symbol,
    accepting: Option<usize>,
    pub stats: TreeStats,
}

impl BeliefTree {
    /// Tree rooted at `root`, whose automaton state is `δ(q0, L(root))`.
    pub fn new<M: SearchModel>(
        model: &M,
        dfa: &PrunedDfa,
        root: Belief,
    ) -> Result<Self, TreeError> {
        let label = model
            .label(&root)
            .ok_or_else(|| TreeError::Label("labeling failed".into()))?;
        let shown = dfa.alphabet().format_symbol(label);
        if dfa.is_blocked(label) {
            return Err(TreeError::PrunedRoot(shown));
        }
        let q = dfa.step(dfa.initial(), label);
        if !dfa.is_live(q) {
            return Err(TreeError::DeadRoot(shown));
        }
        let mut by_state = vec![Vec::new(); dfa.num_states()];
        by_state[q].push(0);
        Ok(Self {
            vertices: vec![TreeVertex {
                belief: root,
                q,
                parent: None,
                steps: Vec::new(),
                depth: 0,
            }],
            by_state,
            root_label: label,
            accepting: dfa.is_accepting(q).then_some(0),
            stats: TreeStats::default(),
        })
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertex(&self, id: usize) -> &TreeVertex {
        &self.vertices[id]
    }

    pub fn vertices(&self) -> &[TreeVertex] {
        &self.vertices
    }

    pub fn root(&self) -> &TreeVertex {
        &self.vertices[0]
    }

    pub fn root_label(&self) -> Symbol {
        self.root_label
    }

    /// Vertices whose discrete component is `q`.
    pub fn vertices_in(&self, q: StateId) -> &[usize] {
        &self.by_state[q]
    }

    /// Vertex count per automaton state.
    pub fn coverage(&self) -> Vec<usize> {
        self.by_state.iter().map(Vec::len).collect()
    }

    /// First accepting vertex found, if any.
    pub fn accepting(&self) -> Option<usize> {
        self.accepting
    }

    pub fn check_accepting(&self, id: usize, dfa: &PrunedDfa) -> bool {
        dfa.is_accepting(self.vertices[id].q)
    }

    /// One extension: pick `q` uniformly from the plan states holding a
    /// vertex, draw a target, grow from the nearest vertex in that class for
    /// up to `n_prop` steps. The longest valid prefix becomes a new vertex.
    pub fn extend<M, R, S>(
        &mut self,
        model: &M,
        dfa: &PrunedDfa,
        plan: &TaskPlan,
        n_prop: usize,
        sampler: &mut S,
        rng: &mut R,
    ) -> Option<usize>
    where
        M: SearchModel,
        R: Rng + ?Sized,
        S: FnMut(StateId, &mut R) -> DVector<f64>,
    {
        self.stats.attempts += 1;
        let frontier = plan.frontier(|q| !self.by_state[q].is_empty());
        let &q = frontier.choose(rng)?;
        let target = sampler(q, rng);
        let parent = self.nearest(q, &target)?;

        let mut belief = self.vertices[parent].belief.clone();
        let mut state = self.vertices[parent].q;
        let mut steps = Vec::new();
        for _ in 0..n_prop.max(1) {
            let Some(u) = model.control_toward(&belief, &target) else {
                break;
            };
            let Some(next) = model.apply(&belief, &u) else {
                self.stats.bound_hits += 1;
                break;
            };
            let Some(label) = model.label(&next) else {
                break;
            };
            if dfa.is_blocked(label) {
                self.stats.pruned_label_hits += 1;
                break;
            }
            let nq = dfa.step(state, label);
            if !dfa.is_live(nq) {
                self.stats.dead_state_hits += 1;
                break;
            }
            steps.push(Step {
                control: u,
                label,
                q: nq,
            });
            belief = next;
            state = nq;
            if dfa.is_accepting(nq) {
                break;
            }
        }
        if steps.is_empty() {
            return None;
        }
        Some(self.push(parent, belief, state, steps, dfa))
    }

    /// Extends until an accepting vertex exists, `budget.extensions`
    /// attempts were made, or the deadline passes. The clock is read every
    /// [`CLOCK_STRIDE`] attempts.
    pub fn grow<M, R, S>(
        &mut self,
        model: &M,
        dfa: &PrunedDfa,
        plan: &TaskPlan,
        n_prop: usize,
        budget: Budget,
        sampler: &mut S,
        rng: &mut R,
    ) -> GrowOutcome
    where
        M: SearchModel,
        R: Rng + ?Sized,
        S: FnMut(StateId, &mut R) -> DVector<f64>,
    {
        for i in 0..budget.extensions {
            if let Some(id) = self.accepting {
                return GrowOutcome::Accepted(id);
            }
            if i % CLOCK_STRIDE == 0 && budget.expired() {
                return GrowOutcome::TimedOut;
            }
            self.extend(model, dfa, plan, n_prop, sampler, rng);
        }
        match self.accepting {
            Some(id) => GrowOutcome::Accepted(id),
            None => GrowOutcome::Exhausted,
        }
    }

    fn push(
        &mut self,
        parent: usize,
        belief: Belief,
        q: StateId,
        steps: Vec<Step>,
        dfa: &PrunedDfa,
    ) -> usize {
        let id = self.vertices.len();
        let depth = self.vertices[parent].depth + steps.len();
        self.vertices.push(TreeVertex {
            belief,
            q,
            parent: Some(parent),
            steps,
            depth,
        });
        self.by_state[q].push(id);
        self.stats.added += 1;
        if self.accepting.is_none() && dfa.is_accepting(q) {
            self.accepting = Some(id);
        }
        id
    }

    fn nearest(&self, q: StateId, target: &DVector<f64>) -> Option<usize> {
        self.by_state[q]
            .iter()
            .copied()
            .map(|id| {
                let m = &self.vertices[id].belief.mean;
                let d: f64 = m.iter().zip(target.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
                (id, d)
            })
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(id, _)| id)
    }

    /// Vertex ids from the root to `id`.
    pub fn path_to(&self, id: usize) -> Vec<usize> {
        let mut path = vec![id];
        let mut cur = id;
        while let Some(p) = self.vertices[cur].parent {
            path.push(p);
            cur = p;
        }
        path.reverse();
        path
    }

    /// All steps from the root to `id`, in order.
    pub fn steps_to(&self, id: usize) -> Vec<&Step> {
        self.path_to(id)
            .into_iter()
            .flat_map(|v| self.vertices[v].steps.iter())
            .collect()
    }

    pub fn snapshot(&self, dfa: &PrunedDfa) -> TreeSnapshot {
        TreeSnapshot {
            alphabet: dfa.alphabet().names().to_vec(),
            vertices: self
                .vertices
                .iter()
                .enumerate()
                .map(|(id, v)| SnapshotVertex {
                    id,
                    parent: v.parent,
                    mean: v.belief.mean.iter().copied().collect(),
                    q: v.q,
                    depth: v.depth,
                    accepting: dfa.is_accepting(v.q),
                })
                .collect(),
        }
    }
}

/// Plot-ready dump of a tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeSnapshot {
    pub alphabet: Vec<String>,
    pub vertices: Vec<SnapshotVertex>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotVertex {
    pub id: usize,
    pub parent: Option<usize>,
    pub mean: Vec<f64>,
    pub q: StateId,
    pub depth: usize,
    pub accepting: bool,
}

/// A nominal plan with the beliefs, labels, and automaton run it induces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractedPlan {
    pub plan: NominalPlan,
    /// `b_0 … b_k`.
    pub beliefs: Vec<Belief>,
    /// `L(b_0) … L(b_k)`.
    pub word: Vec<Symbol>,
    /// Automaton state after each letter of `word` (pruned automaton).
    pub run: Vec<StateId>,
}

/// Concatenates the controls from the root to `id`, replays them through
/// the belief recursions, and checks the replay and the word.
///
/// Panics if the replay does not reproduce the stored vertex or the word is
/// rejected by the unpruned automaton; either means a bug in the search.
pub fn extract_plan(
    tree: &BeliefTree,
    sys: &LinearGaussianSystem,
    dfa: &PrunedDfa,
    id: usize,
) -> ExtractedPlan {
    let root = tree.root();
    let steps = tree.steps_to(id);
    let controls: Vec<DVector<f64>> = steps.iter().map(|s| s.control.clone()).collect();
    let mut beliefs = vec![root.belief.clone()];
    for u in &controls {
        let next = propagate_belief(sys, beliefs.last().unwrap(), u)
            .expect("stored controls replay within bounds");
        beliefs.push(next);
    }
    assert_eq!(
        beliefs.last().unwrap(),
        &tree.vertex(id).belief,
        "replayed belief differs from the stored vertex"
    );
    let mut word = vec![tree.root_label()];
    let mut run = vec![root.q];
    for s in &steps {
        word.push(s.label);
        run.push(s.q);
    }
    assert!(
        dfa.base().accepts(&word),
        "extracted word is rejected by the unpruned automaton"
    );
    let plan = NominalPlan {
        states: beliefs.iter().map(|b| b.mean.clone()).collect(),
        controls,
    };
    ExtractedPlan {
        plan,
        beliefs,
        word,
        run,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belief::MeasurementNoise;
    use crate::geometry::{build_adjacency_graph, Polytope};
    use crate::ltlf::{compile_to_dfa, parse_formula, AtomicProp, Polarity, PropTable};
    use crate::task::prune_letters;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn corridor() -> LinearGaussianSystem {
        let m = |v: f64| DMatrix::from_element(1, 1, v);
        LinearGaussianSystem {
            a: m(1.0),
            b: m(1.0),
            c: m(1.0),
            d: m(0.0),
            process_noise: m(1e-4),
            zones: Vec::new(),
            default_noise: MeasurementNoise::Cov(m(1e-3)),
            gain: m(0.5),
            input_bounds: BoxBounds::new(vec![-0.5], vec![0.5]),
            state_bounds: BoxBounds::new(vec![0.0], vec![10.0]),
            dt: 1.0,
            workspace: vec![0],
        }
    }

    struct Setup {
        sys: LinearGaussianSystem,
        labeler: Labeler,
        dfa: PrunedDfa,
    }

    fn setup(formula: &str, regions: Vec<Polytope>, props: Vec<AtomicProp>) -> Setup {
        let sys = corridor();
        let props = PropTable::new(props);
        let dfa = compile_to_dfa(&parse_formula(formula, &props).unwrap()).unwrap();
        let adj = build_adjacency_graph(&regions).unwrap();
        let labeler = Labeler::new(dfa.alphabet(), &props, &regions, &sys.workspace).unwrap();
        let dfa = prune_letters(&dfa, &props, &regions, &adj);
        Setup { sys, labeler, dfa }
    }

    fn reach(name: &str, region: &str) -> AtomicProp {
        AtomicProp {
            name: name.into(),
            region: region.into(),
            alpha: 0.05,
            polarity: Polarity::Reach,
        }
    }

    fn start(x: f64) -> Belief {
        Belief::initial(DVector::from_element(1, x), DMatrix::from_element(1, 1, 1e-4))
    }

    #[test]
    fn root_already_accepting() {
        let s = setup(
            "F a",
            vec![Polytope::from_box("A", &[0.0], &[2.0]).unwrap()],
            vec![reach("a", "A")],
        );
        let model = FullModel::new(&s.sys, &s.labeler);
        let tree = BeliefTree::new(&model, &s.dfa, start(1.0)).unwrap();
        assert_eq!(tree.accepting(), Some(0));
        assert!(tree.check_accepting(0, &s.dfa));
        let out = extract_plan(&tree, &s.sys, &s.dfa, 0);
        assert!(out.plan.controls.is_empty());
        assert_eq!(out.word.len(), 1);
    }

    #[test]
    fn one_step_acceptance() {
        let s = setup(
            "F a",
            vec![Polytope::from_box("A", &[0.9], &[3.0]).unwrap()],
            vec![reach("a", "A")],
        );
        let model = FullModel::new(&s.sys, &s.labeler);
        let mut tree = BeliefTree::new(&model, &s.dfa, start(0.6)).unwrap();
        assert!(!tree.check_accepting(0, &s.dfa));
        let plan = s.dfa.clone().plan_task_from(tree.root().q).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut toward = |_: StateId, _: &mut ChaCha8Rng| DVector::from_element(1, 2.0);
        let id = tree
            .extend(&model, &s.dfa, &plan, 5, &mut toward, &mut rng)
            .unwrap();
        assert!(tree.check_accepting(id, &s.dfa));
        assert_eq!(tree.vertex(id).steps.len(), 1);
    }

    #[test]
    fn pruned_label_rejects_extension() {
        // block {a} by hand so the first step lands on a pruned letter
        let s = setup(
            "F (a | b)",
            vec![
                Polytope::from_box("A", &[0.9], &[3.0]).unwrap(),
                Polytope::from_box("B", &[8.0], &[9.0]).unwrap(),
            ],
            vec![reach("a", "A"), reach("b", "B")],
        );
        let blocked = PrunedDfa::with_blocked(s.dfa.base().clone(), &[Symbol(1)]);
        let model = FullModel::new(&s.sys, &s.labeler);
        let mut tree = BeliefTree::new(&model, &blocked, start(0.6)).unwrap();
        let plan = TaskPlan {
            run: vec![tree.root().q],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut toward = |_: StateId, _: &mut ChaCha8Rng| DVector::from_element(1, 2.0);
        assert!(tree
            .extend(&model, &blocked, &plan, 5, &mut toward, &mut rng)
            .is_none());
        assert_eq!(tree.stats.pruned_label_hits, 1);
        assert_eq!(tree.len(), 1);
    }

    #[test]
    fn corridor_coverage_regression() {
        let s = setup(
            "F a",
            vec![Polytope::from_box("A", &[100.0], &[101.0]).unwrap()],
            vec![reach("a", "A")],
        );
        let model = FullModel::new(&s.sys, &s.labeler);
        let mut tree = BeliefTree::new(&model, &s.dfa, start(5.0)).unwrap();
        let plan = s.dfa.clone().plan_task_from(tree.root().q).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let bounds = s.sys.state_bounds.clone();
        let mut uniform = |_: StateId, r: &mut ChaCha8Rng| bounds.sample(r);
        for _ in 0..500 {
            tree.extend(&model, &s.dfa, &plan, DEFAULT_N_PROP, &mut uniform, &mut rng);
        }
        let covered = (0..=1000)
            .filter(|i| {
                let x = *i as f64 / 100.0;
                tree.vertices()
                    .iter()
                    .any(|v| (v.belief.mean[0] - x).abs() <= 0.1)
            })
            .count();
        assert!(covered as f64 / 1001.0 > 0.9, "coverage {covered}/1001");
        assert_eq!(tree.coverage().iter().sum::<usize>(), tree.len());
    }

    #[test]
    fn stored_branches_are_consistent() {
        let s = setup(
            "F a",
            vec![Polytope::from_box("A", &[8.0], &[9.0]).unwrap()],
            vec![reach("a", "A")],
        );
        let model = FullModel::new(&s.sys, &s.labeler);
        let mut tree = BeliefTree::new(&model, &s.dfa, start(1.0)).unwrap();
        let plan = s.dfa.clone().plan_task_from(tree.root().q).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let bounds = s.sys.state_bounds.clone();
        let mut uniform = |_: StateId, r: &mut ChaCha8Rng| bounds.sample(r);
        while tree.accepting().is_none() {
            tree.extend(&model, &s.dfa, &plan, DEFAULT_N_PROP, &mut uniform, &mut rng);
        }
        for id in 0..tree.len() {
            let mut q = tree.root().q;
            for step in tree.steps_to(id) {
                q = s.dfa.step(q, step.label);
                assert_eq!(q, step.q);
            }
            assert_eq!(q, tree.vertex(id).q);
        }
        let out = extract_plan(&tree, &s.sys, &s.dfa, tree.accepting().unwrap());
        assert!(out.plan.residual(&s.sys) < 1e-12);
        let snap = tree.snapshot(&s.dfa);
        let text = serde_json::to_string(&snap).unwrap();
        assert_eq!(serde_json::from_str::<TreeSnapshot>(&text).unwrap(), snap);
    }
}

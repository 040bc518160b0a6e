//! Task layer: geometric letter pruning, feasibility weights, and the
//! weighted shortest accepting run that steers the search layers.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{AdjacencyGraph, Contact, Polytope};
use crate::ltlf::{Alphabet, Dfa, Guard, Polarity, PropTable, StateId, Symbol};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TaskError {
    #[error("specification is infeasible: no accepting state is reachable{}", describe_blocked(.blocked))]
    Infeasible { blocked: Vec<String> },
}

fn describe_blocked(blocked: &[String]) -> String {
    if blocked.is_empty() {
        String::new()
    } else {
        format!(" (pruned letters: {})", blocked.join(" "))
    }
}

/// Feasibility counters kept per automaton state.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateStats {
    /// Belief-tree vertices carrying this state.
    pub cov: usize,
    /// Times this state appeared on a selected task plan.
    pub numsel: usize,
}

/// A DFA with geometrically impossible letters redirected to a rejecting
/// sink, plus the weight statistics the task planner reads.
#[derive(Debug, Clone)]
pub struct PrunedDfa {
    base: Dfa,
    pruned: Dfa,
    sink: Option<StateId>,
    blocked: Guard,
    dist: Vec<Option<usize>>,
    pub stats: Vec<StateStats>,
}

/// Whether a letter asserting both propositions is impossible for any belief.
fn co_truth_impossible(
    a: &crate::ltlf::AtomicProp,
    b: &crate::ltlf::AtomicProp,
    regions: &[Polytope],
    adjacency: &AdjacencyGraph,
) -> bool {
    let region = |name: &str| regions.iter().find(|r| r.name() == name);
    let mass = a.level() + b.level() > 1.0;
    if !mass {
        return false;
    }
    match (a.polarity, b.polarity) {
        (Polarity::Reach, Polarity::Reach) => {
            a.region != b.region
                && adjacency.contact(&a.region, &b.region) != Some(Contact::Intersecting)
        }
        (Polarity::Reach, Polarity::Avoid) | (Polarity::Avoid, Polarity::Reach) => {
            let (reach, avoid) = if a.polarity == Polarity::Reach {
                (a, b)
            } else {
                (b, a)
            };
            if reach.region == avoid.region {
                return true;
            }
            match (region(&reach.region), region(&avoid.region)) {
                (Some(inner), Some(outer)) => inner.is_inside(outer, 1e-9),
                _ => false,
            }
        }
        (Polarity::Avoid, Polarity::Avoid) => false,
    }
}

/// Letters of `alphabet` that no belief can produce.
pub fn impossible_letters(
    alphabet: &Alphabet,
    props: &PropTable,
    regions: &[Polytope],
    adjacency: &AdjacencyGraph,
) -> Vec<Symbol> {
    let resolved: Vec<Option<&crate::ltlf::AtomicProp>> =
        alphabet.names().iter().map(|n| props.get(n)).collect();
    let n = alphabet.len();
    let mut conflicts = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if let (Some(a), Some(b)) = (resolved[i], resolved[j]) {
                if co_truth_impossible(a, b, regions, adjacency) {
                    conflicts.push((1u32 << i) | (1u32 << j));
                }
            }
        }
    }
    alphabet
        .letters()
        .filter(|s| conflicts.iter().any(|&m| s.0 & m == m))
        .collect()
}

/// Prunes impossible letters from `dfa`. Blocked letters lead to an added
/// rejecting sink so the automaton stays total.
pub fn prune_letters(
    dfa: &Dfa,
    props: &PropTable,
    regions: &[Polytope],
    adjacency: &AdjacencyGraph,
) -> PrunedDfa {
    let blocked_letters = impossible_letters(dfa.alphabet(), props, regions, adjacency);
    PrunedDfa::with_blocked(dfa.clone(), &blocked_letters)
}

impl PrunedDfa {
    /// Prunes an explicit set of letters.
    pub fn with_blocked(base: Dfa, blocked_letters: &[Symbol]) -> Self {
        let alphabet = base.alphabet().clone();
        let blocked = Guard::from_letters(blocked_letters, alphabet.len());
        let n = base.num_states();
        let (pruned, sink) = if blocked.is_never() {
            (base.clone(), None)
        } else {
            let mut table = base.table();
            for row in table.iter_mut() {
                for (letter, t) in row.iter_mut().enumerate() {
                    if blocked.eval(Symbol(letter as u32)) {
                        *t = n;
                    }
                }
            }
            table.push(vec![n; alphabet.letter_count() as usize]);
            let mut accepting: Vec<bool> = (0..n).map(|q| base.is_accepting(q)).collect();
            accepting.push(false);
            (
                Dfa::from_table(alphabet, base.initial(), accepting, &table),
                Some(n),
            )
        };
        let dist = distances(&pruned, sink);
        let stats = vec![StateStats::default(); pruned.num_states()];
        Self {
            base,
            pruned,
            sink,
            blocked,
            dist,
            stats,
        }
    }

    pub fn base(&self) -> &Dfa {
        &self.base
    }

    /// The automaton with blocked letters redirected to the sink.
    pub fn automaton(&self) -> &Dfa {
        &self.pruned
    }

    pub fn alphabet(&self) -> &Alphabet {
        self.base.alphabet()
    }

    pub fn initial(&self) -> StateId {
        self.pruned.initial()
    }

    pub fn sink(&self) -> Option<StateId> {
        self.sink
    }

    pub fn num_states(&self) -> usize {
        self.pruned.num_states()
    }

    pub fn blocking_guard(&self) -> &Guard {
        &self.blocked
    }

    pub fn is_blocked(&self, sym: Symbol) -> bool {
        self.blocked.eval(sym)
    }

    pub fn blocked_letters(&self) -> Vec<String> {
        self.blocked
            .letters(self.alphabet())
            .into_iter()
            .map(|s| self.alphabet().format_symbol(s))
            .collect()
    }

    pub fn is_accepting(&self, q: StateId) -> bool {
        self.pruned.is_accepting(q)
    }

    /// Successor under the pruned automaton.
    pub fn step(&self, q: StateId, sym: Symbol) -> StateId {
        self.pruned.step(q, sym)
    }

    /// Whether `q` can still reach an accepting state.
    pub fn is_live(&self, q: StateId) -> bool {
        self.dist[q].is_some()
    }

    /// Unweighted hop count to acceptance over unpruned edges.
    pub fn dist_from_acc(&self) -> &[Option<usize>] {
        &self.dist
    }

    /// Hop counts, failing when the initial state cannot reach acceptance.
    pub fn checked_dist_from_acc(&self) -> Result<&[Option<usize>], TaskError> {
        if self.dist[self.initial()].is_none() {
            return Err(TaskError::Infeasible {
                blocked: self.blocked_letters(),
            });
        }
        Ok(&self.dist)
    }

    /// `w(q) = (cov + 1) / (DistFromAcc · (numsel + 1)²)`. Accepting states
    /// use a distance of 1; dead states have no weight.
    pub fn state_weight(&self, q: StateId) -> Option<f64> {
        let d = self.dist[q]?;
        Some(weight_formula(self.stats[q], d.max(1)))
    }

    /// `(w(q) · w(q'))⁻¹`.
    pub fn edge_weight(&self, q: StateId, r: StateId) -> Option<f64> {
        Some(1.0 / (self.state_weight(q)? * self.state_weight(r)?))
    }

    /// Distinct successors of `q` other than itself and the sink.
    pub fn successors(&self, q: StateId) -> Vec<StateId> {
        let mut out: Vec<StateId> = self
            .pruned
            .transitions(q)
            .iter()
            .map(|t| t.target)
            .filter(|&t| t != q && Some(t) != self.sink)
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Minimum-weight run from the initial state to acceptance (Dijkstra,
    /// i.e. A* with a zero heuristic). Every state on the run has its
    /// selection count bumped.
    pub fn plan_task(&mut self) -> Result<TaskPlan, TaskError> {
        self.plan_task_from(self.initial())
    }

    pub fn plan_task_from(&mut self, start: StateId) -> Result<TaskPlan, TaskError> {
        let run = self.cheapest_run(start).ok_or_else(|| TaskError::Infeasible {
            blocked: self.blocked_letters(),
        })?;
        for &q in &run {
            self.stats[q].numsel += 1;
        }
        Ok(TaskPlan { run })
    }

    fn cheapest_run(&self, start: StateId) -> Option<Vec<StateId>> {
        let n = self.num_states();
        self.dist[start]?;
        if self.is_accepting(start) {
            return Some(vec![start]);
        }
        let mut best = vec![f64::INFINITY; n];
        let mut prev = vec![usize::MAX; n];
        let mut heap = BinaryHeap::new();
        best[start] = 0.0;
        heap.push(Entry { cost: 0.0, state: start });
        while let Some(Entry { cost, state }) = heap.pop() {
            if cost > best[state] {
                continue;
            }
            if self.is_accepting(state) {
                let mut run = vec![state];
                let mut cur = state;
                while cur != start {
                    cur = prev[cur];
                    run.push(cur);
                }
                run.reverse();
                return Some(run);
            }
            for next in self.successors(state) {
                let Some(w) = self.edge_weight(state, next) else {
                    continue;
                };
                let c = cost + w;
                if c < best[next] {
                    best[next] = c;
                    prev[next] = state;
                    heap.push(Entry { cost: c, state: next });
                }
            }
        }
        None
    }
}

pub(crate) fn weight_formula(stats: StateStats, dist: usize) -> f64 {
    let sel = (stats.numsel + 1) as f64;
    (stats.cov + 1) as f64 / (dist as f64 * sel * sel)
}

fn distances(dfa: &Dfa, sink: Option<StateId>) -> Vec<Option<usize>> {
    let n = dfa.num_states();
    let mut reverse: Vec<Vec<StateId>> = vec![Vec::new(); n];
    for q in 0..n {
        if Some(q) == sink {
            continue;
        }
        for t in dfa.transitions(q) {
            if Some(t.target) != sink && !t.guard.is_never() {
                reverse[t.target].push(q);
            }
        }
    }
    let mut dist = vec![None; n];
    let mut queue = VecDeque::new();
    for q in dfa.accepting_states() {
        dist[q] = Some(0);
        queue.push_back(q);
    }
    while let Some(q) = queue.pop_front() {
        let d = dist[q].unwrap();
        for &p in &reverse[q] {
            if dist[p].is_none() {
                dist[p] = Some(d + 1);
                queue.push_back(p);
            }
        }
    }
    dist
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Entry {
    cost: f64,
    state: StateId,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.state.cmp(&self.state))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// An accepting run over automaton states chosen by the task planner.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskPlan {
    pub run: Vec<StateId>,
}

impl TaskPlan {
    /// States of the run that satisfy `occupied` (i.e. already hold a tree
    /// vertex), in run order.
    pub fn frontier(&self, occupied: impl Fn(StateId) -> bool) -> Vec<StateId> {
        let mut out = Vec::new();
        for &q in &self.run {
            if occupied(q) && !out.contains(&q) {
                out.push(q);
            }
        }
        out
    }

    /// State following `q` on the run.
    pub fn successor(&self, q: StateId) -> Option<StateId> {
        let i = self.run.iter().position(|&s| s == q)?;
        self.run.get(i + 1).copied()
    }

    pub fn contains(&self, q: StateId) -> bool {
        self.run.contains(&q)
    }
}

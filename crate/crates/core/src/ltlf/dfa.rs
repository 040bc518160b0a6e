//! LTLf to minimal DFA.
//!
//! The formula is put in negation normal form and progressed letter by
//! letter. A clause (set of pending obligations) is a state of an implicit
//! NFA; a DNF over clauses is the subset-construction state. Each subset
//! state also carries a flag recording whether the word read so far already
//! satisfies the formula. The resulting automaton is minimized by partition
//! refinement and transitions are grouped into guards.

use std::collections::{BTreeSet, HashMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ast::{Alphabet, Ltlf, Symbol, MAX_PROPS};
use super::guard::Guard;

pub type StateId = usize;

pub const DEFAULT_STATE_CAP: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CompileError {
    #[error("automaton exceeded the state budget of {cap} states")]
    StateBudget { cap: usize },
    #[error("formula mentions {count} propositions; at most {max} are supported")]
    TooManyProps { count: usize, max: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub guard: Guard,
    pub target: StateId,
}

/// Deterministic, total automaton with guarded transitions. State `initial`
/// is reachable by construction and the guards leaving each state partition
/// the alphabet.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dfa {
    alphabet: Alphabet,
    initial: StateId,
    accepting: Vec<bool>,
    transitions: Vec<Vec<Transition>>,
}

impl Dfa {
    /// Builds from an explicit transition table `table[state][letter]`.
    /// Parallel letters to the same target are merged into one guard.
    pub fn from_table(
        alphabet: Alphabet,
        initial: StateId,
        accepting: Vec<bool>,
        table: &[Vec<StateId>],
    ) -> Self {
        let transitions = table
            .iter()
            .map(|row| {
                let mut by_target: Vec<(StateId, Vec<Symbol>)> = Vec::new();
                for (letter, &t) in row.iter().enumerate() {
                    let sym = Symbol(letter as u32);
                    match by_target.iter_mut().find(|(x, _)| *x == t) {
                        Some((_, v)) => v.push(sym),
                        None => by_target.push((t, vec![sym])),
                    }
                }
                by_target.sort_by_key(|(t, _)| *t);
                by_target
                    .into_iter()
                    .map(|(target, letters)| Transition {
                        guard: Guard::from_letters(&letters, alphabet.len()),
                        target,
                    })
                    .collect()
            })
            .collect();
        Self {
            alphabet,
            initial,
            accepting,
            transitions,
        }
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn initial(&self) -> StateId {
        self.initial
    }

    pub fn num_states(&self) -> usize {
        self.accepting.len()
    }

    pub fn is_accepting(&self, q: StateId) -> bool {
        self.accepting[q]
    }

    pub fn accepting_states(&self) -> impl Iterator<Item = StateId> + '_ {
        (0..self.num_states()).filter(|&q| self.accepting[q])
    }

    pub fn transitions(&self, q: StateId) -> &[Transition] {
        &self.transitions[q]
    }

    pub fn num_transitions(&self) -> usize {
        self.transitions.iter().map(Vec::len).sum()
    }

    /// Target of the unique transition enabled by `sym`.
    pub fn step(&self, q: StateId, sym: Symbol) -> StateId {
        self.transitions[q]
            .iter()
            .find(|t| t.guard.eval(sym))
            .map(|t| t.target)
            .expect("guards are exhaustive")
    }

    /// State reached after reading `word` from the initial state.
    pub fn run(&self, word: &[Symbol]) -> StateId {
        word.iter().fold(self.initial, |q, &s| self.step(q, s))
    }

    pub fn accepts(&self, word: &[Symbol]) -> bool {
        self.accepting[self.run(word)]
    }

    pub fn table(&self) -> Vec<Vec<StateId>> {
        (0..self.num_states())
            .map(|q| self.alphabet.letters().map(|s| self.step(q, s)).collect())
            .collect()
    }

    /// Re-runs partition refinement over this automaton.
    pub fn minimized(&self) -> Dfa {
        let (table, accepting, initial) =
            minimize_table(&self.table(), &self.accepting, self.initial);
        Dfa::from_table(self.alphabet.clone(), initial, accepting, &table)
    }

    /// Number of guards satisfied by `sym` in state `q`; 1 for a well-formed automaton.
    pub fn enabled_count(&self, q: StateId, sym: Symbol) -> usize {
        self.transitions[q].iter().filter(|t| t.guard.eval(sym)).count()
    }

    /// Translates a symbol over `other` into this automaton's alphabet.
    pub fn project_symbol(&self, other: &Alphabet, sym: Symbol) -> Symbol {
        self.alphabet.symbol(other.true_names(sym))
    }
}

type NodeId = usize;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum Node {
    True,
    False,
    Lit(usize, bool),
    And(NodeId, NodeId),
    Or(NodeId, NodeId),
    Next(NodeId),
    WeakNext(NodeId),
    Until(NodeId, NodeId),
    Release(NodeId, NodeId),
}

/// DNF over obligations. `{[]}` is true, `{}` is false.
type Clause = Vec<NodeId>;
type Dnf = BTreeSet<Clause>;

fn dnf_true() -> Dnf {
    BTreeSet::from([Vec::new()])
}

fn absorb(d: Dnf) -> Dnf {
    let clauses: Vec<Clause> = d.into_iter().collect();
    let mut keep = Dnf::new();
    'outer: for (i, c) in clauses.iter().enumerate() {
        for (j, other) in clauses.iter().enumerate() {
            if i != j && other.len() < c.len() && other.iter().all(|x| c.binary_search(x).is_ok()) {
                continue 'outer;
            }
        }
        keep.insert(c.clone());
    }
    keep
}

struct Arena {
    nodes: Vec<Node>,
    index: HashMap<Node, NodeId>,
    prog_memo: HashMap<(NodeId, u32), Dnf>,
}

impl Arena {
    fn new() -> Self {
        Self {
            nodes: Vec::new(),
            index: HashMap::new(),
            prog_memo: HashMap::new(),
        }
    }

    fn intern(&mut self, n: Node) -> NodeId {
        if let Some(&id) = self.index.get(&n) {
            return id;
        }
        let id = self.nodes.len();
        self.nodes.push(n.clone());
        self.index.insert(n, id);
        id
    }

    fn nnf(&mut self, f: &Ltlf, neg: bool, alphabet: &Alphabet) -> NodeId {
        let node = match f {
            Ltlf::True => {
                if neg {
                    Node::False
                } else {
                    Node::True
                }
            }
            Ltlf::False => {
                if neg {
                    Node::True
                } else {
                    Node::False
                }
            }
            Ltlf::Atom(n) => {
                let i = alphabet.index_of(n).expect("alphabet built from formula");
                Node::Lit(i, !neg)
            }
            Ltlf::Not(a) => return self.nnf(a, !neg, alphabet),
            Ltlf::And(a, b) => {
                let (x, y) = (self.nnf(a, neg, alphabet), self.nnf(b, neg, alphabet));
                if neg {
                    Node::Or(x, y)
                } else {
                    Node::And(x, y)
                }
            }
            Ltlf::Or(a, b) => {
                let (x, y) = (self.nnf(a, neg, alphabet), self.nnf(b, neg, alphabet));
                if neg {
                    Node::And(x, y)
                } else {
                    Node::Or(x, y)
                }
            }
            Ltlf::Next(a) => {
                let x = self.nnf(a, neg, alphabet);
                if neg {
                    Node::WeakNext(x)
                } else {
                    Node::Next(x)
                }
            }
            Ltlf::Until(a, b) => {
                let (x, y) = (self.nnf(a, neg, alphabet), self.nnf(b, neg, alphabet));
                if neg {
                    Node::Release(x, y)
                } else {
                    Node::Until(x, y)
                }
            }
            // F a = true U a, !F a = false R !a
            Ltlf::Eventually(a) => {
                let x = self.nnf(a, neg, alphabet);
                if neg {
                    let f = self.intern(Node::False);
                    Node::Release(f, x)
                } else {
                    let t = self.intern(Node::True);
                    Node::Until(t, x)
                }
            }
            // G a = false R a, !G a = true U !a
            Ltlf::Globally(a) => {
                let x = self.nnf(a, neg, alphabet);
                if neg {
                    let t = self.intern(Node::True);
                    Node::Until(t, x)
                } else {
                    let f = self.intern(Node::False);
                    Node::Release(f, x)
                }
            }
        };
        self.intern(node)
    }

    fn and(&self, a: &Dnf, b: &Dnf) -> Dnf {
        let mut out = Dnf::new();
        for x in a {
            'pair: for y in b {
                let mut c: Clause = x.iter().chain(y.iter()).copied().collect();
                c.sort_unstable();
                c.dedup();
                // Drop clauses that demand a literal both ways.
                for w in &c {
                    if let Node::Lit(i, true) = self.nodes[*w] {
                        if c.iter().any(|v| self.nodes[*v] == Node::Lit(i, false)) {
                            continue 'pair;
                        }
                    }
                }
                out.insert(c);
            }
        }
        absorb(out)
    }

    fn or(a: &Dnf, b: &Dnf) -> Dnf {
        absorb(a.union(b).cloned().collect())
    }

    /// Boolean structure flattened into a DNF over temporal obligations and literals.
    fn expand(&self, id: NodeId) -> Dnf {
        match self.nodes[id] {
            Node::True => dnf_true(),
            Node::False => Dnf::new(),
            Node::And(a, b) => self.and(&self.expand(a), &self.expand(b)),
            Node::Or(a, b) => Self::or(&self.expand(a), &self.expand(b)),
            _ => BTreeSet::from([vec![id]]),
        }
    }

    /// Obligation on the (non-empty) remainder of the word after reading `sym`.
    fn prog(&mut self, id: NodeId, sym: Symbol) -> Dnf {
        if let Some(d) = self.prog_memo.get(&(id, sym.0)) {
            return d.clone();
        }
        let out = match self.nodes[id].clone() {
            Node::True => dnf_true(),
            Node::False => Dnf::new(),
            Node::Lit(i, pos) => {
                if sym.has(i) == pos {
                    dnf_true()
                } else {
                    Dnf::new()
                }
            }
            Node::And(a, b) => {
                let (x, y) = (self.prog(a, sym), self.prog(b, sym));
                self.and(&x, &y)
            }
            Node::Or(a, b) => {
                let (x, y) = (self.prog(a, sym), self.prog(b, sym));
                Self::or(&x, &y)
            }
            Node::Next(a) | Node::WeakNext(a) => self.expand(a),
            Node::Until(a, b) => {
                let pb = self.prog(b, sym);
                let pa = self.prog(a, sym);
                let keep = self.and(&pa, &BTreeSet::from([vec![id]]));
                Self::or(&pb, &keep)
            }
            Node::Release(a, b) => {
                let pb = self.prog(b, sym);
                let pa = self.prog(a, sym);
                let keep = Self::or(&pa, &BTreeSet::from([vec![id]]));
                self.and(&pb, &keep)
            }
        };
        self.prog_memo.insert((id, sym.0), out.clone());
        out
    }

    /// Truth on the one-letter word `sym`.
    fn last(&self, id: NodeId, sym: Symbol) -> bool {
        match self.nodes[id] {
            Node::True => true,
            Node::False => false,
            Node::Lit(i, pos) => sym.has(i) == pos,
            Node::And(a, b) => self.last(a, sym) && self.last(b, sym),
            Node::Or(a, b) => self.last(a, sym) || self.last(b, sym),
            Node::Next(_) => false,
            Node::WeakNext(_) => true,
            Node::Until(_, b) | Node::Release(_, b) => self.last(b, sym),
        }
    }
}

/// Compiles with the default state budget.
pub fn compile_to_dfa(formula: &Ltlf) -> Result<Dfa, CompileError> {
    compile_with_cap(formula, DEFAULT_STATE_CAP)
}

pub fn compile_with_cap(formula: &Ltlf, cap: usize) -> Result<Dfa, CompileError> {
    let alphabet = Alphabet::of(formula);
    if alphabet.len() > MAX_PROPS {
        return Err(CompileError::TooManyProps {
            count: alphabet.len(),
            max: MAX_PROPS,
        });
    }
    let mut arena = Arena::new();
    let root = arena.nnf(formula, false, &alphabet);

    let start = (arena.expand(root), false);
    let mut ids: HashMap<(Dnf, bool), StateId> = HashMap::new();
    let mut states: Vec<(Dnf, bool)> = Vec::new();
    let mut table: Vec<Vec<StateId>> = Vec::new();
    ids.insert(start.clone(), 0);
    states.push(start);
    let mut queue = VecDeque::from([0usize]);

    while let Some(s) = queue.pop_front() {
        let dnf = states[s].0.clone();
        let mut row = Vec::with_capacity(alphabet.letter_count() as usize);
        for sym in alphabet.letters() {
            let mut next = Dnf::new();
            let mut accept = false;
            for clause in &dnf {
                let mut d = dnf_true();
                let mut ok = true;
                for &ob in clause {
                    let p = arena.prog(ob, sym);
                    d = arena.and(&d, &p);
                    ok &= arena.last(ob, sym);
                }
                accept |= ok;
                next = Arena::or(&next, &d);
            }
            let key = (next, accept);
            let id = match ids.get(&key) {
                Some(&id) => id,
                None => {
                    let id = states.len();
                    if id >= cap {
                        return Err(CompileError::StateBudget { cap });
                    }
                    ids.insert(key.clone(), id);
                    states.push(key);
                    queue.push_back(id);
                    id
                }
            };
            row.push(id);
        }
        table.push(row);
    }

    let accepting: Vec<bool> = states.iter().map(|s| s.1).collect();
    let (table, accepting, initial) = minimize_table(&table, &accepting, 0);
    Ok(Dfa::from_table(alphabet, initial, accepting, &table))
}

/// Hopcroft partition refinement. Returns a renumbered table in breadth-first
/// order from the initial state, which becomes state 0.
pub fn minimize_table(
    table: &[Vec<StateId>],
    accepting: &[bool],
    initial: StateId,
) -> (Vec<Vec<StateId>>, Vec<bool>, StateId) {
    let n = table.len();
    let letters = table.first().map_or(0, Vec::len);

    // Restrict to reachable states.
    let mut reach = vec![false; n];
    reach[initial] = true;
    let mut stack = vec![initial];
    while let Some(s) = stack.pop() {
        for &t in &table[s] {
            if !reach[t] {
                reach[t] = true;
                stack.push(t);
            }
        }
    }

    let mut preimage: Vec<Vec<Vec<StateId>>> = vec![vec![Vec::new(); n]; letters];
    for s in (0..n).filter(|&s| reach[s]) {
        for (c, &t) in table[s].iter().enumerate() {
            preimage[c][t].push(s);
        }
    }

    let mut block_of = vec![usize::MAX; n];
    let mut blocks: Vec<Vec<StateId>> = Vec::new();
    for want in [true, false] {
        let members: Vec<StateId> = (0..n).filter(|&s| reach[s] && accepting[s] == want).collect();
        if !members.is_empty() {
            for &s in &members {
                block_of[s] = blocks.len();
            }
            blocks.push(members);
        }
    }
    let mut in_work = vec![true; blocks.len()];
    let mut work: VecDeque<usize> = (0..blocks.len()).collect();

    while let Some(a) = work.pop_front() {
        in_work[a] = false;
        let splitter: Vec<StateId> = blocks[a].clone();
        for pre_c in preimage.iter().take(letters) {
            let mut hit: HashMap<usize, Vec<StateId>> = HashMap::new();
            for &t in &splitter {
                for &s in &pre_c[t] {
                    hit.entry(block_of[s]).or_default().push(s);
                }
            }
            let mut touched: Vec<usize> = hit.keys().copied().collect();
            touched.sort_unstable();
            for y in touched {
                let mut xs = hit.remove(&y).unwrap();
                xs.sort_unstable();
                xs.dedup();
                if xs.len() == blocks[y].len() {
                    continue;
                }
                let rest: Vec<StateId> = blocks[y]
                    .iter()
                    .copied()
                    .filter(|s| xs.binary_search(s).is_err())
                    .collect();
                let new_id = blocks.len();
                for &s in &xs {
                    block_of[s] = new_id;
                }
                blocks[y] = rest;
                blocks.push(xs);
                in_work.push(false);
                if in_work[y] {
                    work.push_back(new_id);
                    in_work[new_id] = true;
                } else {
                    let smaller = if blocks[y].len() <= blocks[new_id].len() {
                        y
                    } else {
                        new_id
                    };
                    work.push_back(smaller);
                    in_work[smaller] = true;
                }
            }
        }
    }

    // Renumber blocks breadth-first from the initial block.
    let mut order = vec![usize::MAX; blocks.len()];
    let mut seq = Vec::new();
    let mut queue = VecDeque::from([block_of[initial]]);
    order[block_of[initial]] = 0;
    seq.push(block_of[initial]);
    while let Some(b) = queue.pop_front() {
        let rep = blocks[b][0];
        for &t in &table[rep] {
            let tb = block_of[t];
            if order[tb] == usize::MAX {
                order[tb] = seq.len();
                seq.push(tb);
                queue.push_back(tb);
            }
        }
    }
    let new_table = seq
        .iter()
        .map(|&b| {
            let rep = blocks[b][0];
            table[rep].iter().map(|&t| order[block_of[t]]).collect()
        })
        .collect();
    let new_acc = seq.iter().map(|&b| accepting[blocks[b][0]]).collect();
    (new_table, new_acc, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ltlf::parser::parse_unchecked;
    use crate::ltlf::semantics::eval_word;

    fn dfa(text: &str) -> Dfa {
        compile_to_dfa(&parse_unchecked(text).unwrap()).unwrap()
    }

    #[test]
    fn eventually_has_two_states() {
        let d = dfa("F a");
        assert_eq!(d.num_states(), 2);
        assert_eq!(d.accepting_states().count(), 1);
        assert!(!d.is_accepting(d.initial()));
        assert_eq!(d.step(d.initial(), Symbol(0)), d.initial());
        assert!(d.is_accepting(d.step(d.initial(), Symbol(1))));
    }

    #[test]
    fn falsum_is_single_sink() {
        let d = dfa("false");
        assert_eq!(d.num_states(), 1);
        assert!(!d.is_accepting(0));
        assert_eq!(d.transitions(0).len(), 1);
        assert_eq!(d.transitions(0)[0].guard, Guard::always());
    }

    #[test]
    fn reach_avoid_words() {
        let f = parse_unchecked("G !o & F a").unwrap();
        let d = compile_to_dfa(&f).unwrap();
        let al = d.alphabet().clone();
        let ok = [al.symbol([]), al.symbol(["a"])];
        let bad = [al.symbol(["o"]), al.symbol(["a"])];
        assert!(d.accepts(&ok));
        assert!(!d.accepts(&bad));
        assert_eq!(d.accepts(&ok), eval_word(&f, &al, &ok));
        assert_eq!(d.accepts(&bad), eval_word(&f, &al, &bad));
    }

    #[test]
    fn until_matches_oracle_exhaustively() {
        let f = parse_unchecked("a U b").unwrap();
        let d = compile_to_dfa(&f).unwrap();
        let al = d.alphabet().clone();
        let mut checked = 0;
        for len in 1..=5u32 {
            for code in 0..4u32.pow(len) {
                let w: Vec<Symbol> = (0..len).map(|k| Symbol(code >> (2 * k) & 3)).collect();
                assert_eq!(d.accepts(&w), eval_word(&f, &al, &w), "{w:?}");
                checked += 1;
            }
        }
        // 4 + 16 + 64 + 256 + 1024 words; the 1024 of length five are the headline count.
        assert_eq!(checked, 1364);
    }

    #[test]
    fn state_budget() {
        let f = parse_unchecked("F (a & X X X b)").unwrap();
        assert_eq!(
            compile_with_cap(&f, 2),
            Err(CompileError::StateBudget { cap: 2 })
        );
    }

    #[test]
    fn minimization_is_idempotent() {
        let d = dfa("G !o & F (a & F c) & F (b & F c)");
        let again = d.minimized();
        assert_eq!(d.num_states(), again.num_states());
        assert_eq!(d, again);
    }

    #[test]
    fn guards_partition_each_state() {
        let d = dfa("G !o & F (a & F c) & F (b & F c)");
        for q in 0..d.num_states() {
            for s in d.alphabet().letters() {
                assert_eq!(d.enabled_count(q, s), 1);
            }
        }
    }
}

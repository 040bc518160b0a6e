#![allow(dead_code)]

use std::collections::HashSet;
use std::path::PathBuf;

use rand::Rng;
use simba_core::ltlf::{Alphabet, Dfa, Ltlf, Symbol};

pub fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

pub const PHI: [&str; 5] = [
    "G (o1 & o2) & F a",
    "G (o1 & o2) & F (a & F c)",
    "G (o1 & o2) & F (a & F c) & F (b & F c)",
    "G (o1 & o2) & F (a & F (c & F (a & F c)))",
    "G (o1 & o2) & F (a & F (c & (F (a & F c) & F (b & F c)))) & F (b & F (c & (F (a & F c) & F (b & F c))))",
];

enum Node {
    True,
    False,
    Atom(Option<usize>),
    Not(usize),
    And(usize, usize),
    Or(usize, usize),
    Next(usize),
    Until(usize, usize),
    Eventually(usize),
    Globally(usize),
}

/// Subformulas in post-order; the last entry is the formula itself.
pub struct Flat(Vec<Node>);

impl Flat {
    pub fn new(f: &Ltlf, alphabet: &Alphabet) -> Self {
        let mut nodes = Vec::new();
        push(f, alphabet, &mut nodes);
        Flat(nodes)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    /// Truth of every subformula at position `i` given the letter there and
    /// the truth vector at `i + 1` (`None` at the last position).
    pub fn step(&self, letter: Symbol, next: Option<&[bool]>) -> Vec<bool> {
        let mut t = vec![false; self.0.len()];
        for (k, n) in self.0.iter().enumerate() {
            t[k] = match *n {
                Node::True => true,
                Node::False => false,
                Node::Atom(bit) => bit.is_some_and(|b| letter.has(b)),
                Node::Not(a) => !t[a],
                Node::And(a, b) => t[a] && t[b],
                Node::Or(a, b) => t[a] || t[b],
                Node::Next(a) => next.is_some_and(|n| n[a]),
                Node::Until(a, b) => t[b] || (t[a] && next.is_some_and(|n| n[k])),
                Node::Eventually(a) => t[a] || next.is_some_and(|n| n[k]),
                Node::Globally(a) => t[a] && next.is_none_or(|n| n[k]),
            };
        }
        t
    }

    /// Finite-trace satisfaction, evaluated right to left.
    pub fn holds(&self, word: &[Symbol]) -> bool {
        if word.is_empty() {
            return false;
        }
        let mut next: Option<Vec<bool>> = None;
        for &s in word.iter().rev() {
            next = Some(self.step(s, next.as_deref()));
        }
        *next.unwrap().last().unwrap()
    }
}

fn push(f: &Ltlf, alphabet: &Alphabet, out: &mut Vec<Node>) -> usize {
    let node = match f {
        Ltlf::True => Node::True,
        Ltlf::False => Node::False,
        Ltlf::Atom(name) => Node::Atom(alphabet.index_of(name)),
        Ltlf::Not(a) => Node::Not(push(a, alphabet, out)),
        Ltlf::And(a, b) => {
            let (x, y) = (push(a, alphabet, out), push(b, alphabet, out));
            Node::And(x, y)
        }
        Ltlf::Or(a, b) => {
            let (x, y) = (push(a, alphabet, out), push(b, alphabet, out));
            Node::Or(x, y)
        }
        Ltlf::Next(a) => Node::Next(push(a, alphabet, out)),
        Ltlf::Until(a, b) => {
            let (x, y) = (push(a, alphabet, out), push(b, alphabet, out));
            Node::Until(x, y)
        }
        Ltlf::Eventually(a) => Node::Eventually(push(a, alphabet, out)),
        Ltlf::Globally(a) => Node::Globally(push(a, alphabet, out)),
    };
    out.push(node);
    out.len() - 1
}

/// Every word over the DFA's alphabet with length in `1..=max_len`.
pub fn all_words(alphabet: &Alphabet, max_len: usize) -> Vec<Vec<Symbol>> {
    let letters: Vec<Symbol> = alphabet.letters().collect();
    let mut out = Vec::new();
    let mut layer: Vec<Vec<Symbol>> = vec![Vec::new()];
    for _ in 0..max_len {
        layer = layer
            .iter()
            .flat_map(|w| {
                letters.iter().map(move |&s| {
                    let mut v = w.clone();
                    v.push(s);
                    v
                })
            })
            .collect();
        out.extend(layer.iter().cloned());
    }
    out
}

/// Brute-force comparison over every word of length `1..=max_len`; returns
/// the number of disagreeing words.
pub fn mismatches_brute(dfa: &Dfa, formula: &Ltlf, max_len: usize) -> usize {
    let flat = Flat::new(formula, dfa.alphabet());
    all_words(dfa.alphabet(), max_len)
        .iter()
        .filter(|w| dfa.accepts(w) != flat.holds(w))
        .count()
}

/// Exhaustive comparison over every word of length `1..=max_len` without
/// enumerating them: a suffix is summarized by the set of DFA states that
/// accept it and by the truth of every subformula at its first position.
/// Both summaries extend leftward one letter at a time, so identical
/// summaries can be merged. Returns true when some word disagrees.
pub fn any_mismatch(dfa: &Dfa, formula: &Ltlf, max_len: usize) -> bool {
    let flat = Flat::new(formula, dfa.alphabet());
    let letters: Vec<Symbol> = dfa.alphabet().letters().collect();
    let n = dfa.num_states();
    let q0 = dfa.initial();
    let mut layer: HashSet<(Vec<bool>, Vec<bool>)> = HashSet::new();
    for &s in &letters {
        let acc: Vec<bool> = (0..n).map(|q| dfa.is_accepting(dfa.step(q, s))).collect();
        layer.insert((acc, flat.step(s, None)));
    }
    for depth in 1..=max_len {
        if layer.iter().any(|(acc, t)| acc[q0] != *t.last().unwrap()) {
            return true;
        }
        if depth == max_len {
            break;
        }
        let mut next = HashSet::new();
        for (acc, t) in &layer {
            for &s in &letters {
                let a: Vec<bool> = (0..n).map(|q| acc[dfa.step(q, s)]).collect();
                next.insert((a, flat.step(s, Some(t))));
            }
        }
        layer = next;
    }
    false
}

/// Random formula over `props` with nesting depth at most `depth`.
pub fn random_formula<R: Rng + ?Sized>(rng: &mut R, depth: usize, props: &[&str]) -> Ltlf {
    if depth == 0 || rng.random_bool(0.25) {
        return match rng.random_range(0..8) {
            0 => Ltlf::True,
            1 => Ltlf::False,
            _ => Ltlf::atom(props[rng.random_range(0..props.len())]),
        };
    }
    let sub = |rng: &mut R| random_formula(rng, depth - 1, props);
    match rng.random_range(0..8) {
        0 => Ltlf::not(sub(rng)),
        1 => Ltlf::and(sub(rng), sub(rng)),
        2 => Ltlf::or(sub(rng), sub(rng)),
        3 => Ltlf::next(sub(rng)),
        4 => Ltlf::until(sub(rng), sub(rng)),
        5 => Ltlf::eventually(sub(rng)),
        6 => Ltlf::globally(sub(rng)),
        _ => Ltlf::until(sub(rng), sub(rng)),
    }
}

use nalgebra::{DMatrix, DVector};
use simba_core::belief::{dlqr, BoxBounds, LinearGaussianSystem, MeasurementNoise};

/// Planar double integrator `(x, y, vx, vy)` with an LQR tracking gain and
/// position measurements of covariance `r` everywhere (or none).
pub fn double_integrator(dt: f64, q: f64, r: Option<f64>) -> LinearGaussianSystem {
    let mut a = DMatrix::identity(4, 4);
    a[(0, 2)] = dt;
    a[(1, 3)] = dt;
    let mut b = DMatrix::zeros(4, 2);
    b[(0, 0)] = 0.5 * dt * dt;
    b[(1, 1)] = 0.5 * dt * dt;
    b[(2, 0)] = dt;
    b[(3, 1)] = dt;
    let mut c = DMatrix::zeros(2, 4);
    c[(0, 0)] = 1.0;
    c[(1, 1)] = 1.0;
    let gain = dlqr(&a, &b, &DMatrix::identity(4, 4), &DMatrix::identity(2, 2)).unwrap();
    LinearGaussianSystem {
        a,
        b,
        c,
        d: DMatrix::zeros(2, 2),
        process_noise: DMatrix::from_diagonal(&DVector::from_vec(vec![q, q, 4.0 * q, 4.0 * q])),
        zones: Vec::new(),
        default_noise: match r {
            Some(r) => MeasurementNoise::Cov(DMatrix::identity(2, 2) * r),
            None => MeasurementNoise::Unavailable,
        },
        gain,
        input_bounds: BoxBounds::new(vec![-1e3, -1e3], vec![1e3, 1e3]),
        state_bounds: BoxBounds::new(vec![-1e3; 4], vec![1e3; 4]),
        dt,
        workspace: vec![0, 1],
    }
}

/// Sample second moment of `xs` about `center`.
pub fn moment_about(xs: &[DVector<f64>], center: &DVector<f64>) -> DMatrix<f64> {
    let n = center.len();
    let mut m = DMatrix::zeros(n, n);
    for x in xs {
        let d = x - center;
        m += &d * d.transpose();
    }
    m / xs.len() as f64
}

/// Random SPD matrix with eigenvalues in `[lo, hi]`.
pub fn random_spd<R: Rng + ?Sized>(rng: &mut R, n: usize, lo: f64, hi: f64) -> DMatrix<f64> {
    let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let q = m.qr().q();
    let d = DVector::from_fn(n, |_, _| rng.random_range(lo..hi));
    &q * DMatrix::from_diagonal(&d) * q.transpose()
}

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Whether a proposition asks for membership (`π`) or non-membership (`π̃`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Reach,
    Avoid,
}

/// A probabilistic atomic proposition bound to a named region.
///
/// A `Reach` proposition holds for a belief when `P(x ∈ region) > 1 - alpha`;
/// an `Avoid` proposition holds when `P(x ∉ region) >= 1 - alpha`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomicProp {
    pub name: String,
    pub region: String,
    pub alpha: f64,
    pub polarity: Polarity,
}

impl AtomicProp {
    /// Probability level the underlying event must reach.
    pub fn level(&self) -> f64 {
        1.0 - self.alpha
    }
}

/// Declared propositions, looked up by name.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PropTable {
    props: Vec<AtomicProp>,
}

impl PropTable {
    pub fn new(props: Vec<AtomicProp>) -> Self {
        Self { props }
    }

    pub fn get(&self, name: &str) -> Option<&AtomicProp> {
        self.props.iter().find(|p| p.name == name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.get(name).is_some()
    }

    pub fn iter(&self) -> impl Iterator<Item = &AtomicProp> {
        self.props.iter()
    }

    pub fn len(&self) -> usize {
        self.props.len()
    }

    pub fn is_empty(&self) -> bool {
        self.props.is_empty()
    }
}

/// LTLf syntax tree. `Eventually` and `Globally` are kept as nodes so that
/// printing stays readable; [`Ltlf::desugar`] rewrites them into `Until`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Ltlf {
    True,
    False,
    Atom(String),
    Not(Box<Ltlf>),
    And(Box<Ltlf>, Box<Ltlf>),
    Or(Box<Ltlf>, Box<Ltlf>),
    Next(Box<Ltlf>),
    Until(Box<Ltlf>, Box<Ltlf>),
    Eventually(Box<Ltlf>),
    Globally(Box<Ltlf>),
}

impl Ltlf {
    pub fn atom(name: &str) -> Self {
        Ltlf::Atom(name.to_string())
    }

    pub fn not(f: Ltlf) -> Self {
        Ltlf::Not(Box::new(f))
    }

    pub fn and(a: Ltlf, b: Ltlf) -> Self {
        Ltlf::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Ltlf, b: Ltlf) -> Self {
        Ltlf::Or(Box::new(a), Box::new(b))
    }

    pub fn next(f: Ltlf) -> Self {
        Ltlf::Next(Box::new(f))
    }

    pub fn until(a: Ltlf, b: Ltlf) -> Self {
        Ltlf::Until(Box::new(a), Box::new(b))
    }

    pub fn eventually(f: Ltlf) -> Self {
        Ltlf::Eventually(Box::new(f))
    }

    pub fn globally(f: Ltlf) -> Self {
        Ltlf::Globally(Box::new(f))
    }

    /// Rewrites derived operators: `F φ = true U φ`, `G φ = !F !φ`.
    pub fn desugar(&self) -> Ltlf {
        match self {
            Ltlf::True | Ltlf::False | Ltlf::Atom(_) => self.clone(),
            Ltlf::Not(a) => Ltlf::not(a.desugar()),
            Ltlf::And(a, b) => Ltlf::and(a.desugar(), b.desugar()),
            Ltlf::Or(a, b) => Ltlf::or(a.desugar(), b.desugar()),
            Ltlf::Next(a) => Ltlf::next(a.desugar()),
            Ltlf::Until(a, b) => Ltlf::until(a.desugar(), b.desugar()),
            Ltlf::Eventually(a) => Ltlf::until(Ltlf::True, a.desugar()),
            Ltlf::Globally(a) => {
                Ltlf::not(Ltlf::until(Ltlf::True, Ltlf::not(a.desugar())))
            }
        }
    }

    /// Names of all atoms, sorted and deduplicated.
    pub fn atoms(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms(&self, out: &mut BTreeSet<String>) {
        match self {
            Ltlf::True | Ltlf::False => {}
            Ltlf::Atom(n) => {
                out.insert(n.clone());
            }
            Ltlf::Not(a) | Ltlf::Next(a) | Ltlf::Eventually(a) | Ltlf::Globally(a) => {
                a.collect_atoms(out)
            }
            Ltlf::And(a, b) | Ltlf::Or(a, b) | Ltlf::Until(a, b) => {
                a.collect_atoms(out);
                b.collect_atoms(out);
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Ltlf::True | Ltlf::False | Ltlf::Atom(_) => 0,
            Ltlf::Not(a) | Ltlf::Next(a) | Ltlf::Eventually(a) | Ltlf::Globally(a) => {
                1 + a.depth()
            }
            Ltlf::And(a, b) | Ltlf::Or(a, b) | Ltlf::Until(a, b) => 1 + a.depth().max(b.depth()),
        }
    }
}

/// Prints in the parser's grammar. Binary operators are always parenthesized
/// so the output reparses to the same tree.
impl fmt::Display for Ltlf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ltlf::True => write!(f, "true"),
            Ltlf::False => write!(f, "false"),
            Ltlf::Atom(n) => write!(f, "{n}"),
            Ltlf::Not(a) => write!(f, "!{a}"),
            Ltlf::Next(a) => write!(f, "X {a}"),
            Ltlf::Eventually(a) => write!(f, "F {a}"),
            Ltlf::Globally(a) => write!(f, "G {a}"),
            Ltlf::And(a, b) => write!(f, "({a} & {b})"),
            Ltlf::Or(a, b) => write!(f, "({a} | {b})"),
            Ltlf::Until(a, b) => write!(f, "({a} U {b})"),
        }
    }
}

/// Ordered proposition names a compiled automaton reads. Bit `i` of a
/// [`Symbol`] refers to `names[i]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Alphabet {
    names: Vec<String>,
}

/// Hard cap on the number of propositions a single formula may mention.
pub const MAX_PROPS: usize = 16;

impl Alphabet {
    pub fn new(names: impl IntoIterator<Item = String>) -> Self {
        let set: BTreeSet<String> = names.into_iter().collect();
        Self {
            names: set.into_iter().collect(),
        }
    }

    pub fn of(formula: &Ltlf) -> Self {
        Self::new(formula.atoms())
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Number of distinct symbols, `2^|names|`.
    pub fn letter_count(&self) -> u32 {
        1u32 << self.names.len()
    }

    pub fn letters(&self) -> impl Iterator<Item = Symbol> {
        (0..self.letter_count()).map(Symbol)
    }

    /// Symbol whose true propositions are the given names; names outside the
    /// alphabet are ignored.
    pub fn symbol<'a>(&self, true_names: impl IntoIterator<Item = &'a str>) -> Symbol {
        let mut bits = 0u32;
        for n in true_names {
            if let Some(i) = self.index_of(n) {
                bits |= 1 << i;
            }
        }
        Symbol(bits)
    }

    pub fn true_names(&self, sym: Symbol) -> Vec<&str> {
        self.names
            .iter()
            .enumerate()
            .filter(|(i, _)| sym.has(*i))
            .map(|(_, n)| n.as_str())
            .collect()
    }

    pub fn format_symbol(&self, sym: Symbol) -> String {
        format!("{{{}}}", self.true_names(sym).join(","))
    }
}

/// A truth assignment over an [`Alphabet`], one bit per proposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Symbol(pub u32);

impl Symbol {
    pub fn has(self, index: usize) -> bool {
        self.0 >> index & 1 == 1
    }
}

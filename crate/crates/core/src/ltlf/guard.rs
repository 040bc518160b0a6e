use std::collections::{BTreeSet, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::ast::{Alphabet, Symbol};

/// Conjunction of literals: bits set in `mask` are constrained to the
/// matching bit of `value`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cube {
    pub mask: u32,
    pub value: u32,
}

impl Cube {
    pub fn matches(&self, sym: Symbol) -> bool {
        sym.0 & self.mask == self.value
    }
}

/// Boolean formula over an alphabet in disjunctive normal form.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Guard {
    cubes: Vec<Cube>,
}

impl Guard {
    pub fn never() -> Self {
        Self { cubes: Vec::new() }
    }

    pub fn always() -> Self {
        Self {
            cubes: vec![Cube { mask: 0, value: 0 }],
        }
    }

    pub fn cubes(&self) -> &[Cube] {
        &self.cubes
    }

    pub fn eval(&self, sym: Symbol) -> bool {
        self.cubes.iter().any(|c| c.matches(sym))
    }

    pub fn is_never(&self) -> bool {
        self.cubes.is_empty()
    }

    pub fn letters(&self, alphabet: &Alphabet) -> Vec<Symbol> {
        alphabet.letters().filter(|s| self.eval(*s)).collect()
    }

    /// Minimal-ish DNF covering exactly `letters` (Quine–McCluskey primes
    /// followed by a greedy cover).
    pub fn from_letters(letters: &[Symbol], num_props: usize) -> Self {
        let full = if num_props >= 32 {
            u32::MAX
        } else {
            (1u32 << num_props) - 1
        };
        let minterms: BTreeSet<u32> = letters.iter().map(|s| s.0 & full).collect();
        if minterms.is_empty() {
            return Self::never();
        }
        if minterms.len() as u64 == 1u64 << num_props {
            return Self::always();
        }

        let mut primes: BTreeSet<Cube> = BTreeSet::new();
        let mut layer: BTreeSet<Cube> = minterms
            .iter()
            .map(|&m| Cube { mask: full, value: m })
            .collect();
        while !layer.is_empty() {
            let mut merged: HashSet<Cube> = HashSet::new();
            let mut next: BTreeSet<Cube> = BTreeSet::new();
            let items: Vec<Cube> = layer.iter().copied().collect();
            for (i, a) in items.iter().enumerate() {
                for b in &items[i + 1..] {
                    if a.mask != b.mask {
                        continue;
                    }
                    let diff = a.value ^ b.value;
                    if diff.count_ones() == 1 {
                        next.insert(Cube {
                            mask: a.mask & !diff,
                            value: a.value & !diff,
                        });
                        merged.insert(*a);
                        merged.insert(*b);
                    }
                }
            }
            for c in &items {
                if !merged.contains(c) {
                    primes.insert(*c);
                }
            }
            layer = next;
        }

        let primes: Vec<Cube> = primes.into_iter().collect();
        let mut uncovered = minterms.clone();
        let mut chosen: Vec<Cube> = Vec::new();
        // Essential primes first.
        for &m in &minterms {
            let covering: Vec<&Cube> = primes.iter().filter(|p| m & p.mask == p.value).collect();
            if covering.len() == 1 && !chosen.contains(covering[0]) {
                chosen.push(*covering[0]);
            }
        }
        uncovered.retain(|&m| !chosen.iter().any(|p| m & p.mask == p.value));
        while !uncovered.is_empty() {
            let best = primes
                .iter()
                .max_by_key(|p| {
                    let n = uncovered.iter().filter(|&&m| m & p.mask == p.value).count();
                    // Prefer wider cubes, then a stable order.
                    (n, std::cmp::Reverse(p.mask.count_ones()), std::cmp::Reverse(**p))
                })
                .copied()
                .expect("primes cover all minterms");
            uncovered.retain(|&m| m & best.mask != best.value);
            chosen.push(best);
        }
        chosen.sort();
        Self { cubes: chosen }
    }

    pub fn and_not(&self, other: &Guard, alphabet: &Alphabet) -> Guard {
        let letters: Vec<Symbol> = alphabet
            .letters()
            .filter(|s| self.eval(*s) && !other.eval(*s))
            .collect();
        Guard::from_letters(&letters, alphabet.len())
    }

    pub fn or(&self, other: &Guard, alphabet: &Alphabet) -> Guard {
        let letters: Vec<Symbol> = alphabet
            .letters()
            .filter(|s| self.eval(*s) || other.eval(*s))
            .collect();
        Guard::from_letters(&letters, alphabet.len())
    }

    /// Renders as `a & !b | c`, with `true` / `false` for the constants.
    pub fn render(&self, alphabet: &Alphabet) -> String {
        if self.cubes.is_empty() {
            return "false".into();
        }
        let mut out = String::new();
        for (ci, cube) in self.cubes.iter().enumerate() {
            if ci > 0 {
                out.push_str(" | ");
            }
            if cube.mask == 0 {
                out.push_str("true");
                continue;
            }
            let mut first = true;
            for (i, name) in alphabet.names().iter().enumerate() {
                if cube.mask >> i & 1 == 0 {
                    continue;
                }
                if !first {
                    out.push_str(" & ");
                }
                first = false;
                if cube.value >> i & 1 == 0 {
                    out.push('!');
                }
                let _ = write!(out, "{name}");
            }
        }
        out
    }
}

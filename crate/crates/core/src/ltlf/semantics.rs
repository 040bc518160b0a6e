//! Direct finite-trace semantics. Slow, but a faithful reference for the
//! compiled automata.

use super::ast::{Alphabet, Ltlf, Symbol};

/// `word ⊨ formula` under LTLf semantics (strong next, finite traces).
/// An empty word satisfies nothing.
pub fn eval_word(formula: &Ltlf, alphabet: &Alphabet, word: &[Symbol]) -> bool {
    !word.is_empty() && holds(formula, alphabet, word, 0)
}

fn holds(f: &Ltlf, alpha: &Alphabet, w: &[Symbol], i: usize) -> bool {
    match f {
        Ltlf::True => true,
        Ltlf::False => false,
        Ltlf::Atom(n) => alpha.index_of(n).is_some_and(|k| w[i].has(k)),
        Ltlf::Not(a) => !holds(a, alpha, w, i),
        Ltlf::And(a, b) => holds(a, alpha, w, i) && holds(b, alpha, w, i),
        Ltlf::Or(a, b) => holds(a, alpha, w, i) || holds(b, alpha, w, i),
        Ltlf::Next(a) => i + 1 < w.len() && holds(a, alpha, w, i + 1),
        Ltlf::Until(a, b) => (i..w.len()).any(|j| {
            holds(b, alpha, w, j) && (i..j).all(|k| holds(a, alpha, w, k))
        }),
        Ltlf::Eventually(a) => (i..w.len()).any(|j| holds(a, alpha, w, j)),
        Ltlf::Globally(a) => (i..w.len()).all(|j| holds(a, alpha, w, j)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ltlf::parser::parse_unchecked;

    fn check(text: &str, word: &[&[&str]]) -> bool {
        let f = parse_unchecked(text).unwrap();
        let alpha = Alphabet::of(&f);
        let w: Vec<Symbol> = word.iter().map(|s| alpha.symbol(s.iter().copied())).collect();
        eval_word(&f, &alpha, &w)
    }

    #[test]
    fn eventually_late() {
        assert!(check("F a", &[&[], &[], &["a"]]));
    }

    #[test]
    fn globally_broken() {
        assert!(!check("G a", &[&["a"], &[]]));
    }

    #[test]
    fn next_needs_successor() {
        assert!(!check("X a", &[&["a"]]));
        assert!(check("X a", &[&[], &["a"]]));
    }

    #[test]
    fn weak_dual_of_next() {
        // !X !a holds on the last position.
        assert!(check("!X !a", &[&[]]));
    }

    #[test]
    fn derived_forms_agree_with_desugaring() {
        let f = parse_unchecked("G (a -> F b) & (a U b)").unwrap();
        let d = f.desugar();
        let alpha = Alphabet::of(&f);
        for len in 1..=4u32 {
            for code in 0..(4u32.pow(len)) {
                let w: Vec<Symbol> = (0..len).map(|k| Symbol(code >> (2 * k) & 3)).collect();
                assert_eq!(eval_word(&f, &alpha, &w), eval_word(&d, &alpha, &w));
            }
        }
    }

    #[test]
    fn empty_word_rejected() {
        let f = parse_unchecked("true").unwrap();
        assert!(!eval_word(&f, &Alphabet::of(&f), &[]));
    }
}

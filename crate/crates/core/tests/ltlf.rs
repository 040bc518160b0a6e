mod common;

use common::{any_mismatch, mismatches_brute, random_formula, Flat, PHI};
use graphviz_rust::dot_structures::{Attribute, Edge, EdgeTy, Graph, Id, Node, Stmt, Vertex};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use simba_core::ltlf::{compile_to_dfa, export_dot, parse_unchecked, Alphabet, Dfa, Symbol};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn random_formulas_match_oracle(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_formula(&mut rng, 4, &["a", "b", "c"]);
        prop_assume!(f.depth() <= 4);
        let dfa = compile_to_dfa(&f).unwrap();
        prop_assert_eq!(mismatches_brute(&dfa, &f, 5), 0, "formula {}", f);
    }
}

#[test]
fn benchmark_formulas_match_oracle_exhaustively() {
    for text in PHI {
        let f = parse_unchecked(text).unwrap();
        let dfa = compile_to_dfa(&f).unwrap();
        assert!(!any_mismatch(&dfa, &f, 5), "{text}");
    }
}

#[test]
fn summary_search_agrees_with_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let f = random_formula(&mut rng, 3, &["a", "b"]);
        let dfa = compile_to_dfa(&f).unwrap();
        assert_eq!(any_mismatch(&dfa, &f, 4), mismatches_brute(&dfa, &f, 4) > 0);
    }
    // A deliberately wrong automaton is caught.
    let f = parse_unchecked("G a").unwrap();
    let g = parse_unchecked("F a").unwrap();
    let dfa = compile_to_dfa(&g).unwrap();
    assert!(any_mismatch(&dfa, &f, 2));
}

#[test]
fn obstacle_then_goal() {
    let f = parse_unchecked("G !o & F a").unwrap();
    let dfa = compile_to_dfa(&f).unwrap();
    let al = dfa.alphabet().clone();
    let w = |sets: &[&[&str]]| -> Vec<Symbol> { sets.iter().map(|s| al.symbol(s.iter().copied())).collect() };
    assert!(dfa.accepts(&w(&[&[], &["a"]])));
    assert!(!dfa.accepts(&w(&[&["o"], &["a"]])));
    let flat = Flat::new(&f, &al);
    assert!(flat.holds(&w(&[&[], &["a"]])));
    assert!(!flat.holds(&w(&[&["o"], &["a"]])));
}

#[test]
fn exactly_one_guard_fires() {
    let f = parse_unchecked(PHI[4]).unwrap();
    let dfa = compile_to_dfa(&f).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..1000 {
        let q = rng.random_range(0..dfa.num_states());
        let s = Symbol(rng.random_range(0..dfa.alphabet().letter_count()));
        let fired = dfa.transitions(q).iter().filter(|t| t.guard.eval(s)).count();
        assert_eq!(fired, 1);
    }
}

fn id_text(id: &Id) -> String {
    match id {
        Id::Html(s) | Id::Plain(s) | Id::Anonymous(s) => s.clone(),
        Id::Escaped(s) => s.trim_matches('"').to_string(),
    }
}

fn attr(attrs: &[Attribute], key: &str) -> Option<String> {
    attrs.iter().find(|a| id_text(&a.0) == key).map(|a| id_text(&a.1))
}

fn state_index(id: &Id) -> usize {
    id_text(id).trim_start_matches('q').parse().unwrap()
}

/// Rebuilds a transition table from DOT text, evaluating each edge label
/// as a propositional formula over the alphabet.
fn dfa_from_dot(text: &str, alphabet: &Alphabet) -> Dfa {
    let Graph::DiGraph { stmts, .. } = graphviz_rust::parse(text).unwrap() else {
        panic!("expected a digraph");
    };
    let mut accepting = Vec::new();
    let mut initial = None;
    let mut edges = Vec::new();
    for stmt in &stmts {
        match stmt {
            Stmt::Node(Node { id, attributes }) => {
                let q = state_index(&id.0);
                if accepting.len() <= q {
                    accepting.resize(q + 1, false);
                }
                accepting[q] = attr(attributes, "shape").as_deref() == Some("doublecircle");
                if attr(attributes, "xlabel").as_deref() == Some("start") {
                    initial = Some(q);
                }
            }
            Stmt::Edge(Edge { ty: EdgeTy::Pair(Vertex::N(a), Vertex::N(b)), attributes }) => {
                let guard = parse_unchecked(&attr(attributes, "label").unwrap()).unwrap();
                edges.push((state_index(&a.0), state_index(&b.0), guard));
            }
            _ => {}
        }
    }
    let n = accepting.len();
    let mut table = vec![vec![usize::MAX; alphabet.letter_count() as usize]; n];
    for s in alphabet.letters() {
        for (from, to, guard) in &edges {
            if Flat::new(guard, alphabet).holds(&[s]) {
                assert_eq!(table[*from][s.0 as usize], usize::MAX, "overlapping guards");
                table[*from][s.0 as usize] = *to;
            }
        }
    }
    assert!(table.iter().flatten().all(|&t| t != usize::MAX), "guards not exhaustive");
    Dfa::from_table(alphabet.clone(), initial.unwrap(), accepting, &table)
}

#[test]
fn dot_round_trips_through_a_dot_parser() {
    for text in PHI {
        let f = parse_unchecked(text).unwrap();
        let dfa = compile_to_dfa(&f).unwrap();
        let back = dfa_from_dot(&export_dot(&dfa), dfa.alphabet());
        assert_eq!(back.num_states(), dfa.num_states());
        assert_eq!(back.initial(), dfa.initial());
        assert_eq!(back.table(), dfa.table(), "{text}");
        assert!((0..dfa.num_states()).all(|q| back.is_accepting(q) == dfa.is_accepting(q)));
    }
}

use std::fmt::Write as _;

use super::dfa::Dfa;

/// Graphviz rendering. Accepting states are double circles; the initial
/// state is drawn bold. One edge per (source, target) pair, labelled with
/// its guard.
pub fn export_dot(dfa: &Dfa) -> String {
    export_dot_named(dfa, "dfa", &[])
}

/// Like [`export_dot`], with a graph name and a set of states drawn dashed
/// (used for the rejecting sink of a pruned automaton).
pub fn export_dot_named(dfa: &Dfa, name: &str, dashed: &[usize]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "digraph {name} {{");
    let _ = writeln!(out, "  rankdir=LR;");
    for q in 0..dfa.num_states() {
        let shape = if dfa.is_accepting(q) {
            "doublecircle"
        } else {
            "circle"
        };
        let mut attrs = format!("shape={shape}");
        if q == dfa.initial() {
            attrs.push_str(", style=bold, xlabel=\"start\"");
        } else if dashed.contains(&q) {
            attrs.push_str(", style=dashed");
        }
        let _ = writeln!(out, "  q{q} [{attrs}];");
    }
    for q in 0..dfa.num_states() {
        for t in dfa.transitions(q) {
            let label = t.guard.render(dfa.alphabet()).replace('"', "\\\"");
            let _ = writeln!(out, "  q{q} -> q{} [label=\"{label}\"];", t.target);
        }
    }
    out.push_str("}\n");
    out
}

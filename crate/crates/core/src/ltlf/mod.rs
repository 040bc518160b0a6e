//! LTLf over probabilistic propositions: syntax, reference semantics, and
//! compilation to minimal DFAs with Boolean guards.

mod ast;
mod dfa;
mod dot;
mod guard;
mod parser;
mod semantics;

pub use ast::{Alphabet, AtomicProp, Ltlf, Polarity, PropTable, Symbol, MAX_PROPS};
pub use dfa::{
    compile_to_dfa, compile_with_cap, minimize_table, CompileError, Dfa, StateId, Transition,
    DEFAULT_STATE_CAP,
};
pub use dot::{export_dot, export_dot_named};
pub use guard::{Cube, Guard};
pub use parser::{parse_formula, parse_unchecked, ParseError};
pub use semantics::eval_word;

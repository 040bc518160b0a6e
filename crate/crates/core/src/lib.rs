//! Multi-layer belief-space motion planning for LTLf tasks.
//!
//! A formula over probabilistic region propositions is compiled to a
//! minimal DFA ([`ltlf`]), letters that the region geometry makes impossible
//! are pruned and a weighted task plan is chosen ([`task`]), a cheap
//! simplified model proposes a guide path ([`guide`]), and a hybrid tree of
//! Gaussian beliefs annotated with automaton states searches for a nominal
//! plan of the full linear-Gaussian system ([`tree`]). [`planner`] runs the
//! epoch loop and the Monte-Carlo validator; [`scenario`] holds the JSON
//! input format.

pub mod belief;
pub mod geometry;
pub mod guide;
pub mod ltlf;
pub mod planner;
pub mod scenario;
pub mod task;
pub mod tree;

//! symik: closed-form symbolic inverse kinematics for serial chains.
//!
//! Pipeline: a robot description (modified-DH rows) is turned into a symbolic
//! forward-kinematics model, a family of matrix equations is extracted, a
//! behavior-tree-driven solver assigns closed-form expressions to every joint
//! variable, the branch structure is collected into a solution graph, and the
//! result is verified numerically and emitted as LaTeX / Python / C++ / DOT /
//! JSON artifacts.

pub mod bt;
pub mod emit;
pub mod expr;
pub mod graph;
#[cfg(test)]
pub(crate) mod fixtures;
pub mod kinematics;
pub mod numeric;
pub mod parse;
pub mod pipeline;
pub mod rewrite;
pub mod robotfile;
pub mod solvers;
pub mod verify;

pub use expr::{canon, match_linear, match_trig_linear, print_expr, substitute_syms, Expr, Sym, SymbolKind};

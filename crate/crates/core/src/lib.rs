//! polycheck: a compiler and verifier for a restricted Python-like
//! string-transformation language.
//!
//! The pipeline: parse and type-check high-level for-programs, compile them
//! through simple for-programs into symbolic first-order string-to-string
//! interpretations, and decide first-order Hoare triples by pulling the
//! postcondition back through the interpretation and discharging the
//! resulting formula on finite words to external solvers or a built-in
//! bounded checker.

pub mod ast;
pub mod backends;
pub mod diag;
pub mod fo;
pub mod hl_interp;
pub mod interp_compile;
pub mod nested;
pub mod parser;
pub mod pullback;
pub mod rewrite;
pub mod simple;
pub mod spec_dsl;
pub mod typecheck;

pub use diag::{Error, Result};

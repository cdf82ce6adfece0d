//! A small exact-arithmetic SMT solver for quantifier-free linear real and
//! integer arithmetic, speaking the SMT-LIB2 command language over stdio.
//!
//! All reasoning is done with arbitrary-precision rationals; strict
//! inequalities are handled symbolically with an infinitesimal, and integer
//! constraints by branch and bound on top of the real relaxation. Formulas
//! outside the supported fragment (quantifiers, nonlinear terms) yield
//! `unknown` rather than a wrong answer.

pub mod sexp;
pub mod simplex;
pub mod solver;
pub mod term;

pub use solver::{run_script, CheckResult, Context, Outcome};

//! Synthesis and checking of piecewise linear quantitative invariants
//! for single-loop probabilistic programs.
//!
//! The crate is organized around exact rational arithmetic end to end:
//! programs, expectations, invariants, and Markov chain values are all
//! manipulated as arbitrary precision rationals, and every logical check
//! goes through an SMT solver speaking SMT-LIB2 over linear integer and
//! real arithmetic.

pub mod cegis;
pub mod expect;
pub mod linalg;
pub mod normalize;
pub mod oracle;
pub mod parser;
pub mod refine;
pub mod wp;
pub mod scalar;
pub mod smt;
pub mod syntax;

pub use scalar::{Rat, Scalar};

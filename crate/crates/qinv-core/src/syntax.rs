//! Abstract syntax for single-loop probabilistic programs over natural
//! numbered variables, plus program states and exact evaluation.

use std::collections::HashMap;
use std::fmt;

use num::BigInt;

use crate::scalar::Rat;

pub type VarId = usize;

/// Declared program variables with optional inclusive bounds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decls {
    names: Vec<String>,
    bounds: Vec<(u64, Option<u64>)>,
    index: HashMap<String, VarId>,
}

impl Decls {
    pub fn new() -> Self {
        Decls { names: Vec::new(), bounds: Vec::new(), index: HashMap::new() }
    }

    pub fn declare(&mut self, name: &str, lo: u64, hi: Option<u64>) -> Result<VarId, String> {
        if self.index.contains_key(name) {
            return Err(format!("variable declared twice: {name}"));
        }
        if let Some(h) = hi {
            if h < lo {
                return Err(format!("empty range for {name}: [{lo},{h}]"));
            }
        }
        let id = self.names.len();
        self.names.push(name.to_string());
        self.bounds.push((lo, hi));
        self.index.insert(name.to_string(), id);
        Ok(id)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, v: VarId) -> &str {
        &self.names[v]
    }

    pub fn bounds(&self, v: VarId) -> (u64, Option<u64>) {
        self.bounds[v]
    }

    pub fn lookup(&self, name: &str) -> Option<VarId> {
        self.index.get(name).copied()
    }

    pub fn ids(&self) -> impl Iterator<Item = VarId> {
        0..self.names.len()
    }

    /// A program is finite-state when every variable has an upper bound.
    pub fn all_bounded(&self) -> bool {
        self.bounds.iter().all(|(_, hi)| hi.is_some())
    }
}

impl Default for Decls {
    fn default() -> Self {
        Decls::new()
    }
}

/// Program arithmetic: naturals with scaling, sum, and difference.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Const(u64),
    Var(VarId),
    Scale(u64, Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
}

impl Expr {
    /// Exact value at a state; intermediate results may dip below zero
    /// (e.g. inside guard comparisons), hence the signed result.
    pub fn eval(&self, s: &State) -> i128 {
        match self {
            Expr::Const(z) => *z as i128,
            Expr::Var(x) => s.0[*x] as i128,
            Expr::Scale(z, e) => (*z as i128) * e.eval(s),
            Expr::Add(a, b) => a.eval(s) + b.eval(s),
            Expr::Sub(a, b) => a.eval(s) - b.eval(s),
        }
    }
}

/// Loop guards: strict comparison, negation, conjunction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Guard {
    Lt(Expr, Expr),
    Not(Box<Guard>),
    And(Box<Guard>, Box<Guard>),
}

impl Guard {
    pub fn holds(&self, s: &State) -> bool {
        match self {
            Guard::Lt(a, b) => a.eval(s) < b.eval(s),
            Guard::Not(g) => !g.holds(s),
            Guard::And(a, b) => a.holds(s) && b.holds(s),
        }
    }

    pub fn not(self) -> Guard {
        Guard::Not(Box::new(self))
    }

    pub fn and(self, other: Guard) -> Guard {
        Guard::And(Box::new(self), Box::new(other))
    }
}

/// Loop-free statements. Probabilistic choice carries an exact rational
/// probability for the left branch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Stmt {
    Skip,
    Assign(VarId, Expr),
    Seq(Box<Stmt>, Box<Stmt>),
    Choice(Box<Stmt>, Rat, Box<Stmt>),
    If(Guard, Box<Stmt>, Box<Stmt>),
}

/// A single probabilistic loop: declarations, guard, loop-free body.
/// Categorical assignments are desugared into nested binary choices at
/// parse time; the printer reconstructs the sugar from that shape.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopProgram {
    pub decls: Decls,
    pub guard: Guard,
    pub body: Stmt,
}

/// Total assignment of naturals to the declared variables, stored in
/// declaration order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct State(pub Vec<u64>);

impl State {
    pub fn get(&self, v: VarId) -> u64 {
        self.0[v]
    }

    pub fn set(&self, v: VarId, value: u64) -> State {
        let mut next = self.clone();
        next.0[v] = value;
        next
    }

    pub fn rat(&self, v: VarId) -> Rat {
        Rat::from_integer(BigInt::from(self.0[v]))
    }

    /// Manhattan distance between two states.
    pub fn distance(&self, other: &State) -> u64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| a.abs_diff(*b))
            .sum()
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, ")")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expr_evaluation_is_signed_inside() {
        let mut d = Decls::new();
        let x = d.declare("x", 0, Some(10)).unwrap();
        let s = State(vec![3]);
        // x - 5 evaluates below zero inside a comparison
        let e = Expr::Sub(Box::new(Expr::Var(x)), Box::new(Expr::Const(5)));
        assert_eq!(e.eval(&s), -2);
        let g = Guard::Lt(e, Expr::Const(0));
        assert!(g.holds(&s));
    }

    #[test]
    fn manhattan_distance() {
        let a = State(vec![0, 0]);
        let b = State(vec![9, 7_999_999]);
        assert_eq!(a.distance(&b), 8_000_008);
    }
}

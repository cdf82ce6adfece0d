//! Piecewise linear expectations and their template form.
//!
//! An expectation maps program states to extended rationals. We represent
//! them as guarded sums or as partitioned piecewise functions whose bodies
//! are affine in the program variables. In template form, the rational
//! coefficients are replaced by affine combinations of template variables,
//! and guard atoms may mention template variables as interval boundaries.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num::BigInt;
use num_traits::{One, Signed, Zero};

use crate::scalar::{display_rat, Rat};
use crate::syntax::{Decls, Expr, Guard, State, VarId};

pub type TVarId = usize;

/// Canonical display name for a template variable.
pub fn tvar_name(t: TVarId) -> String {
    format!("t{t}")
}

/// An affine form `q0 + q1*t_i + q2*t_j + ...` over template variables
/// with exact rational coefficients.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct TCoeff {
    pub constant: Rat,
    pub lin: BTreeMap<TVarId, Rat>,
}

impl TCoeff {
    pub fn constant(q: Rat) -> Self {
        TCoeff { constant: q, lin: BTreeMap::new() }
    }

    pub fn zero() -> Self {
        TCoeff::constant(Rat::zero())
    }

    pub fn one() -> Self {
        TCoeff::constant(Rat::one())
    }

    pub fn tvar(t: TVarId) -> Self {
        let mut lin = BTreeMap::new();
        lin.insert(t, Rat::one());
        TCoeff { constant: Rat::zero(), lin }
    }

    pub fn is_zero(&self) -> bool {
        self.constant.is_zero() && self.lin.is_empty()
    }

    pub fn is_concrete(&self) -> bool {
        self.lin.is_empty()
    }

    pub fn add(&self, other: &TCoeff) -> TCoeff {
        let mut out = self.clone();
        out.constant += &other.constant;
        for (t, q) in &other.lin {
            let entry = out.lin.entry(*t).or_insert_with(Rat::zero);
            *entry += q;
            if entry.is_zero() {
                out.lin.remove(t);
            }
        }
        out
    }

    pub fn sub(&self, other: &TCoeff) -> TCoeff {
        self.add(&other.scale(&-Rat::one()))
    }

    pub fn scale(&self, q: &Rat) -> TCoeff {
        if q.is_zero() {
            return TCoeff::zero();
        }
        TCoeff {
            constant: &self.constant * q,
            lin: self.lin.iter().map(|(t, c)| (*t, c * q)).collect(),
        }
    }

    /// Value under a template variable valuation; every mentioned
    /// template variable must be assigned.
    pub fn value(&self, v: &Valuation) -> Rat {
        let mut acc = self.constant.clone();
        for (t, q) in &self.lin {
            acc += q * v.get(*t);
        }
        acc
    }

    pub fn tvars(&self, out: &mut BTreeSet<TVarId>) {
        out.extend(self.lin.keys().copied());
    }
}

impl fmt::Display for TCoeff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut wrote = false;
        if !self.constant.is_zero() || self.lin.is_empty() {
            write!(f, "{}", display_rat(&self.constant))?;
            wrote = true;
        }
        for (t, q) in &self.lin {
            if wrote {
                if q.is_negative() {
                    write!(f, " - {}", coeff_prefix(&-q.clone()))?;
                } else {
                    write!(f, " + {}", coeff_prefix(q))?;
                }
            } else {
                if q.is_negative() {
                    write!(f, "-{}", coeff_prefix(&-q.clone()))?;
                } else {
                    write!(f, "{}", coeff_prefix(q))?;
                }
                wrote = true;
            }
            write!(f, "{}", tvar_name(*t))?;
        }
        Ok(())
    }
}

fn coeff_prefix(q: &Rat) -> String {
    if q.is_one() {
        String::new()
    } else {
        format!("{}*", display_rat(q))
    }
}

/// An affine form over program variables whose coefficients are [`TCoeff`]s:
/// `k + c_1*x_1 + ... + c_n*x_n`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct LinExp {
    pub k: TCoeff,
    pub coeffs: BTreeMap<VarId, TCoeff>,
}

impl LinExp {
    pub fn constant(k: TCoeff) -> Self {
        LinExp { k, coeffs: BTreeMap::new() }
    }

    pub fn rat(q: Rat) -> Self {
        LinExp::constant(TCoeff::constant(q))
    }

    pub fn zero() -> Self {
        LinExp::rat(Rat::zero())
    }

    pub fn var(x: VarId) -> Self {
        let mut coeffs = BTreeMap::new();
        coeffs.insert(x, TCoeff::one());
        LinExp { k: TCoeff::zero(), coeffs }
    }

    pub fn tvar(t: TVarId) -> Self {
        LinExp::constant(TCoeff::tvar(t))
    }

    pub fn is_zero(&self) -> bool {
        self.k.is_zero() && self.coeffs.is_empty()
    }

    pub fn is_concrete(&self) -> bool {
        self.k.is_concrete() && self.coeffs.values().all(TCoeff::is_concrete)
    }

    pub fn add(&self, other: &LinExp) -> LinExp {
        let mut out = self.clone();
        out.k = out.k.add(&other.k);
        for (x, c) in &other.coeffs {
            let merged = match out.coeffs.get(x) {
                Some(mine) => mine.add(c),
                None => c.clone(),
            };
            if merged.is_zero() {
                out.coeffs.remove(x);
            } else {
                out.coeffs.insert(*x, merged);
            }
        }
        out
    }

    pub fn sub(&self, other: &LinExp) -> LinExp {
        self.add(&other.scale(&-Rat::one()))
    }

    pub fn scale(&self, q: &Rat) -> LinExp {
        if q.is_zero() {
            return LinExp::zero();
        }
        LinExp {
            k: self.k.scale(q),
            coeffs: self.coeffs.iter().map(|(x, c)| (*x, c.scale(q))).collect(),
        }
    }

    /// Converts program arithmetic into an affine form. Program expressions
    /// are affine by construction.
    pub fn from_expr(e: &Expr) -> LinExp {
        match e {
            Expr::Const(z) => LinExp::rat(Rat::from_integer(BigInt::from(*z))),
            Expr::Var(x) => LinExp::var(*x),
            Expr::Scale(z, inner) => {
                LinExp::from_expr(inner).scale(&Rat::from_integer(BigInt::from(*z)))
            }
            Expr::Add(a, b) => LinExp::from_expr(a).add(&LinExp::from_expr(b)),
            Expr::Sub(a, b) => LinExp::from_expr(a).sub(&LinExp::from_expr(b)),
        }
    }

    /// Substitutes program expression `e` for variable `x`.
    pub fn substitute(&self, x: VarId, e: &Expr) -> LinExp {
        match self.coeffs.get(&x) {
            None => self.clone(),
            Some(c) => {
                let c = c.clone();
                let mut out = self.clone();
                out.coeffs.remove(&x);
                // c must multiply the substituted affine form; since e is
                // concrete in the program variables, each of its rational
                // coefficients just scales c.
                let sub = LinExp::from_expr(e);
                out.k = out.k.add(&c.scale(&sub.k.constant));
                for (y, yc) in &sub.coeffs {
                    let add = c.scale(&yc.constant);
                    let merged = match out.coeffs.get(y) {
                        Some(mine) => mine.add(&add),
                        None => add,
                    };
                    if merged.is_zero() {
                        out.coeffs.remove(y);
                    } else {
                        out.coeffs.insert(*y, merged);
                    }
                }
                out
            }
        }
    }

    /// Fixes the program variables, leaving an affine form over template
    /// variables only.
    pub fn at_state(&self, s: &State) -> TCoeff {
        let mut acc = self.k.clone();
        for (x, c) in &self.coeffs {
            acc = acc.add(&c.scale(&s.rat(*x)));
        }
        acc
    }

    /// Fixes the template variables, leaving concrete rational coefficients.
    pub fn instantiate(&self, v: &Valuation) -> LinExp {
        LinExp {
            k: TCoeff::constant(self.k.value(v)),
            coeffs: self
                .coeffs
                .iter()
                .filter_map(|(x, c)| {
                    let q = c.value(v);
                    if q.is_zero() {
                        None
                    } else {
                        Some((*x, TCoeff::constant(q)))
                    }
                })
                .collect(),
        }
    }

    /// Exact value for a fully concrete form.
    pub fn eval(&self, s: &State) -> Rat {
        debug_assert!(self.is_concrete());
        let mut acc = self.k.constant.clone();
        for (x, c) in &self.coeffs {
            acc += &c.constant * s.rat(*x);
        }
        acc
    }

    pub fn tvars(&self, out: &mut BTreeSet<TVarId>) {
        self.k.tvars(out);
        for c in self.coeffs.values() {
            c.tvars(out);
        }
    }

    pub fn display(&self, decls: &Decls) -> String {
        let mut parts: Vec<String> = Vec::new();
        for (x, c) in &self.coeffs {
            let name = decls.name(*x);
            if c.is_concrete() {
                if c.constant.is_one() {
                    parts.push(name.to_string());
                } else {
                    parts.push(format!("{}*{}", display_rat(&c.constant), name));
                }
            } else {
                parts.push(format!("({})*{}", c, name));
            }
        }
        if !self.k.is_zero() || parts.is_empty() {
            if self.k.is_concrete() {
                parts.push(display_rat(&self.k.constant));
            } else {
                parts.push(format!("({})", self.k));
            }
        }
        parts.join(" + ")
    }
}

/// Boolean combinations of strict inequalities between affine forms.
/// Atoms are kept as `lhs < rhs`; non-strict and equality comparisons from
/// the surface syntax are expressed through negation and conjunction.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum BoolExpr {
    True,
    False,
    Lt(LinExp, LinExp),
    Not(Box<BoolExpr>),
    And(Box<BoolExpr>, Box<BoolExpr>),
}

impl BoolExpr {
    pub fn not(self) -> BoolExpr {
        match self {
            BoolExpr::True => BoolExpr::False,
            BoolExpr::False => BoolExpr::True,
            BoolExpr::Not(inner) => *inner,
            other => BoolExpr::Not(Box::new(other)),
        }
    }

    pub fn and(self, other: BoolExpr) -> BoolExpr {
        match (self, other) {
            (BoolExpr::True, b) => b,
            (a, BoolExpr::True) => a,
            (BoolExpr::False, _) | (_, BoolExpr::False) => BoolExpr::False,
            (a, b) => BoolExpr::And(Box::new(a), Box::new(b)),
        }
    }

    /// Non-strict comparison `a <= b`, encoded as `!(b < a)`.
    pub fn le(a: LinExp, b: LinExp) -> BoolExpr {
        BoolExpr::Lt(b, a).not()
    }

    /// Equality `a = b`, encoded as `!(a < b) & !(b < a)`.
    pub fn eq(a: LinExp, b: LinExp) -> BoolExpr {
        BoolExpr::le(a.clone(), b.clone()).and(BoolExpr::le(b, a))
    }

    pub fn from_guard(g: &Guard) -> BoolExpr {
        match g {
            Guard::Lt(a, b) => BoolExpr::Lt(LinExp::from_expr(a), LinExp::from_expr(b)),
            Guard::Not(inner) => BoolExpr::from_guard(inner).not(),
            Guard::And(a, b) => BoolExpr::from_guard(a).and(BoolExpr::from_guard(b)),
        }
    }

    pub fn is_concrete(&self) -> bool {
        match self {
            BoolExpr::True | BoolExpr::False => true,
            BoolExpr::Lt(a, b) => a.is_concrete() && b.is_concrete(),
            BoolExpr::Not(inner) => inner.is_concrete(),
            BoolExpr::And(a, b) => a.is_concrete() && b.is_concrete(),
        }
    }

    pub fn substitute(&self, x: VarId, e: &Expr) -> BoolExpr {
        match self {
            BoolExpr::True => BoolExpr::True,
            BoolExpr::False => BoolExpr::False,
            BoolExpr::Lt(a, b) => BoolExpr::Lt(a.substitute(x, e), b.substitute(x, e)),
            BoolExpr::Not(inner) => BoolExpr::Not(Box::new(inner.substitute(x, e))),
            BoolExpr::And(a, b) => {
                BoolExpr::And(Box::new(a.substitute(x, e)), Box::new(b.substitute(x, e)))
            }
        }
    }

    pub fn instantiate(&self, v: &Valuation) -> BoolExpr {
        match self {
            BoolExpr::True => BoolExpr::True,
            BoolExpr::False => BoolExpr::False,
            BoolExpr::Lt(a, b) => BoolExpr::Lt(a.instantiate(v), b.instantiate(v)),
            BoolExpr::Not(inner) => BoolExpr::Not(Box::new(inner.instantiate(v))),
            BoolExpr::And(a, b) => {
                BoolExpr::And(Box::new(a.instantiate(v)), Box::new(b.instantiate(v)))
            }
        }
    }

    /// Truth value for a fully concrete guard.
    pub fn holds(&self, s: &State) -> bool {
        match self {
            BoolExpr::True => true,
            BoolExpr::False => false,
            BoolExpr::Lt(a, b) => a.eval(s) < b.eval(s),
            BoolExpr::Not(inner) => !inner.holds(s),
            BoolExpr::And(a, b) => a.holds(s) && b.holds(s),
        }
    }

    pub fn tvars(&self, out: &mut BTreeSet<TVarId>) {
        match self {
            BoolExpr::True | BoolExpr::False => {}
            BoolExpr::Lt(a, b) => {
                a.tvars(out);
                b.tvars(out);
            }
            BoolExpr::Not(inner) => inner.tvars(out),
            BoolExpr::And(a, b) => {
                a.tvars(out);
                b.tvars(out);
            }
        }
    }

    /// Flattens a conjunction into its conjuncts.
    pub fn conjuncts(&self) -> Vec<&BoolExpr> {
        fn walk<'a>(b: &'a BoolExpr, out: &mut Vec<&'a BoolExpr>) {
            match b {
                BoolExpr::And(x, y) => {
                    walk(x, out);
                    walk(y, out);
                }
                other => out.push(other),
            }
        }
        let mut out = Vec::new();
        walk(self, &mut out);
        out
    }

    /// Cheap contradiction check on a conjunction: `false` among the
    /// conjuncts, a complementary pair, or a negated conjunction whose
    /// parts are all asserted positively. No solver involved; sound but
    /// incomplete.
    pub fn syntactically_false(&self) -> bool {
        if *self == BoolExpr::False {
            return true;
        }
        let parts = self.conjuncts();
        for (i, x) in parts.iter().enumerate() {
            if **x == BoolExpr::False {
                return true;
            }
            for y in &parts[i + 1..] {
                if (*x).clone().not() == **y {
                    return true;
                }
            }
            if let BoolExpr::Not(inner) = x {
                let sub = inner.conjuncts();
                if sub.iter().all(|s| parts.iter().any(|p| p == s)) {
                    return true;
                }
            }
        }
        false
    }

    /// Flattens into literals: positive or negated strict atoms. Returns
    /// `None` when the expression is not a pure conjunction of literals.
    pub fn literals(&self) -> Option<Vec<Literal>> {
        let mut out = Vec::new();
        if self.collect_literals(false, &mut out) {
            Some(out)
        } else {
            None
        }
    }

    fn collect_literals(&self, negated: bool, out: &mut Vec<Literal>) -> bool {
        match self {
            BoolExpr::True => !negated,
            BoolExpr::False => negated,
            BoolExpr::Lt(a, b) => {
                out.push(Literal { lhs: a.clone(), rhs: b.clone(), negated });
                true
            }
            BoolExpr::Not(inner) => inner.collect_literals(!negated, out),
            BoolExpr::And(a, b) => {
                if negated {
                    // a negated conjunction is a disjunction, not a literal list
                    false
                } else {
                    a.collect_literals(false, out) && b.collect_literals(false, out)
                }
            }
        }
    }

    pub fn display(&self, decls: &Decls) -> String {
        match self {
            BoolExpr::True => "true".to_string(),
            BoolExpr::False => "false".to_string(),
            BoolExpr::Lt(a, b) => format!("{} < {}", a.display(decls), b.display(decls)),
            BoolExpr::Not(inner) => match inner.as_ref() {
                // print !(b < a) as a <= b for readability
                BoolExpr::Lt(b, a) => format!("{} <= {}", a.display(decls), b.display(decls)),
                other => format!("!({})", other.display(decls)),
            },
            BoolExpr::And(a, b) => {
                format!("({}) & ({})", a.display(decls), b.display(decls))
            }
        }
    }
}

/// A guard literal: `lhs < rhs`, possibly negated (i.e. `rhs <= lhs`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Literal {
    pub lhs: LinExp,
    pub rhs: LinExp,
    pub negated: bool,
}

impl Literal {
    pub fn to_bool(&self) -> BoolExpr {
        let atom = BoolExpr::Lt(self.lhs.clone(), self.rhs.clone());
        if self.negated {
            atom.not()
        } else {
            atom
        }
    }

    /// Two literals are syntactically complementary when they share the
    /// same atom with opposite polarity.
    pub fn complements(&self, other: &Literal) -> bool {
        self.negated != other.negated && self.lhs == other.lhs && self.rhs == other.rhs
    }
}

/// Piece body: an affine form or plus infinity.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Body {
    Fin(LinExp),
    Inf,
}

impl Body {
    pub fn is_concrete(&self) -> bool {
        match self {
            Body::Fin(e) => e.is_concrete(),
            Body::Inf => true,
        }
    }

    pub fn display(&self, decls: &Decls) -> String {
        match self {
            Body::Fin(e) => e.display(decls),
            Body::Inf => "INF".to_string(),
        }
    }
}

/// Extended rational value of an expectation at a state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Val {
    Fin(Rat),
    Inf,
}

impl Val {
    pub fn display(&self) -> String {
        match self {
            Val::Fin(q) => display_rat(q),
            Val::Inf => "INF".to_string(),
        }
    }
}

impl PartialOrd for Val {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        use std::cmp::Ordering::*;
        match (self, other) {
            (Val::Fin(a), Val::Fin(b)) => a.partial_cmp(b),
            (Val::Fin(_), Val::Inf) => Some(Less),
            (Val::Inf, Val::Fin(_)) => Some(Greater),
            (Val::Inf, Val::Inf) => Some(Equal),
        }
    }
}

/// One piece of a partitioned expectation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Piece {
    pub guard: BoolExpr,
    pub body: Body,
}

/// A piecewise linear expectation whose guards form a partition of the
/// state space. Pieces are kept in a canonical order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Piecewise {
    pub pieces: Vec<Piece>,
}

impl Piecewise {
    /// The constant expectation with the given value everywhere.
    pub fn constant(v: Val) -> Piecewise {
        let body = match v {
            Val::Fin(q) => Body::Fin(LinExp::rat(q)),
            Val::Inf => Body::Inf,
        };
        Piecewise { pieces: vec![Piece { guard: BoolExpr::True, body }] }
    }

    pub fn is_concrete(&self) -> bool {
        self.pieces
            .iter()
            .all(|p| p.guard.is_concrete() && p.body.is_concrete())
    }

    /// Evaluates a fully concrete expectation. Panics via debug assertion
    /// if no piece matches; partitions always match exactly one piece.
    pub fn eval(&self, s: &State) -> Val {
        for p in &self.pieces {
            if p.guard.holds(s) {
                return match &p.body {
                    Body::Fin(e) => Val::Fin(e.eval(s)),
                    Body::Inf => Val::Inf,
                };
            }
        }
        debug_assert!(false, "partition has no piece for state {s}");
        Val::Fin(Rat::zero())
    }

    pub fn instantiate(&self, v: &Valuation) -> Piecewise {
        Piecewise {
            pieces: self
                .pieces
                .iter()
                .map(|p| Piece {
                    guard: p.guard.instantiate(v),
                    body: match &p.body {
                        Body::Fin(e) => Body::Fin(e.instantiate(v)),
                        Body::Inf => Body::Inf,
                    },
                })
                .collect(),
        }
    }

    pub fn tvars(&self) -> BTreeSet<TVarId> {
        let mut out = BTreeSet::new();
        for p in &self.pieces {
            p.guard.tvars(&mut out);
            if let Body::Fin(e) = &p.body {
                e.tvars(&mut out);
            }
        }
        out
    }

    /// True when no guard mentions a template variable, i.e. the partition
    /// is fixed and only coefficients are synthesized.
    pub fn fixed_partition(&self) -> bool {
        let mut out = BTreeSet::new();
        for p in &self.pieces {
            p.guard.tvars(&mut out);
        }
        out.is_empty()
    }

    /// Canonical ordering of pieces so structurally equal expectations
    /// compare equal.
    pub fn sort_pieces(&mut self) {
        self.pieces.sort_by(|a, b| {
            (&a.guard, &a.body)
                .partial_cmp(&(&b.guard, &b.body))
                .unwrap_or(std::cmp::Ordering::Equal)
        });
    }

    pub fn display(&self, decls: &Decls) -> String {
        self.pieces
            .iter()
            .map(|p| format!("[{}]*({})", p.guard.display(decls), p.body.display(decls)))
            .collect::<Vec<_>>()
            .join(" + ")
    }
}

/// An unnormalized sum of guarded affine terms; guards may overlap, and a
/// state's value is the sum over all terms whose guard holds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GuardedSum {
    pub terms: Vec<(BoolExpr, LinExp)>,
}

impl GuardedSum {
    pub fn from_piecewise(pw: &Piecewise) -> Result<GuardedSum, String> {
        let mut terms = Vec::new();
        for p in &pw.pieces {
            match &p.body {
                Body::Fin(e) => terms.push((p.guard.clone(), e.clone())),
                Body::Inf => return Err("infinite piece in guarded sum".to_string()),
            }
        }
        Ok(GuardedSum { terms })
    }

    /// Exact value for a fully concrete sum.
    pub fn eval(&self, s: &State) -> Rat {
        let mut acc = Rat::zero();
        for (g, e) in &self.terms {
            if g.holds(s) {
                acc += e.eval(s);
            }
        }
        acc
    }

    pub fn scale(&self, q: &Rat) -> GuardedSum {
        GuardedSum {
            terms: self
                .terms
                .iter()
                .map(|(g, e)| (g.clone(), e.scale(q)))
                .collect(),
        }
    }

    pub fn substitute(&self, x: VarId, e: &Expr) -> GuardedSum {
        GuardedSum {
            terms: self
                .terms
                .iter()
                .map(|(g, b)| (g.substitute(x, e), b.substitute(x, e)))
                .collect(),
        }
    }

    /// Conjoins a guard onto every term.
    pub fn gate(&self, g: &BoolExpr) -> GuardedSum {
        GuardedSum {
            terms: self
                .terms
                .iter()
                .map(|(tg, e)| (tg.clone().and(g.clone()), e.clone()))
                .collect(),
        }
    }

    pub fn concat(mut self, other: GuardedSum) -> GuardedSum {
        self.terms.extend(other.terms);
        self
    }
}

/// Assignment of exact rationals to template variables.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Valuation(pub BTreeMap<TVarId, Rat>);

impl Valuation {
    pub fn get(&self, t: TVarId) -> &Rat {
        self.0
            .get(&t)
            .unwrap_or_else(|| panic!("valuation missing template variable {}", tvar_name(t)))
    }

    pub fn set(&mut self, t: TVarId, q: Rat) {
        self.0.insert(t, q);
    }
}

impl fmt::Display for Valuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, (t, q)) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{}: {}", tvar_name(*t), display_rat(q))?;
        }
        write!(f, "}}")
    }
}

/// Hands out fresh template variable identifiers.
#[derive(Debug, Clone, Default)]
pub struct TVarGen {
    next: TVarId,
}

impl TVarGen {
    pub fn new() -> Self {
        TVarGen { next: 0 }
    }

    pub fn fresh(&mut self) -> TVarId {
        let t = self.next;
        self.next += 1;
        t
    }

    pub fn count(&self) -> usize {
        self.next
    }
}

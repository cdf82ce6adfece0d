//! Linear constraint intermediate representation and SMT-LIB2 emission.
//!
//! Constraints mix three kinds of unknowns: program variables (naturals),
//! template variables (reals), and auxiliary multipliers (reals)
//! introduced by the certificate encoding. Emission declares each symbol
//! with its sort, asserts nonnegativity of program variables, rewrites
//! strict inequalities over pure integer atoms into non-strict ones, and
//! coerces integer symbols with `to_real` inside mixed atoms.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use num::BigInt;
use num_traits::{One, Signed, Zero};

use crate::expect::{BoolExpr, LinExp, TCoeff, TVarId};
use crate::scalar::Rat;
use crate::syntax::{Decls, VarId};

/// A constraint unknown.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sym {
    /// Program variable, integer sorted and nonnegative.
    PVar(VarId),
    /// Template variable, real sorted.
    TVar(TVarId),
    /// Auxiliary multiplier, real sorted; nonnegativity is asserted
    /// explicitly where required.
    Aux(usize),
}

impl Sym {
    pub fn is_int(&self) -> bool {
        matches!(self, Sym::PVar(_))
    }

    pub fn smt_name(&self, decls: &Decls) -> String {
        match self {
            Sym::PVar(x) => decls.name(*x).to_string(),
            Sym::TVar(t) => crate::expect::tvar_name(*t),
            Sym::Aux(m) => format!("m{m}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rel {
    Le,
    Lt,
    Eq,
}

/// A linear atom `sum(coeffs) REL rhs`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Atom {
    pub coeffs: BTreeMap<Sym, Rat>,
    pub rel: Rel,
    pub rhs: Rat,
}

impl Atom {
    pub fn new(coeffs: BTreeMap<Sym, Rat>, rel: Rel, rhs: Rat) -> Atom {
        let coeffs = coeffs.into_iter().filter(|(_, c)| !c.is_zero()).collect();
        Atom { coeffs, rel, rhs }
    }

    /// The negated atom, when it is again a single atom.
    /// `!(e <= r)` is `-e < -r` and `!(e < r)` is `-e <= -r`;
    /// negated equality needs a disjunction and is handled in
    /// [`Constraint::negate`].
    fn negate_inequality(&self) -> Atom {
        let rel = match self.rel {
            Rel::Le => Rel::Lt,
            Rel::Lt => Rel::Le,
            Rel::Eq => unreachable!("negated equality is not an atom"),
        };
        Atom {
            coeffs: self.coeffs.iter().map(|(s, c)| (*s, -c)).collect(),
            rel,
            rhs: -&self.rhs,
        }
    }

    pub fn eval(&self, value: &dyn Fn(Sym) -> Rat) -> bool {
        let mut lhs = Rat::zero();
        for (s, c) in &self.coeffs {
            lhs += c * value(*s);
        }
        match self.rel {
            Rel::Le => lhs <= self.rhs,
            Rel::Lt => lhs < self.rhs,
            Rel::Eq => lhs == self.rhs,
        }
    }

    fn syms(&self, out: &mut BTreeSet<Sym>) {
        out.extend(self.coeffs.keys().copied());
    }

    fn all_int(&self) -> bool {
        self.coeffs.keys().all(Sym::is_int)
    }

    /// Scales coefficients and right hand side to integers.
    fn scaled(&self) -> (BTreeMap<Sym, BigInt>, BigInt) {
        let mut lcm = self.rhs.denom().clone();
        for c in self.coeffs.values() {
            lcm = num::Integer::lcm(&lcm, c.denom());
        }
        let scale = Rat::from_integer(lcm);
        let coeffs = self
            .coeffs
            .iter()
            .map(|(s, c)| (*s, (c * &scale).to_integer()))
            .collect();
        let rhs = (&self.rhs * &scale).to_integer();
        (coeffs, rhs)
    }

    fn emit(&self, decls: &Decls, out: &mut String) {
        let (coeffs, mut rhs) = self.scaled();
        let mut rel = self.rel;
        let all_int = self.all_int();
        if all_int && rel == Rel::Lt {
            // over the integers t < u is t <= u - 1
            rel = Rel::Le;
            rhs -= 1;
        }
        let op = match rel {
            Rel::Le => "<=",
            Rel::Lt => "<",
            Rel::Eq => "=",
        };
        write!(out, "({op} ").unwrap();
        if coeffs.is_empty() {
            out.push('0');
            if !all_int {
                out.push_str(".0");
            }
        } else {
            if coeffs.len() > 1 {
                out.push_str("(+ ");
            }
            for (i, (s, c)) in coeffs.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                let name = s.smt_name(decls);
                let name = if !all_int && s.is_int() {
                    format!("(to_real {name})")
                } else {
                    name
                };
                if c.is_one() {
                    out.push_str(&name);
                } else {
                    // in a mixed atom every operand is Real sorted
                    write!(out, "(* {} {name})", int_lit(c, all_int)).unwrap();
                }
            }
            if coeffs.len() > 1 {
                out.push(')');
            }
        }
        write!(out, " {})", int_lit(&rhs, all_int)).unwrap();
    }
}

/// Above this many members, `and` and `or` only flatten.
const SIMPLIFY_CAP: usize = 128;

fn dedup(flat: &mut Vec<Constraint>) {
    let mut kept: Vec<Constraint> = Vec::with_capacity(flat.len());
    for c in flat.drain(..) {
        if !kept.contains(&c) {
            kept.push(c);
        }
    }
    *flat = kept;
}

/// Does `a` imply `b`? Only decided for inequality atoms over the same
/// left hand side; everything else conservatively answers no.
fn atom_implies(a: &Atom, b: &Atom) -> bool {
    if a.rel == Rel::Eq || b.rel == Rel::Eq || a.coeffs != b.coeffs {
        return false;
    }
    a.rhs < b.rhs || (a.rhs == b.rhs && !(a.rel == Rel::Le && b.rel == Rel::Lt))
}

/// The negation of an inequality atom; equalities negate to a
/// disjunction and yield `None`.
fn atom_negation(a: &Atom) -> Option<Atom> {
    match a.rel {
        Rel::Eq => None,
        _ => Some(a.negate_inequality()),
    }
}

/// Integer literal, rendered for Int sort when `as_int`, else Real.
fn int_lit(n: &BigInt, as_int: bool) -> String {
    let mag = n.magnitude().to_string();
    let body = if as_int { mag } else { format!("{mag}.0") };
    if n.is_negative() {
        format!("(- {body})")
    } else {
        body
    }
}

/// A tree of linear constraints in negation normal form at the atom
/// level; negation exists only as a constructor that pushes inward.
#[derive(Debug, Clone, PartialEq)]
pub enum Constraint {
    True,
    False,
    Atom(Atom),
    And(Vec<Constraint>),
    Or(Vec<Constraint>),
}

impl Constraint {
    pub fn and(items: Vec<Constraint>) -> Constraint {
        let mut flat = Vec::new();
        for c in items {
            match c {
                Constraint::True => {}
                Constraint::False => return Constraint::False,
                Constraint::And(inner) => flat.extend(inner),
                other => flat.push(other),
            }
        }
        // the pairwise passes below are quadratic; bulk conjunctions
        // such as whole-box encodings skip them
        if flat.len() > SIMPLIFY_CAP {
            return match flat.len() {
                0 => Constraint::True,
                1 => flat.pop().unwrap(),
                _ => Constraint::And(flat),
            };
        }
        dedup(&mut flat);
        // two contradictory inequality conjuncts sink the conjunction
        let atoms: Vec<Atom> = flat
            .iter()
            .filter_map(|c| match c {
                Constraint::Atom(a) => Some(a.clone()),
                _ => None,
            })
            .collect();
        for (i, a) in atoms.iter().enumerate() {
            for b in &atoms[i + 1..] {
                if let Some(nb) = atom_negation(b) {
                    if atom_implies(a, &nb) {
                        return Constraint::False;
                    }
                }
            }
        }
        // drop conjuncts already forced by a stronger one
        flat.retain(|c| match c {
            Constraint::Atom(a) => {
                !atoms.iter().any(|b| b != a && atom_implies(b, a))
            }
            Constraint::Or(items) => !items.iter().any(|d| match d {
                Constraint::Atom(x) => atoms.iter().any(|b| atom_implies(b, x)),
                _ => false,
            }),
            _ => true,
        });
        match flat.len() {
            0 => Constraint::True,
            1 => flat.pop().unwrap(),
            _ => Constraint::And(flat),
        }
    }

    pub fn or(items: Vec<Constraint>) -> Constraint {
        let mut flat = Vec::new();
        for c in items {
            match c {
                Constraint::False => {}
                Constraint::True => return Constraint::True,
                Constraint::Or(inner) => flat.extend(inner),
                other => flat.push(other),
            }
        }
        if flat.len() > SIMPLIFY_CAP {
            return match flat.len() {
                0 => Constraint::False,
                1 => flat.pop().unwrap(),
                _ => Constraint::Or(flat),
            };
        }
        dedup(&mut flat);
        // two covering inequality disjuncts make the disjunction valid
        let atoms: Vec<Atom> = flat
            .iter()
            .filter_map(|c| match c {
                Constraint::Atom(a) => Some(a.clone()),
                _ => None,
            })
            .collect();
        for (i, a) in atoms.iter().enumerate() {
            for b in &atoms[i + 1..] {
                if let Some(na) = atom_negation(a) {
                    if atom_implies(&na, b) {
                        return Constraint::True;
                    }
                }
            }
        }
        // drop disjuncts already covered by a weaker one
        flat.retain(|c| match c {
            Constraint::Atom(a) => {
                !atoms.iter().any(|b| b != a && atom_implies(a, b))
            }
            Constraint::And(items) => !items.iter().any(|d| match d {
                Constraint::Atom(x) => atoms.iter().any(|b| atom_implies(x, b)),
                _ => false,
            }),
            _ => true,
        });
        match flat.len() {
            0 => Constraint::False,
            1 => flat.pop().unwrap(),
            _ => Constraint::Or(flat),
        }
    }

    pub fn negate(&self) -> Constraint {
        match self {
            Constraint::True => Constraint::False,
            Constraint::False => Constraint::True,
            Constraint::Atom(a) => match a.rel {
                Rel::Eq => {
                    // !(e = r) is e < r or e > r
                    let lt = Atom { coeffs: a.coeffs.clone(), rel: Rel::Lt, rhs: a.rhs.clone() };
                    let gt = Atom {
                        coeffs: a.coeffs.iter().map(|(s, c)| (*s, -c)).collect(),
                        rel: Rel::Lt,
                        rhs: -&a.rhs,
                    };
                    Constraint::or(vec![Constraint::Atom(lt), Constraint::Atom(gt)])
                }
                _ => Constraint::Atom(a.negate_inequality()),
            },
            Constraint::And(items) => {
                Constraint::or(items.iter().map(Constraint::negate).collect())
            }
            Constraint::Or(items) => {
                Constraint::and(items.iter().map(Constraint::negate).collect())
            }
        }
    }

    pub fn syms(&self) -> BTreeSet<Sym> {
        let mut out = BTreeSet::new();
        self.collect_syms(&mut out);
        out
    }

    fn collect_syms(&self, out: &mut BTreeSet<Sym>) {
        match self {
            Constraint::True | Constraint::False => {}
            Constraint::Atom(a) => a.syms(out),
            Constraint::And(items) | Constraint::Or(items) => {
                for c in items {
                    c.collect_syms(out);
                }
            }
        }
    }

    /// Truth value under a full assignment; used by the certificate
    /// soundness tests.
    pub fn eval(&self, value: &dyn Fn(Sym) -> Rat) -> bool {
        match self {
            Constraint::True => true,
            Constraint::False => false,
            Constraint::Atom(a) => a.eval(value),
            Constraint::And(items) => items.iter().all(|c| c.eval(value)),
            Constraint::Or(items) => items.iter().any(|c| c.eval(value)),
        }
    }

    pub fn emit(&self, decls: &Decls, out: &mut String) {
        match self {
            Constraint::True => out.push_str("true"),
            Constraint::False => out.push_str("false"),
            Constraint::Atom(a) => a.emit(decls, out),
            Constraint::And(items) => {
                out.push_str("(and");
                for c in items {
                    out.push(' ');
                    c.emit(decls, out);
                }
                out.push(')');
            }
            Constraint::Or(items) => {
                out.push_str("(or");
                for c in items {
                    out.push(' ');
                    c.emit(decls, out);
                }
                out.push(')');
            }
        }
    }

    pub fn to_smt(&self, decls: &Decls) -> String {
        let mut out = String::new();
        self.emit(decls, &mut out);
        out
    }

    /// Declaration commands for every symbol in the constraint, with
    /// nonnegativity asserted for program variables.
    pub fn declarations(&self, decls: &Decls) -> Vec<String> {
        let mut out = Vec::new();
        for s in self.syms() {
            let name = s.smt_name(decls);
            let sort = if s.is_int() { "Int" } else { "Real" };
            out.push(format!("(declare-const {name} {sort})"));
            if s.is_int() {
                out.push(format!("(assert (>= {name} 0))"));
            }
        }
        out
    }

    /// Number of atoms, used to enforce encoding size caps.
    pub fn atom_count(&self) -> usize {
        match self {
            Constraint::True | Constraint::False => 0,
            Constraint::Atom(_) => 1,
            Constraint::And(items) | Constraint::Or(items) => {
                items.iter().map(Constraint::atom_count).sum()
            }
        }
    }
}

/// Builds the atom `a REL b` from two affine forms. Program variable
/// coefficients must be concrete rationals; template variables may only
/// occur in the constant part (interval boundaries and synthesized
/// constants), which keeps the atom linear.
pub fn linexp_atom(a: &LinExp, rel: Rel, b: &LinExp) -> Atom {
    let diff = a.sub(b);
    let mut coeffs: BTreeMap<Sym, Rat> = BTreeMap::new();
    for (x, c) in &diff.coeffs {
        assert!(
            c.is_concrete(),
            "template variable multiplies a program variable; atom is nonlinear"
        );
        coeffs.insert(Sym::PVar(*x), c.constant.clone());
    }
    for (t, q) in &diff.k.lin {
        coeffs.insert(Sym::TVar(*t), q.clone());
    }
    Atom::new(coeffs, rel, -&diff.k.constant)
}

/// Builds the atom `a REL b` between affine forms over template
/// variables only.
pub fn tcoeff_atom(a: &TCoeff, rel: Rel, b: &TCoeff) -> Atom {
    let diff = a.sub(b);
    let coeffs = diff.lin.iter().map(|(t, q)| (Sym::TVar(*t), q.clone())).collect();
    Atom::new(coeffs, rel, -&diff.constant)
}

/// Wraps an atom, folding away atoms with no unknowns.
pub fn atom_or_const(a: Atom) -> Constraint {
    if !a.coeffs.is_empty() {
        return Constraint::Atom(a);
    }
    let holds = match a.rel {
        Rel::Le => !a.rhs.is_negative(),
        Rel::Lt => a.rhs.is_positive(),
        Rel::Eq => a.rhs.is_zero(),
    };
    if holds {
        Constraint::True
    } else {
        Constraint::False
    }
}

/// Translates a guard into a constraint.
pub fn bool_constraint(b: &BoolExpr) -> Constraint {
    match b {
        BoolExpr::True => Constraint::True,
        BoolExpr::False => Constraint::False,
        BoolExpr::Lt(a, c) => atom_or_const(linexp_atom(a, Rel::Lt, c)),
        BoolExpr::Not(inner) => bool_constraint(inner).negate(),
        BoolExpr::And(a, c) => Constraint::and(vec![bool_constraint(a), bool_constraint(c)]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Scalar;

    fn decls_xy() -> Decls {
        let mut d = Decls::new();
        d.declare("x", 0, None).unwrap();
        d.declare("y", 0, None).unwrap();
        d
    }

    #[test]
    fn int_strict_becomes_nonstrict() {
        let d = decls_xy();
        // x/2 < 3/2 over integers scales to x < 3, then x <= 2
        let mut coeffs = BTreeMap::new();
        coeffs.insert(Sym::PVar(0), Rat::ratio(1, 2));
        let a = Atom::new(coeffs, Rel::Lt, Rat::ratio(3, 2));
        assert_eq!(Constraint::Atom(a).to_smt(&d), "(<= x 2)");
    }

    #[test]
    fn mixed_atom_keeps_strict_and_coerces() {
        let d = decls_xy();
        let mut coeffs = BTreeMap::new();
        coeffs.insert(Sym::PVar(0), Rat::one());
        coeffs.insert(Sym::TVar(3), -Rat::one());
        let a = Atom::new(coeffs, Rel::Lt, Rat::zero());
        assert_eq!(
            Constraint::Atom(a).to_smt(&d),
            "(< (+ (to_real x) (* (- 1.0) t3)) 0.0)"
        );
    }

    #[test]
    fn negation_of_equality_splits() {
        let d = decls_xy();
        let mut coeffs = BTreeMap::new();
        coeffs.insert(Sym::PVar(0), Rat::one());
        let a = Constraint::Atom(Atom::new(coeffs, Rel::Eq, Rat::from_u64(2)));
        let neg = a.negate();
        assert_eq!(neg.to_smt(&d), "(or (<= x 1) (<= (* (- 1) x) (- 3)))");
        // sanity: x = 2 falsifies, x = 3 satisfies
        assert!(!neg.eval(&|_| Rat::from_u64(2)));
        assert!(neg.eval(&|_| Rat::from_u64(3)));
    }

    #[test]
    fn declarations_cover_all_sorts() {
        let d = decls_xy();
        let mut coeffs = BTreeMap::new();
        coeffs.insert(Sym::PVar(1), Rat::one());
        coeffs.insert(Sym::TVar(0), Rat::one());
        coeffs.insert(Sym::Aux(2), Rat::one());
        let c = Constraint::Atom(Atom::new(coeffs, Rel::Le, Rat::zero()));
        let decls = c.declarations(&d);
        assert_eq!(
            decls,
            vec![
                "(declare-const y Int)".to_string(),
                "(assert (>= y 0))".to_string(),
                "(declare-const t0 Real)".to_string(),
                "(declare-const m2 Real)".to_string(),
            ]
        );
    }

    #[test]
    fn guard_translation_round_trip() {
        // !(x < y) & x < 5  evaluated at sampled points agrees with the
        // original guard
        let g = BoolExpr::Lt(LinExp::var(0), LinExp::var(1))
            .not()
            .and(BoolExpr::Lt(LinExp::var(0), LinExp::rat(Rat::from_u64(5))));
        let c = bool_constraint(&g);
        for x in 0..7u64 {
            for y in 0..7u64 {
                let s = crate::syntax::State(vec![x, y]);
                let val = |sym: Sym| match sym {
                    Sym::PVar(v) => s.rat(v),
                    _ => unreachable!(),
                };
                assert_eq!(c.eval(&val), g.holds(&s), "at ({x},{y})");
            }
        }
    }
}

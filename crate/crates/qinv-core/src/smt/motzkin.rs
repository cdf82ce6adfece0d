//! Certificate encoding of universal implications over linear regions.
//!
//! To constrain template coefficients so that `alpha^T x <= beta` holds
//! for every natural point of a region `A x <= a, B x < b`, the
//! universal quantifier over `x` is eliminated with a transposition
//! argument: either nonnegative multipliers combine the region rows into
//! a contradiction (the region is empty), or they combine the rows into
//! the conclusion with nonnegative slack. Both branches are linear in
//! the multipliers and the template coefficients jointly, so they can be
//! asserted inside the synthesizer's query.
//!
//! The encoding quantifies `x` over the reals, which covers all natural
//! points but makes it incomplete: `2x <= 1` forces `x <= 0` over the
//! naturals, yet no real certificate exists. Nonnegativity rows
//! `-x_i <= 0` are always included to recover part of the gap.

use std::collections::BTreeMap;

use num_traits::{One, Zero};

use crate::expect::{BoolExpr, LinExp, TCoeff};
use crate::scalar::Rat;
use crate::smt::ir::{Atom, Constraint, Rel, Sym};
use crate::syntax::{Decls, VarId};

/// Fresh auxiliary multiplier symbols.
#[derive(Debug, Default)]
pub struct AuxGen {
    next: usize,
}

impl AuxGen {
    pub fn new() -> Self {
        AuxGen { next: 0 }
    }

    fn fresh(&mut self) -> Sym {
        let s = Sym::Aux(self.next);
        self.next += 1;
        s
    }
}

/// A row `coeffs . x (<|<=) rhs` with concrete coefficients.
#[derive(Debug, Clone)]
pub struct Row {
    pub coeffs: BTreeMap<VarId, Rat>,
    pub rhs: Rat,
}

/// `forall x in N^n: weak rows and strict rows imply alpha . x <= beta`,
/// where alpha and beta are affine in the template variables.
#[derive(Debug, Clone)]
pub struct UniversalImplication {
    pub weak: Vec<Row>,
    pub strict: Vec<Row>,
    pub alpha: BTreeMap<VarId, TCoeff>,
    pub beta: TCoeff,
}

impl UniversalImplication {
    /// Builds the implication `region ==> lhs <= rhs` from a conjunctive
    /// guard; returns `None` when the guard is not a conjunction of
    /// comparisons or mentions template variables.
    pub fn new(
        region: &BoolExpr,
        lhs: &LinExp,
        rhs: &LinExp,
        decls: &Decls,
    ) -> Option<UniversalImplication> {
        let mut weak = Vec::new();
        let mut strict = Vec::new();
        // every program variable is a natural number
        for x in decls.ids() {
            let mut coeffs = BTreeMap::new();
            coeffs.insert(x, -Rat::one());
            weak.push(Row { coeffs, rhs: Rat::zero() });
        }
        for lit in region.literals()? {
            let diff = lit.lhs.sub(&lit.rhs);
            if !diff.is_concrete() {
                return None;
            }
            let coeffs: BTreeMap<VarId, Rat> = diff
                .coeffs
                .iter()
                .map(|(x, c)| (*x, c.constant.clone()))
                .collect();
            let row = Row { coeffs, rhs: -diff.k.constant.clone() };
            if lit.negated {
                // !(l < r) is r - l <= 0, i.e. the reversed weak row
                let neg = Row {
                    coeffs: row.coeffs.iter().map(|(x, c)| (*x, -c)).collect(),
                    rhs: -row.rhs,
                };
                weak.push(neg);
            } else {
                strict.push(row);
            }
        }
        // conclusion: (lhs - rhs) . x <= rhs.k - lhs.k in affine parts
        let diff = lhs.sub(rhs);
        let alpha = diff.coeffs.clone();
        let beta = TCoeff::zero().sub(&diff.k);
        Some(UniversalImplication { weak, strict, alpha, beta })
    }

    pub fn var_ids(&self, decls: &Decls) -> Vec<VarId> {
        decls.ids().collect()
    }
}

/// Emits the certificate constraint for one implication. Distinct
/// implications must use the same generator so their multipliers do not
/// collide.
pub fn motzkin_encode(
    imp: &UniversalImplication,
    decls: &Decls,
    aux: &mut AuxGen,
) -> Constraint {
    let lambdas: Vec<Sym> = imp.weak.iter().map(|_| aux.fresh()).collect();
    let etas: Vec<Sym> = imp.strict.iter().map(|_| aux.fresh()).collect();
    let eta0 = aux.fresh();

    let mut conjuncts = Vec::new();
    // all multipliers are nonnegative
    for &m in lambdas.iter().chain(&etas).chain(std::iter::once(&eta0)) {
        let mut coeffs = BTreeMap::new();
        coeffs.insert(m, -Rat::one());
        conjuncts.push(Constraint::Atom(Atom::new(coeffs, Rel::Le, Rat::zero())));
    }

    // per-variable combination sum(lambda_i A_iv) + sum(eta_j B_jv)
    let combo = |v: VarId| -> BTreeMap<Sym, Rat> {
        let mut coeffs: BTreeMap<Sym, Rat> = BTreeMap::new();
        for (row, &m) in imp.weak.iter().zip(&lambdas) {
            if let Some(c) = row.coeffs.get(&v) {
                if !c.is_zero() {
                    coeffs.insert(m, c.clone());
                }
            }
        }
        for (row, &m) in imp.strict.iter().zip(&etas) {
            if let Some(c) = row.coeffs.get(&v) {
                if !c.is_zero() {
                    coeffs.insert(m, c.clone());
                }
            }
        }
        coeffs
    };
    // constant combination sum(lambda_i a_i) + sum(eta_j b_j)
    let mut const_combo: BTreeMap<Sym, Rat> = BTreeMap::new();
    for (row, &m) in imp.weak.iter().zip(&lambdas) {
        if !row.rhs.is_zero() {
            const_combo.insert(m, row.rhs.clone());
        }
    }
    for (row, &m) in imp.strict.iter().zip(&etas) {
        if !row.rhs.is_zero() {
            const_combo.insert(m, row.rhs.clone());
        }
    }

    // branch one: the region itself is contradictory. The combination
    // cancels every variable, the constants sum to zero with slack
    // eta0, and at least one strict multiplier is positive.
    let mut empty_region = Vec::new();
    for v in imp.var_ids(decls) {
        empty_region.push(Constraint::Atom(Atom::new(combo(v), Rel::Eq, Rat::zero())));
    }
    {
        let mut coeffs = const_combo.clone();
        coeffs.insert(eta0, Rat::one());
        empty_region.push(Constraint::Atom(Atom::new(coeffs, Rel::Eq, Rat::zero())));
        let mut strict_sum: BTreeMap<Sym, Rat> =
            etas.iter().map(|&m| (m, -Rat::one())).collect();
        strict_sum.insert(eta0, -Rat::one());
        empty_region.push(Constraint::Atom(Atom::new(strict_sum, Rel::Lt, Rat::zero())));
    }

    // branch two: the combination yields the conclusion. Per variable
    // the row combination equals alpha_v, and beta exceeds the constant
    // combination by the slack eta0.
    let mut derives = Vec::new();
    for v in imp.var_ids(decls) {
        let mut coeffs = combo(v);
        let alpha_v = imp.alpha.get(&v).cloned().unwrap_or_else(TCoeff::zero);
        for (t, q) in &alpha_v.lin {
            coeffs.insert(Sym::TVar(*t), -q.clone());
        }
        derives.push(Constraint::Atom(Atom::new(coeffs, Rel::Eq, alpha_v.constant)));
    }
    {
        let mut coeffs = const_combo;
        coeffs.insert(eta0, Rat::one());
        for (t, q) in &imp.beta.lin {
            coeffs.insert(Sym::TVar(*t), -q.clone());
        }
        derives.push(Constraint::Atom(Atom::new(coeffs, Rel::Eq, imp.beta.constant.clone())));
    }

    Constraint::and(vec![
        Constraint::and(conjuncts),
        Constraint::or(vec![Constraint::and(empty_region), Constraint::and(derives)]),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Scalar;
    use crate::smt::session::{SatResult, Session, SolverConfig};

    fn decls_x() -> Decls {
        let mut d = Decls::new();
        d.declare("x", 0, None).unwrap();
        d
    }

    #[test]
    fn certificate_exists_for_valid_implication() {
        // x <= 4 (as !(4 < x)) implies x <= t0 once t0 >= 4
        let d = decls_x();
        let region = BoolExpr::Lt(LinExp::rat(Rat::from_u64(4)), LinExp::var(0)).not();
        let imp =
            UniversalImplication::new(&region, &LinExp::var(0), &LinExp::tvar(0), &d).unwrap();
        let mut aux = AuxGen::new();
        let cert = motzkin_encode(&imp, &d, &mut aux);
        let mut sess = Session::new(&SolverConfig::default()).unwrap();
        sess.assert_constraint(&cert, &d).unwrap();
        // force t0 = 4: certificate must exist
        sess.push().unwrap();
        let mut c = BTreeMap::new();
        c.insert(Sym::TVar(0), Rat::one());
        sess.assert_constraint(
            &Constraint::Atom(Atom::new(c.clone(), Rel::Eq, Rat::from_u64(4))),
            &d,
        )
        .unwrap();
        assert_eq!(sess.check_sat().unwrap(), SatResult::Sat);
        sess.pop().unwrap();
        // t0 = 3 makes the implication false: no certificate
        sess.assert_constraint(
            &Constraint::Atom(Atom::new(c, Rel::Eq, Rat::from_u64(3))),
            &d,
        )
        .unwrap();
        assert_eq!(sess.check_sat().unwrap(), SatResult::Unsat);
    }

    #[test]
    fn empty_region_branch_fires() {
        // x < 3 and 5 <= x is empty, so any conclusion is certified
        let d = decls_x();
        let region = BoolExpr::Lt(LinExp::var(0), LinExp::rat(Rat::from_u64(3)))
            .and(BoolExpr::Lt(LinExp::var(0), LinExp::rat(Rat::from_u64(5))).not());
        let imp = UniversalImplication::new(
            &region,
            &LinExp::var(0),
            &LinExp::rat(-Rat::from_u64(100)),
            &d,
        )
        .unwrap();
        let mut aux = AuxGen::new();
        let cert = motzkin_encode(&imp, &d, &mut aux);
        let mut sess = Session::new(&SolverConfig::default()).unwrap();
        sess.assert_constraint(&cert, &d).unwrap();
        assert_eq!(sess.check_sat().unwrap(), SatResult::Sat);
    }

    #[test]
    fn incomplete_over_naturals() {
        // over the naturals 2x <= 1 forces x = 0, hence x <= 0; but no
        // real certificate exists since x = 1/2 is a real counterexample
        let d = decls_x();
        let region =
            BoolExpr::Lt(LinExp::rat(Rat::one()), LinExp::var(0).scale(&Rat::from_u64(2)))
                .not();
        let imp = UniversalImplication::new(&region, &LinExp::var(0), &LinExp::zero(), &d)
            .unwrap();
        let mut aux = AuxGen::new();
        let cert = motzkin_encode(&imp, &d, &mut aux);
        let mut sess = Session::new(&SolverConfig::default()).unwrap();
        sess.assert_constraint(&cert, &d).unwrap();
        assert_eq!(sess.check_sat().unwrap(), SatResult::Unsat);
    }

    #[test]
    fn certificate_is_pointwise_sound() {
        // whenever the certificate constraint holds for concrete
        // multipliers and coefficients, the implication holds at every
        // sampled natural point
        let d = decls_x();
        let region = BoolExpr::Lt(LinExp::var(0), LinExp::rat(Rat::from_u64(10)));
        let imp =
            UniversalImplication::new(&region, &LinExp::var(0), &LinExp::tvar(0), &d).unwrap();
        let mut aux = AuxGen::new();
        let cert = motzkin_encode(&imp, &d, &mut aux);
        let mut sess = Session::new(&SolverConfig::default()).unwrap();
        sess.assert_constraint(&cert, &d).unwrap();
        assert_eq!(sess.check_sat().unwrap(), SatResult::Sat);
        let model = sess.get_model().unwrap();
        let t0 = crate::smt::session::model_value(&model, "t0");
        // the certified conclusion x <= t0 must hold on the region
        for x in 0..10u64 {
            assert!(Rat::from_u64(x) <= t0, "x={x} t0={t0}");
        }
    }
}

//! Turns overlapping guarded sums into partitioned piecewise form.
//!
//! Cells are built incrementally: each term splits every existing cell
//! into the part where the term's guard holds (body gains the term) and
//! the part where it does not. Cells with unsatisfiable guards are
//! dropped, first by a syntactic contradiction check and then by asking
//! the solver; cells with identical bodies are merged back into a single
//! piece. Guards may mention template variables as interval boundaries,
//! in which case a cell is only dropped when it is empty for every
//! choice of boundary values.

use std::collections::BTreeMap;

use crate::expect::{Body, BoolExpr, GuardedSum, LinExp, Piece, Piecewise};
use crate::smt::{bool_constraint, SatResult, Session, SessionError};
use crate::syntax::Decls;

struct Cell {
    guard: BoolExpr,
    body: LinExp,
}

/// Conjunction with duplicate conjuncts removed.
fn conj_dedup(a: BoolExpr, b: BoolExpr) -> BoolExpr {
    let combined = a.and(b);
    let parts = combined.conjuncts();
    let mut kept: Vec<BoolExpr> = Vec::new();
    for p in parts {
        if !kept.iter().any(|k| k == p) {
            kept.push(p.clone());
        }
    }
    let mut out = BoolExpr::True;
    for k in kept {
        out = out.and(k);
    }
    out
}

/// Satisfiability of a cell guard; existential over program variables
/// and any template variables it mentions.
pub fn cell_nonempty(
    guard: &BoolExpr,
    decls: &Decls,
    sess: &mut Session,
) -> Result<bool, SessionError> {
    if guard.syntactically_false() {
        return Ok(false);
    }
    if *guard == BoolExpr::True {
        return Ok(true);
    }
    sess.push()?;
    sess.assert_constraint(&bool_constraint(guard), decls)?;
    let r = sess.check_sat()?;
    sess.pop()?;
    // Unknown keeps the cell: a spurious piece with an unsatisfiable
    // guard is harmless, a missing piece would not be
    Ok(r != SatResult::Unsat)
}

/// Normalizes a guarded sum into a partition.
pub fn normalize(
    gs: &GuardedSum,
    decls: &Decls,
    sess: &mut Session,
) -> Result<Piecewise, SessionError> {
    let mut cells = vec![Cell { guard: BoolExpr::True, body: LinExp::zero() }];
    for (g, e) in &gs.terms {
        if *g == BoolExpr::False {
            continue;
        }
        let mut next = Vec::with_capacity(cells.len() * 2);
        for cell in cells {
            if *g == BoolExpr::True {
                next.push(Cell { guard: cell.guard, body: cell.body.add(e) });
                continue;
            }
            let inside = conj_dedup(cell.guard.clone(), g.clone());
            if cell_nonempty(&inside, decls, sess)? {
                next.push(Cell { guard: inside, body: cell.body.add(e) });
            }
            let outside = conj_dedup(cell.guard, g.clone().not());
            if cell_nonempty(&outside, decls, sess)? {
                next.push(Cell { guard: outside, body: cell.body });
            }
        }
        cells = next;
    }
    // merge cells computing the same body; the merged guard is the
    // disjunction, written with negation and conjunction
    let mut by_body: BTreeMap<LinExp, Vec<BoolExpr>> = BTreeMap::new();
    for cell in cells {
        by_body.entry(cell.body).or_default().push(cell.guard);
    }
    let mut pieces = Vec::new();
    for (body, guards) in by_body {
        let guard = disjoin(guards);
        pieces.push(Piece { guard, body: Body::Fin(body) });
    }
    let mut pw = Piecewise { pieces };
    pw.sort_pieces();
    Ok(pw)
}

fn disjoin(mut guards: Vec<BoolExpr>) -> BoolExpr {
    if guards.len() == 1 {
        return guards.pop().unwrap();
    }
    // a or b is !(!a & !b)
    let mut acc = BoolExpr::True;
    for g in guards {
        acc = acc.and(g.not());
    }
    acc.not()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expect::Val;
    use crate::scalar::{Rat, Scalar};
    use crate::smt::SolverConfig;
    use crate::syntax::State;
    use num_traits::One;

    fn setup() -> (Decls, Session) {
        let mut d = Decls::new();
        d.declare("x", 0, None).unwrap();
        d.declare("y", 0, None).unwrap();
        (d, Session::new(&SolverConfig::default()).unwrap())
    }

    #[test]
    fn overlapping_terms_partition() {
        let (d, mut sess) = setup();
        // [x < 5]*1 + [x < 3]*x over naturals
        let g5 = BoolExpr::Lt(LinExp::var(0), LinExp::rat(Rat::from_u64(5)));
        let g3 = BoolExpr::Lt(LinExp::var(0), LinExp::rat(Rat::from_u64(3)));
        let gs = GuardedSum {
            terms: vec![
                (g5.clone(), LinExp::rat(Rat::one())),
                (g3.clone(), LinExp::var(0)),
            ],
        };
        let pw = normalize(&gs, &d, &mut sess).unwrap();
        // three cells survive: x<3, 3<=x<5, 5<=x; the impossible
        // cell !(x<5) & x<3 is dropped
        assert_eq!(pw.pieces.len(), 3);
        for x in 0..8u64 {
            let s = State(vec![x, 0]);
            assert_eq!(pw.eval(&s), Val::Fin(gs.eval(&s)), "at x={x}");
        }
    }

    #[test]
    fn identical_bodies_merge() {
        let (d, mut sess) = setup();
        // two disjoint guards with the same constant body
        let a = BoolExpr::Lt(LinExp::var(0), LinExp::rat(Rat::one()));
        let b = BoolExpr::Lt(LinExp::rat(Rat::from_u64(4)), LinExp::var(0));
        let gs = GuardedSum {
            terms: vec![
                (a, LinExp::rat(Rat::from_u64(7))),
                (b, LinExp::rat(Rat::from_u64(7))),
            ],
        };
        let pw = normalize(&gs, &d, &mut sess).unwrap();
        // two pieces: value 7 on x=0 or x>4, value 0 in between
        assert_eq!(pw.pieces.len(), 2);
        for x in 0..8u64 {
            let s = State(vec![x, 0]);
            assert_eq!(pw.eval(&s), Val::Fin(gs.eval(&s)), "at x={x}");
        }
    }

    #[test]
    fn empty_guard_dropped_without_solver_help() {
        let (d, mut sess) = setup();
        let g = BoolExpr::Lt(LinExp::var(0), LinExp::rat(Rat::from_u64(3)));
        let gs = GuardedSum {
            terms: vec![
                (g.clone(), LinExp::rat(Rat::one())),
                (g.clone().not(), LinExp::rat(Rat::from_u64(2))),
            ],
        };
        let pw = normalize(&gs, &d, &mut sess).unwrap();
        assert_eq!(pw.pieces.len(), 2);
    }

    #[test]
    fn unsat_over_naturals_dropped() {
        let (d, mut sess) = setup();
        // x < 3 and 5 < x is unsatisfiable but not syntactically so
        let a = BoolExpr::Lt(LinExp::var(0), LinExp::rat(Rat::from_u64(3)));
        let b = BoolExpr::Lt(LinExp::rat(Rat::from_u64(5)), LinExp::var(0));
        let gs = GuardedSum {
            terms: vec![(a, LinExp::rat(Rat::one())), (b, LinExp::var(1))],
        };
        let pw = normalize(&gs, &d, &mut sess).unwrap();
        assert_eq!(pw.pieces.len(), 3);
    }
}

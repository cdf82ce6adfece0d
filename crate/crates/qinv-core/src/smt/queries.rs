//! Query builders shared by the verifier and the synthesizer.
//!
//! The verifier searches for a program state violating one of the three
//! invariant conditions of a concrete candidate; the synthesizer
//! constrains template coefficients so the conditions hold at a fixed
//! set of states. Both sides are built from the same piecewise data so
//! that a state reported by one is meaningful to the other.

use crate::expect::{Body, BoolExpr, Piecewise, TCoeff, Valuation};
use crate::scalar::Rat;
use crate::smt::ir::{
    atom_or_const, bool_constraint, linexp_atom, tcoeff_atom, Atom, Constraint, Rel, Sym,
};
use crate::syntax::{Decls, Expr, State, VarId};
use num_traits::{One, Zero};
use std::collections::BTreeMap;

/// The three conditions an inductive invariant must satisfy, in the
/// order counterexamples are searched for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    WellDefined,
    Inductive,
    Safe,
}

impl Condition {
    pub const ALL: [Condition; 3] =
        [Condition::WellDefined, Condition::Inductive, Condition::Safe];

    pub fn name(self) -> &'static str {
        match self {
            Condition::WellDefined => "well-definedness",
            Condition::Inductive => "inductivity",
            Condition::Safe => "safety",
        }
    }
}

/// A satisfying state of this constraint violates `cond` for the
/// concrete candidate `inv` with one-step transform `psi_inv` and upper
/// bound `bound`.
pub fn violation_query(
    inv: &Piecewise,
    psi_inv: &Piecewise,
    bound: &Piecewise,
    cond: Condition,
) -> Constraint {
    debug_assert!(inv.is_concrete() && psi_inv.is_concrete());
    let mut cases = Vec::new();
    match cond {
        Condition::WellDefined => {
            for p in &inv.pieces {
                let Body::Fin(body) = &p.body else { continue };
                cases.push(Constraint::and(vec![
                    bool_constraint(&p.guard),
                    atom_or_const(linexp_atom(body, Rel::Lt, &crate::expect::LinExp::zero())),
                ]));
            }
        }
        Condition::Inductive => {
            for p in &psi_inv.pieces {
                let Body::Fin(step) = &p.body else { continue };
                for q in &inv.pieces {
                    let Body::Fin(have) = &q.body else { continue };
                    cases.push(Constraint::and(vec![
                        bool_constraint(&p.guard),
                        bool_constraint(&q.guard),
                        atom_or_const(linexp_atom(have, Rel::Lt, step)),
                    ]));
                }
            }
        }
        Condition::Safe => {
            for p in &inv.pieces {
                let Body::Fin(body) = &p.body else { continue };
                for q in &bound.pieces {
                    let Body::Fin(limit) = &q.body else { continue };
                    cases.push(Constraint::and(vec![
                        bool_constraint(&p.guard),
                        bool_constraint(&q.guard),
                        atom_or_const(linexp_atom(limit, Rel::Lt, body)),
                    ]));
                }
            }
        }
    }
    Constraint::or(cases)
}

fn imply(premise: Constraint, conclusion: Constraint) -> Constraint {
    Constraint::or(vec![premise.negate(), conclusion])
}

/// Guard with the program variables fixed to a state; only template
/// variables remain.
fn guard_at_state(g: &BoolExpr, s: &State) -> BoolExpr {
    let mut out = g.clone();
    for (v, val) in s.0.iter().enumerate() {
        out = out.substitute(v, &Expr::Const(*val));
    }
    out
}

/// Constraint over template variables: the candidate described by the
/// template is well defined, inductive, and within the bound at state
/// `s`. For fixed partitions the piece guards collapse to constants and
/// the result is a plain conjunction of coefficient comparisons.
pub fn admissible_at_state(
    template: &Piecewise,
    psi_t: &Piecewise,
    bound: &Piecewise,
    s: &State,
) -> Constraint {
    let mut parts = Vec::new();
    let zero = TCoeff::zero();
    // guard truth and body value per piece, with program variables fixed
    let eval_pieces = |pw: &Piecewise| -> Vec<(Constraint, TCoeff)> {
        pw.pieces
            .iter()
            .filter_map(|p| {
                let g = bool_constraint(&guard_at_state(&p.guard, s));
                if g == Constraint::False {
                    return None;
                }
                let Body::Fin(body) = &p.body else {
                    unreachable!("template bodies are finite")
                };
                Some((g, body.at_state(s)))
            })
            .collect()
    };
    let t_pieces = eval_pieces(template);
    let psi_pieces = eval_pieces(psi_t);

    for (g, val) in &t_pieces {
        // well-definedness: 0 <= T(s)
        parts.push(imply(
            g.clone(),
            atom_or_const(tcoeff_atom(&zero, Rel::Le, val)),
        ));
    }
    for (gp, step) in &psi_pieces {
        for (gq, have) in &t_pieces {
            // inductivity: one step from s does not exceed T(s)
            parts.push(imply(
                Constraint::and(vec![gp.clone(), gq.clone()]),
                atom_or_const(tcoeff_atom(step, Rel::Le, have)),
            ));
        }
    }
    match bound.eval(s) {
        crate::expect::Val::Inf => {}
        crate::expect::Val::Fin(limit) => {
            let limit = TCoeff::constant(limit);
            for (g, val) in &t_pieces {
                parts.push(imply(
                    g.clone(),
                    atom_or_const(tcoeff_atom(val, Rel::Le, &limit)),
                ));
            }
        }
    }
    Constraint::and(parts)
}

/// Constraint over program variables: the state differs from `anchor`
/// by Manhattan distance at least `m`. Encoded as a disjunction over
/// per-variable sign patterns, which keeps every branch linear.
pub fn distance_at_least(decls: &Decls, anchor: &State, m: &Rat) -> Constraint {
    let n = decls.len();
    let mut cases = Vec::new();
    for pattern in 0u32..(1 << n) {
        let mut conj = Vec::new();
        let mut dist_coeffs: BTreeMap<Sym, Rat> = BTreeMap::new();
        let mut dist_const = Rat::zero();
        for v in 0..n {
            let a = Rat::from_integer(anchor.0[v].into());
            let positive = pattern & (1 << v) != 0;
            let mut side = BTreeMap::new();
            if positive {
                // x_v >= a_v, contributes x_v - a_v
                side.insert(Sym::PVar(v as VarId), -Rat::one());
                conj.push(atom_or_const(Atom::new(side, Rel::Le, -a.clone())));
                dist_coeffs.insert(Sym::PVar(v as VarId), Rat::one());
                dist_const -= &a;
            } else {
                // x_v <= a_v, contributes a_v - x_v
                side.insert(Sym::PVar(v as VarId), Rat::one());
                conj.push(atom_or_const(Atom::new(side, Rel::Le, a.clone())));
                dist_coeffs.insert(Sym::PVar(v as VarId), -Rat::one());
                dist_const += &a;
            }
        }
        // sum of contributions >= m
        let neg: BTreeMap<Sym, Rat> =
            dist_coeffs.into_iter().map(|(s, c)| (s, -c)).collect();
        conj.push(atom_or_const(Atom::new(neg, Rel::Le, dist_const - m)));
        cases.push(Constraint::and(conj));
    }
    Constraint::or(cases)
}

/// Conjunction of admissibility at every state of the declared box.
/// Fails when the declared box is unbounded, too large, or the encoding
/// exceeds the atom cap.
pub fn one_shot(
    template: &Piecewise,
    psi_t: &Piecewise,
    bound: &Piecewise,
    decls: &Decls,
    state_cap: usize,
    atom_cap: usize,
) -> Result<Constraint, String> {
    let states = crate::oracle::enumerate_box(decls, state_cap).map_err(|e| e.to_string())?;
    let mut parts = Vec::new();
    let mut atoms = 0usize;
    for s in &states {
        let c = admissible_at_state(template, psi_t, bound, s);
        atoms += c.atom_count();
        if atoms > atom_cap {
            return Err(format!(
                "one-shot encoding exceeds {atom_cap} atoms after {} of {} states",
                parts.len(),
                states.len()
            ));
        }
        parts.push(c);
    }
    Ok(Constraint::and(parts))
}

/// Reads the program variables of a model back into a state.
pub fn state_of_model(model: &[(String, Rat)], decls: &Decls) -> Result<State, String> {
    let mut vals = Vec::with_capacity(decls.len());
    for v in decls.ids() {
        let q = crate::smt::session::model_value(model, decls.name(v));
        if !q.is_integer() || q < Rat::zero() {
            return Err(format!(
                "model assigns {} to natural variable {}",
                q,
                decls.name(v)
            ));
        }
        let n: u64 = q
            .to_integer()
            .try_into()
            .map_err(|_| format!("model value too large for {}", decls.name(v)))?;
        vals.push(n);
    }
    Ok(State(vals))
}

/// Reads the listed template variables of a model into a valuation;
/// unconstrained variables default to zero.
pub fn valuation_of_model(
    model: &[(String, Rat)],
    tvars: impl IntoIterator<Item = crate::expect::TVarId>,
) -> Valuation {
    let mut v = Valuation::default();
    for t in tvars {
        let name = crate::expect::tvar_name(t);
        v.set(t, crate::smt::session::model_value(model, &name));
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expect::{LinExp, Piece};
    use crate::parser::{parse_expectation, parse_program};
    use crate::scalar::Scalar;
    use crate::smt::session::{SatResult, Session, SolverConfig};
    use crate::syntax::State;

    const COIN: &str = "\
nat c [0, 1];
nat x [0, 100];

while (c < 1 & x < 100) {
    { c := 1 } [1/2] { x := x + 1 }
}
";

    fn assert_sat_state(c: &Constraint, decls: &Decls) -> Option<State> {
        let mut sess = Session::new(&SolverConfig::default()).unwrap();
        sess.assert_constraint(c, decls).unwrap();
        match sess.check_sat().unwrap() {
            SatResult::Sat => {
                Some(state_of_model(&sess.get_model().unwrap(), decls).unwrap())
            }
            _ => None,
        }
    }

    #[test]
    fn verifier_finds_negative_piece() {
        let prog = parse_program(COIN).unwrap();
        // x - 50 goes negative below x = 50
        let inv = parse_expectation("[c <= 1]*(x - 50)", &prog.decls).unwrap();
        let q = violation_query(&inv, &inv, &Piecewise::constant(crate::expect::Val::Inf),
            Condition::WellDefined);
        let s = assert_sat_state(&q, &prog.decls).expect("violation expected");
        assert!((s.0[1] as i64) < 50);
    }

    #[test]
    fn verifier_accepts_exact_value() {
        let prog = parse_program(COIN).unwrap();
        let f = parse_expectation("[c = 1]", &prog.decls).unwrap();
        // the constant one expectation is a fixed point wherever the
        // loop can still terminate
        let one = parse_expectation("[c <= 1]*(1)", &prog.decls).unwrap();
        let mut sess = Session::new(&SolverConfig::default()).unwrap();
        let psi = crate::wp::char_fun(&prog, &f, &one, &mut sess).unwrap();
        for cond in [Condition::WellDefined, Condition::Inductive] {
            let q = violation_query(&one, &psi, &Piecewise::constant(crate::expect::Val::Inf), cond);
            assert!(assert_sat_state(&q, &prog.decls).is_none(), "{}", cond.name());
        }
    }

    #[test]
    fn admissibility_pins_template_at_states() {
        let prog = parse_program(COIN).unwrap();
        let f = parse_expectation("[c = 1]", &prog.decls).unwrap();
        let phi = BoolExpr::from_guard(&prog.guard);
        // template [phi]*t0 + [!phi]*f: a single unknown constant
        let mut pieces = vec![Piece {
            guard: phi.clone(),
            body: Body::Fin(LinExp::tvar(0)),
        }];
        for p in &f.pieces {
            pieces.push(Piece {
                guard: p.guard.clone().and(phi.clone().not()),
                body: p.body.clone(),
            });
        }
        let template = Piecewise { pieces };
        let mut sess = Session::new(&SolverConfig::default()).unwrap();
        let psi = crate::wp::char_fun(&prog, &f, &template, &mut sess).unwrap();
        let bound = parse_expectation("[c <= 1]*(1)", &prog.decls).unwrap();
        // at state (0, 99): step is 1/2*f(1,99) + 1/2*T(0,100) =
        // 1/2*1 + 1/2*0 = 1/2, so t0 must be at least 1/2
        let c = admissible_at_state(&template, &psi, &bound, &State(vec![0, 99]));
        let mut s2 = Session::new(&SolverConfig::default()).unwrap();
        s2.assert_constraint(&c, &prog.decls).unwrap();
        assert_eq!(s2.check_sat().unwrap(), SatResult::Sat);
        let val = valuation_of_model(&s2.get_model().unwrap(), [0]);
        assert!(*val.get(0) >= Rat::ratio(1, 2));
        assert!(*val.get(0) <= Rat::one());
    }

    #[test]
    fn distance_constraint_excludes_near_states() {
        let prog = parse_program(COIN).unwrap();
        let anchor = State(vec![0, 10]);
        let c = distance_at_least(&prog.decls, &anchor, &Rat::from_u64(5));
        // conjoin distance with a box pinning c=0, 8 <= x <= 12: all
        // such states are within distance 5 except none; 0+|x-10|<=2+0
        let mut sess = Session::new(&SolverConfig::default()).unwrap();
        sess.assert_constraint(&c, &prog.decls).unwrap();
        let pin = parse_expectation("[c <= 0 & 8 <= x & x <= 12]", &prog.decls).unwrap();
        sess.assert_constraint(&bool_constraint(&pin.pieces[0].guard), &prog.decls)
            .unwrap();
        assert_eq!(sess.check_sat().unwrap(), SatResult::Unsat);
    }

    #[test]
    fn one_shot_covers_small_box() {
        let src = "\
nat c [0, 1];

while (c < 1) {
    { c := 1 } [1/2] { skip }
}
";
        let prog = parse_program(src).unwrap();
        let f = parse_expectation("[c = 1]", &prog.decls).unwrap();
        let phi = BoolExpr::from_guard(&prog.guard);
        let mut pieces = vec![Piece { guard: phi.clone(), body: Body::Fin(LinExp::tvar(0)) }];
        for p in &f.pieces {
            pieces.push(Piece {
                guard: p.guard.clone().and(phi.clone().not()),
                body: p.body.clone(),
            });
        }
        let template = Piecewise { pieces };
        let mut sess = Session::new(&SolverConfig::default()).unwrap();
        let psi = crate::wp::char_fun(&prog, &f, &template, &mut sess).unwrap();
        let bound = Piecewise::constant(crate::expect::Val::Inf);
        let c = one_shot(&template, &psi, &bound, &prog.decls, 100, 10_000).unwrap();
        let mut s2 = Session::new(&SolverConfig::default()).unwrap();
        s2.assert_constraint(&c, &prog.decls).unwrap();
        assert_eq!(s2.check_sat().unwrap(), SatResult::Sat);
        let val = valuation_of_model(&s2.get_model().unwrap(), [0]);
        // the only admissible constants are t0 >= 1 (from the self loop
        // at c=0: 1/2 + 1/2*t0 <= t0)
        assert!(*val.get(0) >= Rat::one());
    }
}

//! Weakest preexpectation transformer for loop-free bodies, and the
//! loop's characteristic function.
//!
//! For a loop `while (phi) { C }` with postexpectation `f`, the
//! characteristic function is `X -> [!phi]*f + [phi]*wp(C, X)`; its least
//! fixed point is the exact expected value of `f` on termination. The
//! transformer distributes over guarded sums term by term, so it applies
//! unchanged to templates: transforming a template once and instantiating
//! coefficients afterwards agrees with instantiating first.

use crate::expect::{BoolExpr, GuardedSum, Piecewise};
use crate::normalize::normalize;
use crate::scalar::Rat;
use crate::smt::{Session, SessionError};
use crate::syntax::{LoopProgram, State, Stmt};
use num_traits::One;

/// Weakest preexpectation of a loop-free statement.
pub fn wp(stmt: &Stmt, post: &GuardedSum) -> GuardedSum {
    match stmt {
        Stmt::Skip => post.clone(),
        Stmt::Assign(x, e) => post.substitute(*x, e),
        Stmt::Seq(a, b) => wp(a, &wp(b, post)),
        Stmt::Choice(a, p, b) => {
            let left = wp(a, post).scale(p);
            let right = wp(b, post).scale(&(Rat::one() - p));
            left.concat(right)
        }
        Stmt::If(g, a, b) => {
            let gb = BoolExpr::from_guard(g);
            let then = wp(a, post).gate(&gb);
            let els = wp(b, post).gate(&gb.not());
            then.concat(els)
        }
    }
}

/// One application of the characteristic function, returned in
/// partitioned form: `[!phi]*f + [phi]*wp(body, x)`.
pub fn char_fun(
    prog: &LoopProgram,
    f: &Piecewise,
    x: &Piecewise,
    sess: &mut Session,
) -> Result<Piecewise, SessionError> {
    let phi = BoolExpr::from_guard(&prog.guard);
    let f_sum = GuardedSum::from_piecewise(f)
        .expect("postexpectation must be finite")
        .gate(&phi.clone().not());
    let x_sum = GuardedSum::from_piecewise(x).expect("argument must be finite");
    let inner = wp(&prog.body, &x_sum).gate(&phi);
    normalize(&f_sum.concat(inner), &prog.decls, sess)
}

/// Exact distribution over successor states of one execution of a
/// loop-free statement. Fails if an assignment goes below zero, which
/// the frontend's static check rules out for accepted programs.
pub fn distribution(stmt: &Stmt, s: &State) -> Result<Vec<(State, Rat)>, String> {
    let mut out: Vec<(State, Rat)> = Vec::new();
    let mut push = |state: State, p: Rat| {
        for (t, q) in out.iter_mut() {
            if *t == state {
                *q += p;
                return;
            }
        }
        out.push((state, p));
    };
    match stmt {
        Stmt::Skip => push(s.clone(), Rat::one()),
        Stmt::Assign(x, e) => {
            let v = e.eval(s);
            let v: u64 = v
                .try_into()
                .map_err(|_| format!("assignment out of range at state {s}: value {v}"))?;
            push(s.set(*x, v), Rat::one());
        }
        Stmt::Seq(a, b) => {
            for (mid, p) in distribution(a, s)? {
                for (end, q) in distribution(b, &mid)? {
                    push(end, &p * &q);
                }
            }
        }
        Stmt::Choice(a, p, b) => {
            for (t, q) in distribution(a, s)? {
                push(t, p * &q);
            }
            let pc = Rat::one() - p;
            for (t, q) in distribution(b, s)? {
                push(t, &pc * &q);
            }
        }
        Stmt::If(g, a, b) => {
            let branch = if g.holds(s) { a } else { b };
            for (t, q) in distribution(branch, s)? {
                push(t, q);
            }
        }
    }
    Ok(out)
}

/// Independent oracle for wp: the expected value of `post` over the
/// distribution of successor states.
pub fn expected_value(
    stmt: &Stmt,
    s: &State,
    post: &dyn Fn(&State) -> Rat,
) -> Result<Rat, String> {
    let mut acc = Rat::from_integer(0.into());
    for (t, p) in distribution(stmt, s)? {
        acc += p * post(&t);
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expect::{LinExp, Val};
    use crate::parser::{parse_expectation, parse_program};
    use crate::scalar::Scalar;
    use crate::smt::{Session, SolverConfig};

    const BRP: &str = "\
nat failed [0, 5];
nat sent [0, 8000000];

while (failed < 5 & sent < 8000000) {
    { failed := 0; sent := sent + 1 } [99/100] { failed := failed + 1 }
}
";

    #[test]
    fn wp_matches_expected_value_on_samples() {
        let prog = parse_program(BRP).unwrap();
        let f = parse_expectation("[failed = 5]", &prog.decls).unwrap();
        let f_sum = GuardedSum::from_piecewise(&f).unwrap();
        let pre = wp(&prog.body, &f_sum);
        for failed in 0..6u64 {
            for sent in [0u64, 1, 100, 7_999_999] {
                let s = State(vec![failed, sent]);
                let direct = expected_value(&prog.body, &s, &|t| match f.eval(t) {
                    Val::Fin(q) => q,
                    Val::Inf => unreachable!(),
                })
                .unwrap();
                assert_eq!(pre.eval(&s), direct, "at {s}");
            }
        }
    }

    #[test]
    fn char_fun_fixes_postexpectation_outside_guard() {
        let prog = parse_program(BRP).unwrap();
        let f = parse_expectation("[failed = 5]", &prog.decls).unwrap();
        let mut sess = Session::new(&SolverConfig::default()).unwrap();
        let phi_f = char_fun(&prog, &f, &f, &mut sess).unwrap();
        // outside the guard the loop is done: value is f itself
        let done = State(vec![5, 123]);
        assert_eq!(phi_f.eval(&done), Val::Fin(Rat::one()));
        // inside, one step: from failed=4 the failure branch reaches
        // failed=5 (worth 1), the success branch resets (worth 0)
        let stepping = State(vec![4, 10]);
        assert_eq!(phi_f.eval(&stepping), Val::Fin(Rat::ratio(1, 100)));
    }

    #[test]
    fn transform_commutes_with_instantiation() {
        use crate::expect::{Body, BoolExpr, Piece, TCoeff, Valuation};
        let prog = parse_program(BRP).unwrap();
        let phi = BoolExpr::from_guard(&prog.guard);
        // template [phi]*(t0*sent + t1*failed + t2) + [!phi]*f
        let mut body = LinExp::tvar(2);
        body.coeffs.insert(1, TCoeff::tvar(0));
        body.coeffs.insert(0, TCoeff::tvar(1));
        let f = parse_expectation("[failed = 5]", &prog.decls).unwrap();
        let mut pieces = vec![Piece { guard: phi.clone(), body: Body::Fin(body) }];
        for p in &f.pieces {
            pieces.push(Piece {
                guard: p.guard.clone().and(phi.clone().not()),
                body: p.body.clone(),
            });
        }
        let template = crate::expect::Piecewise { pieces };

        let mut sess = Session::new(&SolverConfig::default()).unwrap();
        let transformed = char_fun(&prog, &f, &template, &mut sess).unwrap();

        let mut v = Valuation::default();
        v.set(0, Rat::ratio(-9, 80_000_000));
        v.set(1, Rat::ratio(79_991, 720_000_000));
        v.set(2, Rat::ratio(9, 10));
        let inst_then_transform =
            char_fun(&prog, &f, &template.instantiate(&v), &mut sess).unwrap();
        let transform_then_inst = transformed.instantiate(&v);
        for failed in 0..6u64 {
            for sent in [0u64, 5, 7_999_999, 8_000_000] {
                let s = State(vec![failed, sent]);
                assert_eq!(
                    transform_then_inst.eval(&s),
                    inst_then_transform.eval(&s),
                    "at {s}"
                );
            }
        }
    }
}

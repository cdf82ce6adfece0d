//! Counterexample-guided synthesis of inductive invariant coefficients.
//!
//! The loop alternates a synthesizer and a verifier. The synthesizer
//! proposes template coefficients that make the candidate admissible at
//! every counterexample state collected so far; the verifier searches
//! the full state space for a state where the instantiated candidate
//! fails well-definedness, inductivity, or the upper bound, in that
//! order. An unsatisfiable synthesis query proves that no instance of
//! the template is an admissible invariant.
//!
//! The cooperative variant first asks the verifier for a counterexample
//! far away from the previous one (in Manhattan distance), growing the
//! required distance after each success and shrinking it after each
//! fallback; this cuts long chains of adjacent counterexamples.
//!
//! The safe synthesizer additionally asserts certificate constraints
//! making every proposed candidate well defined and within the bound by
//! construction, so only inductivity can fail at verification.

use std::collections::BTreeSet;
use std::io::Write;
use std::time::Instant;

use num_traits::One;
use serde::Serialize;

use crate::expect::{Body, LinExp, Piecewise, TVarId, Valuation};
use crate::parser::Property;
use crate::scalar::{display_rat, Rat};
use crate::smt::motzkin::{motzkin_encode, AuxGen, UniversalImplication};
use crate::smt::queries::{
    admissible_at_state, distance_at_least, state_of_model, valuation_of_model,
    violation_query, Condition,
};
use crate::smt::{Constraint, SatResult, Session, SessionError, SolverConfig};
use crate::syntax::{LoopProgram, State};
use crate::wp::char_fun;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthMode {
    Plain,
    Safe,
}

#[derive(Debug, Clone)]
pub struct CegisConfig {
    /// Maximum number of synthesize/verify rounds.
    pub budget: usize,
    /// Cooperative verification factor `d`; `None` disables the
    /// distance heuristic.
    pub coop_factor: Option<Rat>,
    pub mode: SynthMode,
    /// Overall wall clock cutoff.
    pub deadline: Option<Instant>,
}

impl Default for CegisConfig {
    fn default() -> Self {
        CegisConfig {
            budget: 5000,
            coop_factor: Some(Rat::from_integer(2.into())),
            mode: SynthMode::Plain,
            deadline: None,
        }
    }
}

#[derive(Debug)]
pub enum CegisOutcome {
    /// The instantiated template is an inductive invariant within the
    /// bound.
    Invariant { valuation: Valuation, invariant: Piecewise },
    /// No instance of the template is admissible.
    NoInstance,
    /// Search gave up: solver unknown, timeout, or budget exhausted.
    Inconclusive { reason: String },
}

#[derive(Debug)]
pub struct CegisReport {
    pub outcome: CegisOutcome,
    /// Counterexample states in discovery order.
    pub states: Vec<State>,
    pub iterations: usize,
    /// The most recent rejected candidate and its one-step transform,
    /// kept for inductivity-guided template refinement.
    pub last_candidate: Option<(Piecewise, Piecewise)>,
}

#[derive(Debug, thiserror::Error)]
pub enum CegisError {
    #[error("solver session failed: {0}")]
    Session(#[from] SessionError),
    #[error("encoding failed: {0}")]
    Encoding(String),
}

#[derive(Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
enum TraceEvent<'a> {
    Candidate { iter: usize, valuation: Vec<(String, String)> },
    Counterexample {
        iter: usize,
        condition: Condition,
        state: &'a [u64],
        distance_bound: Option<String>,
        via_fallback: bool,
    },
    Outcome { iter: usize, result: &'a str, reason: Option<&'a str> },
}

fn emit_trace<W: Write + ?Sized>(trace: &mut Option<&mut W>, event: &TraceEvent) {
    if let Some(w) = trace {
        if let Ok(line) = serde_json::to_string(event) {
            let _ = writeln!(w, "{line}");
        }
    }
}

/// Runs the synthesis loop for one template.
pub fn run_cegis<W: Write + ?Sized>(
    prog: &LoopProgram,
    prop: &Property,
    template: &Piecewise,
    solver: &SolverConfig,
    cfg: &CegisConfig,
    mut trace: Option<&mut W>,
) -> Result<CegisReport, CegisError> {
    let decls = &prog.decls;
    let mut verify_sess = Session::new(solver)?;
    let psi_t = match char_fun(prog, &prop.post, template, &mut verify_sess) {
        Ok(p) => p,
        Err(e) => return Err(CegisError::Session(e)),
    };
    let tvars: BTreeSet<TVarId> =
        template.tvars().union(&psi_t.tvars()).copied().collect();

    let mut synth_sess = Session::new(solver)?;
    // keep every template variable in the model even before it is
    // mentioned by a constraint
    for &t in &tvars {
        synth_sess.declare(crate::smt::Sym::TVar(t), decls)?;
    }
    if cfg.mode == SynthMode::Safe {
        assert_safety_certificates(&mut synth_sess, prog, template, &prop.bound)?;
    }

    let mut states: Vec<State> = Vec::new();
    let mut seen: BTreeSet<State> = BTreeSet::new();
    let mut last_cex: Option<State> = None;
    let mut last: Option<(Piecewise, Piecewise)> = None;
    let mut m = Rat::one();

    for iter in 0..cfg.budget {
        if let Some(d) = cfg.deadline {
            if Instant::now() >= d {
                return finishing(states, iter, last, &mut trace, "timeout", "wall clock budget spent");
            }
        }
        // synthesize a candidate admissible at all collected states
        let val = match synth_sess.check_sat() {
            Ok(SatResult::Sat) => {
                let model = synth_sess.get_model()?;
                valuation_of_model(&model, tvars.iter().copied())
            }
            Ok(SatResult::Unsat) => {
                emit_trace(
                    &mut trace,
                    &TraceEvent::Outcome { iter, result: "no_instance", reason: None },
                );
                return Ok(CegisReport {
                    outcome: CegisOutcome::NoInstance,
                    states,
                    iterations: iter,
                    last_candidate: last.take(),
                });
            }
            Ok(SatResult::Unknown) => {
                return finishing(states, iter, last.take(), &mut trace, "inconclusive", "synthesizer unknown")
            }
            Err(SessionError::Timeout) => {
                return finishing(states, iter, last.take(), &mut trace, "inconclusive", "synthesizer timeout")
            }
            Err(e) => return Err(e.into()),
        };
        emit_trace(
            &mut trace,
            &TraceEvent::Candidate {
                iter,
                valuation: val
                    .0
                    .iter()
                    .map(|(t, q)| (crate::expect::tvar_name(*t), display_rat(q)))
                    .collect(),
            },
        );

        let inv = template.instantiate(&val);
        let psi_inv = psi_t.instantiate(&val);
        last = Some((inv.clone(), psi_inv.clone()));

        // verify in fixed condition order
        let mut found: Option<(Condition, State, bool)> = None;
        for cond in Condition::ALL {
            let q = violation_query(&inv, &psi_inv, &prop.bound, cond);
            if q == Constraint::False {
                continue;
            }
            let anchored = match (&cfg.coop_factor, &last_cex) {
                (Some(_), Some(anchor)) => Some(distance_at_least(decls, anchor, &m)),
                _ => None,
            };
            if let Some(dist) = anchored {
                match query_state(&mut verify_sess, decls, &[&q, &dist]) {
                    QueryResult::State(s) => {
                        found = Some((cond, s, false));
                        break;
                    }
                    QueryResult::Unsat => match query_state(&mut verify_sess, decls, &[&q]) {
                        QueryResult::State(s) => {
                            found = Some((cond, s, true));
                            break;
                        }
                        QueryResult::Unsat => continue,
                        QueryResult::Stop(r) => {
                            return finishing(states, iter, last.take(), &mut trace, "inconclusive", r)
                        }
                        QueryResult::Fail(e) => return Err(e),
                    },
                    QueryResult::Stop(r) => {
                        return finishing(states, iter, last.take(), &mut trace, "inconclusive", r)
                    }
                    QueryResult::Fail(e) => return Err(e),
                }
            } else {
                match query_state(&mut verify_sess, decls, &[&q]) {
                    QueryResult::State(s) => {
                        found = Some((cond, s, false));
                        break;
                    }
                    QueryResult::Unsat => continue,
                    QueryResult::Stop(r) => {
                        return finishing(states, iter, last.take(), &mut trace, "inconclusive", r)
                    }
                    QueryResult::Fail(e) => return Err(e),
                }
            }
        }

        let Some((cond, cex, via_fallback)) = found else {
            emit_trace(
                &mut trace,
                &TraceEvent::Outcome { iter, result: "invariant", reason: None },
            );
            return Ok(CegisReport {
                outcome: CegisOutcome::Invariant { valuation: val, invariant: inv },
                states,
                iterations: iter + 1,
                last_candidate: None,
            });
        };

        if let Some(d) = &cfg.coop_factor {
            if last_cex.is_some() {
                if via_fallback {
                    m /= d;
                } else {
                    m *= d;
                }
            }
        }
        emit_trace(
            &mut trace,
            &TraceEvent::Counterexample {
                iter,
                condition: cond,
                state: &cex.0,
                distance_bound: cfg.coop_factor.as_ref().map(|_| display_rat(&m)),
                via_fallback,
            },
        );
        // a repeated counterexample would mean the synthesizer accepted
        // a state it was already constrained on: an encoding bug
        assert!(
            seen.insert(cex.clone()),
            "counterexample {cex} repeated; verifier and synthesizer disagree"
        );
        synth_sess
            .assert_constraint(&admissible_at_state(template, &psi_t, &prop.bound, &cex), decls)?;
        states.push(cex.clone());
        last_cex = Some(cex);
    }
    finishing(states, cfg.budget, last, &mut trace, "inconclusive", "iteration budget exhausted")
}

fn finishing<W: Write + ?Sized>(
    states: Vec<State>,
    iterations: usize,
    last_candidate: Option<(Piecewise, Piecewise)>,
    trace: &mut Option<&mut W>,
    result: &str,
    reason: &str,
) -> Result<CegisReport, CegisError> {
    emit_trace(
        trace,
        &TraceEvent::Outcome { iter: iterations, result, reason: Some(reason) },
    );
    Ok(CegisReport {
        outcome: CegisOutcome::Inconclusive { reason: reason.to_string() },
        states,
        iterations,
        last_candidate,
    })
}

enum QueryResult {
    State(State),
    Unsat,
    Stop(&'static str),
    Fail(CegisError),
}

fn query_state(
    sess: &mut Session,
    decls: &crate::syntax::Decls,
    parts: &[&Constraint],
) -> QueryResult {
    let mut run = || -> Result<QueryResult, SessionError> {
        sess.push()?;
        for c in parts {
            sess.assert_constraint(c, decls)?;
        }
        let r = match sess.check_sat()? {
            SatResult::Sat => {
                let model = sess.get_model()?;
                match state_of_model(&model, decls) {
                    Ok(s) => QueryResult::State(s),
                    Err(e) => QueryResult::Fail(CegisError::Encoding(e)),
                }
            }
            SatResult::Unsat => QueryResult::Unsat,
            SatResult::Unknown => QueryResult::Stop("verifier unknown"),
        };
        sess.pop()?;
        Ok(r)
    };
    match run() {
        Ok(r) => r,
        Err(SessionError::Timeout) => QueryResult::Stop("verifier timeout"),
        Err(e) => QueryResult::Fail(e.into()),
    }
}

/// Asserts certificates forcing well-definedness and the upper bound
/// for every template piece with unknown coefficients, over the whole
/// region of the piece.
fn assert_safety_certificates(
    sess: &mut Session,
    prog: &LoopProgram,
    template: &Piecewise,
    bound: &Piecewise,
) -> Result<(), CegisError> {
    if !template.fixed_partition() {
        return Err(CegisError::Encoding(
            "safe synthesis requires a fixed partition template".to_string(),
        ));
    }
    let decls = &prog.decls;
    let mut aux = AuxGen::new();
    for piece in &template.pieces {
        let Body::Fin(body) = &piece.body else { continue };
        let mut tv = BTreeSet::new();
        body.tvars(&mut tv);
        if tv.is_empty() {
            // concrete pieces carry the postexpectation; nothing to
            // constrain
            continue;
        }
        let zero = LinExp::zero();
        let well = UniversalImplication::new(&piece.guard, &zero, body, decls)
            .ok_or_else(|| {
                CegisError::Encoding(
                    "safe synthesis needs conjunctive piece guards".to_string(),
                )
            })?;
        sess.assert_constraint(&motzkin_encode(&well, decls, &mut aux), decls)?;
        for bpiece in &bound.pieces {
            let Body::Fin(limit) = &bpiece.body else { continue };
            let region = piece.guard.clone().and(bpiece.guard.clone());
            if region.syntactically_false() {
                continue;
            }
            let safe = UniversalImplication::new(&region, body, limit, decls)
                .ok_or_else(|| {
                    CegisError::Encoding(
                        "safe synthesis needs conjunctive bound guards".to_string(),
                    )
                })?;
            sess.assert_constraint(&motzkin_encode(&safe, decls, &mut aux), decls)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expect::{BoolExpr, Piece};
    use crate::parser::{parse_program, parse_property};

    const COIN: &str = "\
nat c [0, 1];
nat x [0, 100];

while (c < 1 & x < 100) {
    { c := 1 } [1/2] { x := x + 1 }
}
";

    fn natural_template(prog: &LoopProgram, f: &Piecewise, free: LinExp) -> Piecewise {
        let phi = BoolExpr::from_guard(&prog.guard);
        let mut pieces = vec![Piece { guard: phi.clone(), body: Body::Fin(free) }];
        for p in &f.pieces {
            pieces.push(Piece {
                guard: p.guard.clone().and(phi.clone().not()),
                body: p.body.clone(),
            });
        }
        Piecewise { pieces }
    }

    #[test]
    fn finds_constant_invariant_for_coin_loop() {
        let prog = parse_program(COIN).unwrap();
        let prop = parse_property("post: [c = 1]\npre: [c <= 1]*(1)", &prog.decls).unwrap();
        let f = prop.post.clone();
        let template = natural_template(&prog, &f, LinExp::tvar(0));
        let report = run_cegis(
            &prog,
            &prop,
            &template,
            &SolverConfig::default(),
            &CegisConfig::default(),
            None::<&mut Vec<u8>>,
        )
        .unwrap();
        match report.outcome {
            CegisOutcome::Invariant { valuation, invariant } => {
                // the only admissible constant on the guard region is 1
                assert_eq!(*valuation.get(0), Rat::one());
                assert!(invariant.is_concrete());
            }
            other => panic!("expected invariant, got {other:?}"),
        }
    }

    #[test]
    fn reports_no_instance_when_bound_too_tight() {
        let prog = parse_program(COIN).unwrap();
        // from (0,99) the loop terminates with c=1 with probability 1/2,
        // so 1/4 everywhere is unachievable for any constant template
        let prop =
            parse_property("post: [c = 1]\npre: [c <= 1]*(1/4)", &prog.decls).unwrap();
        let f = prop.post.clone();
        let template = natural_template(&prog, &f, LinExp::tvar(0));
        let report = run_cegis(
            &prog,
            &prop,
            &template,
            &SolverConfig::default(),
            &CegisConfig::default(),
            None::<&mut Vec<u8>>,
        )
        .unwrap();
        assert!(matches!(report.outcome, CegisOutcome::NoInstance), "{:?}", report.outcome);
    }

    #[test]
    fn safe_mode_also_succeeds() {
        let prog = parse_program(COIN).unwrap();
        let prop = parse_property("post: [c = 1]\npre: [c <= 1]*(1)", &prog.decls).unwrap();
        let f = prop.post.clone();
        let template = natural_template(&prog, &f, LinExp::tvar(0));
        let cfg = CegisConfig { mode: SynthMode::Safe, ..CegisConfig::default() };
        let report = run_cegis(
            &prog,
            &prop,
            &template,
            &SolverConfig::default(),
            &cfg,
            None::<&mut Vec<u8>>,
        )
        .unwrap();
        match report.outcome {
            CegisOutcome::Invariant { valuation, .. } => {
                assert_eq!(*valuation.get(0), Rat::one());
            }
            other => panic!("expected invariant, got {other:?}"),
        }
    }

    #[test]
    fn trace_is_json_lines() {
        let prog = parse_program(COIN).unwrap();
        let prop = parse_property("post: [c = 1]\npre: [c <= 1]*(1)", &prog.decls).unwrap();
        let f = prop.post.clone();
        let template = natural_template(&prog, &f, LinExp::tvar(0));
        let mut buf: Vec<u8> = Vec::new();
        run_cegis(
            &prog,
            &prop,
            &template,
            &SolverConfig::default(),
            &CegisConfig::default(),
            Some(&mut buf),
        )
        .unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(!text.is_empty());
        for line in text.lines() {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            assert!(v.get("event").is_some());
        }
        assert!(text.lines().last().unwrap().contains("invariant"));
    }
}

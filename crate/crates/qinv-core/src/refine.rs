//! Template generation and refinement.
//!
//! The initial template partitions the guard region by the branch
//! structure of the loop body and puts a fresh affine expression on each
//! cell; outside the guard it carries the postexpectation verbatim.
//! When no instance of a template is admissible, the partition is
//! refined and the search restarted. Three strategies are available:
//! static hyperrectangle splitting of the declared variable ranges,
//! dynamic splitting at synthesized boundary values, and splitting
//! along the frontier where the last rejected candidate was locally
//! inductive.

use std::io::Write;

use crate::cegis::{run_cegis, CegisConfig, CegisError, CegisOutcome, CegisReport};
use crate::expect::{
    Body, BoolExpr, LinExp, Piece, Piecewise, TCoeff, TVarGen, Valuation,
};
use crate::normalize::cell_nonempty;
use crate::parser::Property;
use crate::scalar::{Rat, Scalar};
use crate::smt::{Session, SessionError, SolverConfig};
use crate::syntax::{Decls, LoopProgram, Stmt};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    Static,
    Dynamic,
    Inductivity,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Static => "static",
            Strategy::Dynamic => "dynamic",
            Strategy::Inductivity => "inductivity",
        }
    }
}

/// A fresh affine expression over all program variables, with one new
/// template variable per coefficient.
fn fresh_affine(decls: &Decls, gen: &mut TVarGen) -> LinExp {
    let mut e = LinExp::constant(TCoeff::tvar(gen.fresh()));
    for x in decls.ids() {
        e.coeffs.insert(x, TCoeff::tvar(gen.fresh()));
    }
    e
}

/// Path conditions of a loop-free statement: the guard combinations a
/// single execution can observe. Probabilistic choices and sequencing
/// combine the conditions of both sides; conditionals split.
fn paths(stmt: &Stmt) -> Vec<BoolExpr> {
    match stmt {
        Stmt::Skip | Stmt::Assign(..) => vec![BoolExpr::True],
        Stmt::Seq(a, b) | Stmt::Choice(a, _, b) => {
            let pa = paths(a);
            let pb = paths(b);
            let mut out = Vec::with_capacity(pa.len() * pb.len());
            for x in &pa {
                for y in &pb {
                    out.push(x.clone().and(y.clone()));
                }
            }
            out
        }
        Stmt::If(g, a, b) => {
            let phi = BoolExpr::from_guard(g);
            let mut out: Vec<BoolExpr> =
                paths(a).into_iter().map(|p| phi.clone().and(p)).collect();
            out.extend(paths(b).into_iter().map(|p| phi.clone().not().and(p)));
            out
        }
    }
}

/// Satisfiable, deduplicated guard-region cells: loop guard conjoined
/// with each branch-path condition of the body.
fn guard_cells(
    prog: &LoopProgram,
    sess: &mut Session,
) -> Result<Vec<BoolExpr>, SessionError> {
    let phi = BoolExpr::from_guard(&prog.guard);
    let mut cells: Vec<BoolExpr> = Vec::new();
    for p in paths(&prog.body) {
        let cell = phi.clone().and(p);
        if cells.contains(&cell) {
            continue;
        }
        if cell_nonempty(&cell, &prog.decls, sess)? {
            cells.push(cell);
        }
    }
    Ok(cells)
}

/// Pieces outside the loop guard, carrying the postexpectation
/// unchanged.
fn carried_pieces(
    prog: &LoopProgram,
    f: &Piecewise,
    sess: &mut Session,
) -> Result<Vec<Piece>, SessionError> {
    let not_phi = BoolExpr::from_guard(&prog.guard).not();
    let mut out = Vec::new();
    for p in &f.pieces {
        let guard = p.guard.clone().and(not_phi.clone());
        if cell_nonempty(&guard, &prog.decls, sess)? {
            out.push(Piece { guard, body: p.body.clone() });
        }
    }
    Ok(out)
}

fn assemble(mut pieces: Vec<Piece>, carried: Vec<Piece>) -> Piecewise {
    pieces.extend(carried);
    let mut pw = Piecewise { pieces };
    pw.sort_pieces();
    pw
}

/// The natural template for a loop: fresh affine pieces on the guard
/// region split by branch-path conditions, postexpectation outside.
pub fn initial_template(
    prog: &LoopProgram,
    f: &Piecewise,
    gen: &mut TVarGen,
    sess: &mut Session,
) -> Result<Piecewise, SessionError> {
    let free = guard_cells(prog, sess)?
        .into_iter()
        .map(|guard| Piece { guard, body: Body::Fin(fresh_affine(&prog.decls, gen)) })
        .collect();
    Ok(assemble(free, carried_pieces(prog, f, sess)?))
}

#[derive(Debug, thiserror::Error)]
pub enum RefineError {
    #[error("static refinement requires every variable to be bounded")]
    Unbounded,
    #[error("solver session failed: {0}")]
    Session(#[from] SessionError),
}

/// Splits the declared range of each variable into `round` near-equal
/// left-closed integer intervals (fewer when the range is shorter) and
/// refines every guard-region cell by the resulting hyperrectangles.
pub fn refine_static(
    prog: &LoopProgram,
    f: &Piecewise,
    round: u64,
    gen: &mut TVarGen,
    sess: &mut Session,
) -> Result<Piecewise, RefineError> {
    let decls = &prog.decls;
    if !decls.all_bounded() {
        return Err(RefineError::Unbounded);
    }
    // per-variable interval guards
    let mut dims: Vec<Vec<BoolExpr>> = Vec::new();
    for x in decls.ids() {
        let (lo, hi) = decls.bounds(x);
        let hi = hi.expect("bounded");
        let size = hi - lo + 1;
        let k = round.min(size);
        let base = size / k;
        let rem = size % k;
        let mut intervals = Vec::with_capacity(k as usize);
        let mut start = lo;
        for j in 0..k {
            let width = base + u64::from(j < rem);
            let end = start + width - 1;
            let ge = BoolExpr::le(LinExp::rat(Rat::from_u64(start)), LinExp::var(x));
            let le = BoolExpr::le(LinExp::var(x), LinExp::rat(Rat::from_u64(end)));
            intervals.push(ge.and(le));
            start = end + 1;
        }
        dims.push(intervals);
    }
    // cross product of the interval guards
    let mut rects = vec![BoolExpr::True];
    for dim in dims {
        let mut next = Vec::with_capacity(rects.len() * dim.len());
        for r in &rects {
            for iv in &dim {
                next.push(r.clone().and(iv.clone()));
            }
        }
        rects = next;
    }
    let mut free = Vec::new();
    for cell in guard_cells(prog, sess)? {
        for r in &rects {
            let guard = cell.clone().and(r.clone());
            if cell_nonempty(&guard, decls, sess)? {
                free.push(Piece { guard, body: Body::Fin(fresh_affine(decls, gen)) });
            }
        }
    }
    Ok(assemble(free, carried_pieces(prog, f, sess)?))
}

/// Splits every free piece of the previous template at a fresh
/// synthesized boundary per program variable. The two sides of each
/// boundary are complementary literals, so the result partitions the
/// state space for every choice of boundary values.
pub fn refine_dynamic(prev: &Piecewise, prog: &LoopProgram, gen: &mut TVarGen) -> Piecewise {
    let decls = &prog.decls;
    let mut pieces = Vec::new();
    for p in &prev.pieces {
        if piece_is_concrete(p) {
            pieces.push(p.clone());
            continue;
        }
        let mut cells = vec![p.guard.clone()];
        for x in decls.ids() {
            let lam = LinExp::tvar(gen.fresh());
            let mut next = Vec::with_capacity(cells.len() * 2);
            for c in cells {
                let below = BoolExpr::le(LinExp::var(x), lam.clone());
                let above = below.clone().not();
                next.push(c.clone().and(below));
                next.push(c.and(above));
            }
            cells = next;
        }
        for guard in cells {
            pieces.push(Piece { guard, body: Body::Fin(fresh_affine(decls, gen)) });
        }
    }
    let mut pw = Piecewise { pieces };
    pw.sort_pieces();
    pw
}

fn piece_is_concrete(p: &Piece) -> bool {
    let mut tv = std::collections::BTreeSet::new();
    p.guard.tvars(&mut tv);
    if let Body::Fin(e) = &p.body {
        e.tvars(&mut tv);
    }
    tv.is_empty()
}

/// Splits each free piece along the frontier where the last rejected
/// candidate took a locally inductive step: cells where one application
/// of the loop transform does not increase the candidate, and cells
/// where it does. Both candidate and transform are concrete, so the
/// frontier predicates are linear in the program variables and the
/// partition stays fixed.
pub fn refine_inductivity(
    prev: &Piecewise,
    last_inv: &Piecewise,
    psi_last: &Piecewise,
    prog: &LoopProgram,
    gen: &mut TVarGen,
    sess: &mut Session,
) -> Result<Piecewise, SessionError> {
    let decls = &prog.decls;
    let mut pieces = Vec::new();
    for p in &prev.pieces {
        if piece_is_concrete(p) {
            pieces.push(p.clone());
            continue;
        }
        for step_p in &psi_last.pieces {
            let Body::Fin(step) = &step_p.body else { continue };
            for have_p in &last_inv.pieces {
                let Body::Fin(have) = &have_p.body else { continue };
                let region = p
                    .guard
                    .clone()
                    .and(step_p.guard.clone())
                    .and(have_p.guard.clone());
                let covered = BoolExpr::le(step.clone(), have.clone());
                for half in [covered.clone(), covered.not()] {
                    let guard = region.clone().and(half);
                    if cell_nonempty(&guard, decls, sess)? {
                        pieces
                            .push(Piece { guard, body: Body::Fin(fresh_affine(decls, gen)) });
                    }
                }
            }
        }
    }
    let mut pw = Piecewise { pieces };
    pw.sort_pieces();
    Ok(pw)
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct RoundRecord {
    pub round: usize,
    /// Template piece count at the start of the round.
    pub pieces: usize,
    pub iterations: usize,
    pub counterexamples: usize,
    pub outcome: String,
}

#[derive(Debug)]
pub enum OuterOutcome {
    Invariant { valuation: Valuation, invariant: Piecewise, template: Piecewise },
    Exhausted { reason: String },
}

#[derive(Debug)]
pub struct OuterReport {
    pub outcome: OuterOutcome,
    pub rounds: Vec<RoundRecord>,
    pub total_counterexamples: usize,
}

#[derive(Debug, Clone)]
pub struct OuterConfig {
    pub strategy: Strategy,
    pub round_cap: usize,
    pub cegis: CegisConfig,
}

impl Default for OuterConfig {
    fn default() -> Self {
        OuterConfig {
            strategy: Strategy::Static,
            round_cap: 8,
            cegis: CegisConfig::default(),
        }
    }
}

/// Alternates template refinement with the synthesis loop until an
/// invariant is found, the round cap is hit, or a run is inconclusive.
pub fn outer_loop<W: Write + ?Sized>(
    prog: &LoopProgram,
    prop: &Property,
    solver: &SolverConfig,
    cfg: &OuterConfig,
    mut trace: Option<&mut W>,
) -> Result<OuterReport, CegisError> {
    if cfg.strategy == Strategy::Static && !prog.decls.all_bounded() {
        return Err(CegisError::Encoding(
            "the static strategy needs every variable to be bounded".to_string(),
        ));
    }
    let mut gen = TVarGen::new();
    let mut cell_sess = Session::new(solver)?;
    let mut template = initial_template(prog, &prop.post, &mut gen, &mut cell_sess)?;
    let mut rounds: Vec<RoundRecord> = Vec::new();
    let mut total = 0usize;

    for round in 1..=cfg.round_cap {
        let report: CegisReport =
            run_cegis(prog, prop, &template, solver, &cfg.cegis, trace.as_mut().map(|w| &mut **w))?;
        total += report.states.len();
        let outcome_name = match &report.outcome {
            CegisOutcome::Invariant { .. } => "invariant",
            CegisOutcome::NoInstance => "no_instance",
            CegisOutcome::Inconclusive { .. } => "inconclusive",
        };
        rounds.push(RoundRecord {
            round,
            pieces: template.pieces.len(),
            iterations: report.iterations,
            counterexamples: report.states.len(),
            outcome: outcome_name.to_string(),
        });
        match report.outcome {
            CegisOutcome::Invariant { valuation, invariant } => {
                return Ok(OuterReport {
                    outcome: OuterOutcome::Invariant { valuation, invariant, template },
                    rounds,
                    total_counterexamples: total,
                })
            }
            CegisOutcome::Inconclusive { reason } => {
                return Ok(OuterReport {
                    outcome: OuterOutcome::Exhausted { reason },
                    rounds,
                    total_counterexamples: total,
                })
            }
            CegisOutcome::NoInstance => {
                if round == cfg.round_cap {
                    break;
                }
                template = next_template(
                    prog,
                    prop,
                    &template,
                    report.last_candidate,
                    cfg.strategy,
                    round,
                    &mut gen,
                    &mut cell_sess,
                )?;
            }
        }
    }
    Ok(OuterReport {
        outcome: OuterOutcome::Exhausted { reason: "round cap reached".to_string() },
        rounds,
        total_counterexamples: total,
    })
}

#[allow(clippy::too_many_arguments)]
fn next_template(
    prog: &LoopProgram,
    prop: &Property,
    template: &Piecewise,
    last: Option<(Piecewise, Piecewise)>,
    strategy: Strategy,
    round: usize,
    gen: &mut TVarGen,
    sess: &mut Session,
) -> Result<Piecewise, CegisError> {
    let refined = match strategy {
        Strategy::Static => {
            refine_static(prog, &prop.post, round as u64 + 1, gen, sess)
                .map_err(|e| CegisError::Encoding(e.to_string()))?
        }
        Strategy::Dynamic => refine_dynamic(template, prog, gen),
        Strategy::Inductivity => match last {
            Some((inv, psi)) => {
                refine_inductivity(template, &inv, &psi, prog, gen, sess)
                    .map_err(CegisError::Session)?
            }
            // without a rejected candidate there is no frontier to
            // split at; fall back to range splitting
            None if prog.decls.all_bounded() => {
                refine_static(prog, &prop.post, round as u64 + 1, gen, sess)
                    .map_err(|e| CegisError::Encoding(e.to_string()))?
            }
            None => refine_dynamic(template, prog, gen),
        },
    };
    Ok(refined)
}

//! Command interpreter and satisfiability search.
//!
//! Boolean structure is handled by depth-first splitting over disjunctions
//! on top of the incremental simplex; integer variables by branch and
//! bound on the relaxation model. Each `check-sat` solves from scratch
//! against the current assertion stack.

use num::{One, Signed};

use crate::sexp::SExp;
use crate::simplex::Simplex;
use crate::term::{parse_formula, Formula, LinAtom, Rat, Rel, Sort, SymbolTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckResult {
    Sat,
    Unsat,
    Unknown,
}

impl CheckResult {
    fn answer(self) -> &'static str {
        match self {
            CheckResult::Sat => "sat",
            CheckResult::Unsat => "unsat",
            CheckResult::Unknown => "unknown",
        }
    }
}

const DEFAULT_BB_NODES: u64 = 200_000;

struct Search<'a> {
    simplex: Simplex,
    sorts: &'a [Sort],
    nodes_left: u64,
    saw_unknown: bool,
    model: Option<Vec<Rat>>,
}

impl<'a> Search<'a> {
    fn solve(
        sorts: &'a [Sort],
        assertions: &[Formula],
        budget: u64,
    ) -> (CheckResult, Option<Vec<Rat>>, u64) {
        let mut search = Search {
            simplex: Simplex::new(sorts.len()),
            sorts,
            nodes_left: budget,
            saw_unknown: false,
            model: None,
        };
        let prepared: Vec<Formula> = assertions.iter().map(eliminate_ne).collect();
        let worklist: Vec<&Formula> = prepared.iter().rev().collect();
        let res = search.dpll(worklist, Vec::new());
        let res = match res {
            CheckResult::Unsat if search.saw_unknown => CheckResult::Unknown,
            other => other,
        };
        (res, search.model, budget - search.nodes_left)
    }

    /// Processes conjuncts from the worklist, then resolves pending
    /// disjunctions: alternatives contradicting the asserted atoms are
    /// pruned, clauses reduced to one alternative are propagated
    /// without branching, and branching picks the smallest clause.
    /// Unsat means: no model in this branch.
    fn dpll<'f>(
        &mut self,
        mut worklist: Vec<&'f Formula>,
        mut clauses: Vec<Vec<&'f Formula>>,
    ) -> CheckResult {
        loop {
            while let Some(f) = worklist.pop() {
                match f {
                    Formula::True => {}
                    Formula::False => return CheckResult::Unsat,
                    Formula::And(fs) => worklist.extend(fs.iter().rev()),
                    Formula::Or(fs) => {
                        if fs.is_empty() {
                            return CheckResult::Unsat;
                        }
                        clauses.push(fs.iter().collect());
                    }
                    Formula::Atom(a) => {
                        debug_assert!(a.rel != Rel::Ne, "disequalities are eliminated up front");
                        if !self.simplex.assert_atom(a) {
                            return CheckResult::Unsat;
                        }
                    }
                    Formula::Unsupported => {
                        self.saw_unknown = true;
                        return CheckResult::Unsat;
                    }
                }
            }
            if !self.simplex.check() {
                return CheckResult::Unsat;
            }
            if clauses.is_empty() {
                return self.branch_and_bound();
            }
            // prune alternatives refuted by the current bounds; a clause
            // with an alternative already forced is satisfied and dropped
            let mut i = 0;
            while i < clauses.len() {
                let simplex = &mut self.simplex;
                let clause = &mut clauses[i];
                clause.retain(|alt| feasible(simplex, alt));
                if clause.is_empty() {
                    return CheckResult::Unsat;
                }
                if clause.iter().any(|alt| entailed(simplex, alt)) {
                    clauses.swap_remove(i);
                } else {
                    i += 1;
                }
            }
            if clauses.is_empty() {
                continue;
            }
            if let Some(i) = clauses.iter().position(|c| c.len() == 1) {
                let clause = clauses.swap_remove(i);
                worklist.push(clause[0]);
                continue;
            }
            let i = clauses
                .iter()
                .enumerate()
                .min_by_key(|(_, c)| c.len())
                .unwrap()
                .0;
            // split on one atom of the smallest clause and its negation,
            // keeping the two subtrees disjoint; a clause without a
            // negatable atom falls back to trying each alternative
            let decision = clauses[i].iter().find_map(|alt| match alt {
                Formula::Atom(a) => negate_atom(a).map(|n| (a.clone(), n)),
                _ => None,
            });
            if let Some((a, not_a)) = decision {
                for lit in [a, not_a] {
                    if self.nodes_left == 0 {
                        self.saw_unknown = true;
                        return CheckResult::Unsat;
                    }
                    self.nodes_left -= 1;
                    self.simplex.push();
                    let res = if self.simplex.assert_atom(&lit) {
                        self.dpll(Vec::new(), clauses.clone())
                    } else {
                        CheckResult::Unsat
                    };
                    self.simplex.pop();
                    if res == CheckResult::Sat {
                        return CheckResult::Sat;
                    }
                }
                return CheckResult::Unsat;
            }
            let clause = clauses.swap_remove(i);
            for alt in clause {
                if self.nodes_left == 0 {
                    self.saw_unknown = true;
                    return CheckResult::Unsat;
                }
                self.nodes_left -= 1;
                self.simplex.push();
                let res = self.dpll(vec![alt], clauses.clone());
                self.simplex.pop();
                if res == CheckResult::Sat {
                    return CheckResult::Sat;
                }
            }
            return CheckResult::Unsat;
        }
    }

    /// All atoms are asserted and the relaxation is sat; enforce
    /// integrality of Int-sorted variables.
    fn branch_and_bound(&mut self) -> CheckResult {
        let model = self.simplex.concrete_model(self.sorts.len());
        let fractional = (0..self.sorts.len())
            .find(|&v| self.sorts[v] == Sort::Int && !model[v].is_integer());
        let v = match fractional {
            None => {
                self.model = Some(model);
                return CheckResult::Sat;
            }
            Some(v) => v,
        };
        if self.nodes_left == 0 {
            self.saw_unknown = true;
            return CheckResult::Unsat;
        }
        self.nodes_left -= 1;
        let fl = model[v].floor();
        let mut any_unknown = false;
        for (k, lower) in [(fl.clone(), false), (fl + Rat::one(), true)] {
            self.simplex.push();
            let ok = if lower {
                // v >= k   ==   -v + k <= 0
                self.simplex.assert_atom(&var_bound(v, k, true))
            } else {
                self.simplex.assert_atom(&var_bound(v, k, false))
            };
            let res = if ok && self.simplex.check() {
                self.branch_and_bound()
            } else {
                CheckResult::Unsat
            };
            self.simplex.pop();
            match res {
                CheckResult::Sat => return CheckResult::Sat,
                CheckResult::Unknown => any_unknown = true,
                CheckResult::Unsat => {}
            }
        }
        if any_unknown {
            self.saw_unknown = true;
        }
        CheckResult::Unsat
    }
}

/// Quick relative consistency test: can the atoms `f` forces hold
/// together with what is already asserted? Only immediate bound clashes
/// count, so the test is cheap; anything deeper is left to branching.
fn feasible(simplex: &mut Simplex, f: &Formula) -> bool {
    let mut atoms = Vec::new();
    if !necessary_atoms(f, &mut atoms) {
        return false;
    }
    if atoms.is_empty() {
        return true;
    }
    simplex.push();
    let ok = atoms.iter().all(|a| simplex.assert_atom(a));
    simplex.pop();
    ok
}

/// Is `f` already forced by the current bounds? Checked by refuting its
/// negation; conservative, so `false` when the negation is not a single
/// bound or no immediate clash shows up.
fn entailed(simplex: &mut Simplex, f: &Formula) -> bool {
    match f {
        Formula::True => true,
        Formula::Atom(a) => match negate_atom(a) {
            Some(n) => {
                simplex.push();
                let ok = simplex.assert_atom(&n);
                simplex.pop();
                !ok
            }
            None => false,
        },
        Formula::And(fs) => fs.iter().all(|g| entailed(simplex, g)),
        _ => false,
    }
}

/// The complement of an inequality atom: `!(e <= 0)` is `-e < 0` and
/// `!(e < 0)` is `-e <= 0`. Equalities have no single-atom complement.
fn negate_atom(a: &LinAtom) -> Option<LinAtom> {
    let rel = match a.rel {
        Rel::Le => Rel::Lt,
        Rel::Lt => Rel::Le,
        Rel::Eq | Rel::Ne => return None,
    };
    Some(LinAtom { expr: a.expr.clone().neg(), rel })
}

/// Collects the atoms every model of `f` must satisfy, descending only
/// through conjunctions. Returns false when `f` is trivially unsat.
fn necessary_atoms<'f>(f: &'f Formula, out: &mut Vec<&'f LinAtom>) -> bool {
    match f {
        Formula::True | Formula::Or(_) | Formula::Unsupported => true,
        Formula::False => false,
        Formula::Atom(a) => {
            out.push(a);
            true
        }
        Formula::And(fs) => fs.iter().all(|g| necessary_atoms(g, out)),
    }
}

/// Replaces every disequality atom `e != 0` by `e < 0 or -e < 0` so the
/// search only ever asserts bound-shaped atoms.
fn eliminate_ne(f: &Formula) -> Formula {
    match f {
        Formula::Atom(a) if a.rel == Rel::Ne => Formula::Or(vec![
            Formula::Atom(LinAtom { expr: a.expr.clone(), rel: Rel::Lt }),
            Formula::Atom(LinAtom { expr: a.expr.clone().neg(), rel: Rel::Lt }),
        ]),
        Formula::And(fs) => Formula::And(fs.iter().map(eliminate_ne).collect()),
        Formula::Or(fs) => Formula::Or(fs.iter().map(eliminate_ne).collect()),
        other => other.clone(),
    }
}

fn var_bound(v: usize, k: Rat, lower: bool) -> LinAtom {
    use crate::term::LinExpr;
    let mut coeffs = std::collections::BTreeMap::new();
    if lower {
        coeffs.insert(v, -Rat::one());
        LinAtom { expr: LinExpr { coeffs, k }, rel: Rel::Le }
    } else {
        coeffs.insert(v, Rat::one());
        LinAtom { expr: LinExpr { coeffs, k: -k }, rel: Rel::Le }
    }
}

/// SMT-LIB2 session state: declarations, assertion stack, last model.
pub struct Context {
    sym: SymbolTable,
    assertions: Vec<Formula>,
    scopes: Vec<(usize, usize)>,
    last: Option<(CheckResult, Option<Vec<Rat>>)>,
    bb_nodes: u64,
}

pub enum Outcome {
    /// Lines to print (possibly none).
    Reply(Vec<String>),
    Exit,
}

impl Context {
    pub fn new() -> Self {
        Context {
            sym: SymbolTable::new(),
            assertions: Vec::new(),
            scopes: Vec::new(),
            last: None,
            bb_nodes: DEFAULT_BB_NODES,
        }
    }

    pub fn exec(&mut self, cmd: &SExp) -> Result<Outcome, String> {
        let items = cmd.list().ok_or_else(|| format!("expected a command, got: {cmd}"))?;
        let head = items
            .first()
            .and_then(|h| h.atom())
            .ok_or_else(|| format!("malformed command: {cmd}"))?;
        let args = &items[1..];
        match head {
            "declare-const" => {
                if args.len() != 2 {
                    return Err("declare-const takes a name and a sort".into());
                }
                let name = args[0].atom().ok_or("declare-const name must be a symbol")?;
                self.sym.declare(name, Sort::parse(&args[1])?)?;
                Ok(Outcome::Reply(vec![]))
            }
            "declare-fun" => {
                if args.len() != 3 {
                    return Err("declare-fun takes a name, arguments, and a sort".into());
                }
                let name = args[0].atom().ok_or("declare-fun name must be a symbol")?;
                if args[1] != SExp::List(vec![]) {
                    return Err("only zero-arity declare-fun is supported".into());
                }
                self.sym.declare(name, Sort::parse(&args[2])?)?;
                Ok(Outcome::Reply(vec![]))
            }
            "assert" => {
                if args.len() != 1 {
                    return Err("assert takes one term".into());
                }
                let f = parse_formula(&args[0], &self.sym)?;
                self.assertions.push(f);
                Ok(Outcome::Reply(vec![]))
            }
            "push" => {
                let n = optional_count(args)?;
                for _ in 0..n {
                    self.scopes.push((self.sym.names.len(), self.assertions.len()));
                }
                Ok(Outcome::Reply(vec![]))
            }
            "pop" => {
                let n = optional_count(args)?;
                for _ in 0..n {
                    let (decls, asserts) =
                        self.scopes.pop().ok_or("pop on an empty scope stack")?;
                    self.sym.truncate(decls);
                    self.assertions.truncate(asserts);
                }
                Ok(Outcome::Reply(vec![]))
            }
            "check-sat" => {
                let debug = std::env::var_os("QINV_SMT_DEBUG").is_some();
                let start = std::time::Instant::now();
                let (res, model, nodes) =
                    Search::solve(&self.sym.sorts, &self.assertions, self.bb_nodes);
                if debug {
                    eprintln!(
                        "check-sat: {} asserts, {} nodes, {:?}, {}",
                        self.assertions.len(),
                        nodes,
                        start.elapsed(),
                        res.answer()
                    );
                }
                let line = res.answer().to_string();
                self.last = Some((res, model));
                Ok(Outcome::Reply(vec![line]))
            }
            "get-model" => match &self.last {
                Some((CheckResult::Sat, Some(model))) => {
                    let mut lines = vec!["(".to_string()];
                    for (v, name) in self.sym.names.iter().enumerate() {
                        let sort = self.sym.sorts[v];
                        lines.push(format!(
                            "  (define-fun {} () {} {})",
                            name,
                            sort.name(),
                            print_value(&model[v], sort)
                        ));
                    }
                    lines.push(")".to_string());
                    Ok(Outcome::Reply(lines))
                }
                _ => Err("model is not available".into()),
            },
            "echo" => {
                let s = args
                    .first()
                    .and_then(|a| a.atom())
                    .ok_or("echo takes a string literal")?;
                let inner = s.trim_matches('"').replace("\"\"", "\"");
                Ok(Outcome::Reply(vec![inner]))
            }
            "set-option" => {
                if args.len() == 2 && args[0].atom() == Some(":bb-nodes") {
                    if let Some(n) = args[1].atom().and_then(|a| a.parse::<u64>().ok()) {
                        self.bb_nodes = n;
                    }
                }
                Ok(Outcome::Reply(vec![]))
            }
            "set-logic" | "set-info" => Ok(Outcome::Reply(vec![])),
            "reset" => {
                *self = Context::new();
                Ok(Outcome::Reply(vec![]))
            }
            "reset-assertions" => {
                self.assertions.clear();
                self.scopes.clear();
                self.last = None;
                Ok(Outcome::Reply(vec![]))
            }
            "exit" => Ok(Outcome::Exit),
            other => Err(format!("unsupported command: {other}")),
        }
    }
}

impl Default for Context {
    fn default() -> Self {
        Context::new()
    }
}

fn optional_count(args: &[SExp]) -> Result<u64, String> {
    match args.first() {
        None => Ok(1),
        Some(a) => a
            .atom()
            .and_then(|s| s.parse::<u64>().ok())
            .ok_or_else(|| "expected a numeral".to_string()),
    }
}

fn print_value(v: &Rat, sort: Sort) -> String {
    let neg = v.is_negative();
    let abs = v.abs();
    let body = match sort {
        Sort::Int => {
            debug_assert!(abs.is_integer());
            format!("{}", abs.to_integer())
        }
        Sort::Real => {
            if abs.is_integer() {
                format!("{}.0", abs.to_integer())
            } else {
                format!("(/ {} {})", abs.numer(), abs.denom())
            }
        }
    };
    if neg {
        format!("(- {body})")
    } else {
        body
    }
}

/// Runs a complete script, returning all output lines. Used by tests and
/// by the binary's file mode.
pub fn run_script(src: &str) -> Result<Vec<String>, String> {
    let mut reader = crate::sexp::Reader::new();
    reader.push_line(src);
    let mut ctx = Context::new();
    let mut out = Vec::new();
    while let Some(cmd) = reader.next_sexp()? {
        match ctx.exec(&cmd) {
            Ok(Outcome::Reply(lines)) => out.extend(lines),
            Ok(Outcome::Exit) => break,
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn answers(src: &str) -> Vec<String> {
        run_script(src).unwrap()
    }

    #[test]
    fn trivial_sat_and_unsat() {
        assert_eq!(answers("(check-sat)"), vec!["sat"]);
        assert_eq!(answers("(assert false)(check-sat)"), vec!["unsat"]);
    }

    #[test]
    fn real_bounds() {
        let out = answers(
            "(declare-const a Real)\
             (assert (>= a 0))(assert (<= a (- 1)))(check-sat)",
        );
        assert_eq!(out, vec!["unsat"]);
    }

    #[test]
    fn strict_int_gap_is_unsat() {
        let out = answers(
            "(declare-const x Int)\
             (assert (< x 1))(assert (> x 0))(check-sat)",
        );
        assert_eq!(out, vec!["unsat"]);
    }

    #[test]
    fn int_relaxation_needs_branching() {
        // 2x = 3 has a real solution but no integer one.
        let out = answers(
            "(declare-const x Int)\
             (assert (= (* 2 x) 3))(check-sat)",
        );
        assert_eq!(out, vec!["unsat"]);
    }

    #[test]
    fn disjunction_branches() {
        let out = answers(
            "(declare-const x Int)\
             (assert (or (and (<= x 0) (>= x 1)) (= x 7)))\
             (check-sat)(get-model)",
        );
        assert_eq!(out[0], "sat");
        assert!(out.iter().any(|l| l.contains("(define-fun x () Int 7)")), "{out:?}");
    }

    #[test]
    fn push_pop_scopes() {
        let out = answers(
            "(declare-const x Int)\
             (assert (>= x 5))(push 1)(assert (<= x 4))(check-sat)\
             (pop 1)(check-sat)",
        );
        assert_eq!(out, vec!["unsat", "sat"]);
    }

    #[test]
    fn quantifier_gives_unknown() {
        let out = answers(
            "(declare-const x Int)\
             (assert (forall ((y Int)) (<= y x)))(check-sat)",
        );
        assert_eq!(out, vec!["unknown"]);
    }

    #[test]
    fn mixed_int_real_model() {
        let out = answers(
            "(declare-const n Int)(declare-const p Real)\
             (assert (= (+ (to_real n) p) 2.5))(assert (> p 0))(assert (< p 1))\
             (check-sat)(get-model)",
        );
        assert_eq!(out[0], "sat");
        assert!(out.iter().any(|l| l.contains("define-fun n () Int 2")), "{out:?}");
        assert!(out.iter().any(|l| l.contains("define-fun p () Real (/ 1 2)")), "{out:?}");
    }

    #[test]
    fn disequality_splits() {
        let out = answers(
            "(declare-const x Int)\
             (assert (>= x 0))(assert (<= x 1))(assert (distinct x 0))\
             (check-sat)(get-model)",
        );
        assert_eq!(out[0], "sat");
        assert!(out.iter().any(|l| l.contains("(define-fun x () Int 1)")), "{out:?}");
    }

    #[test]
    fn negative_values_print_wrapped() {
        let out = answers(
            "(declare-const x Int)(declare-const r Real)\
             (assert (= x (- 3)))(assert (= r (/ (- 1) 4)))\
             (check-sat)(get-model)",
        );
        assert_eq!(out[0], "sat");
        assert!(out.iter().any(|l| l.contains("(define-fun x () Int (- 3))")), "{out:?}");
        assert!(out.iter().any(|l| l.contains("(define-fun r () Real (- (/ 1 4)))")), "{out:?}");
    }
}

//! Parser and canonical printer for loop programs, expectations, and
//! property files.
//!
//! Program surface syntax:
//!
//! ```text
//! nat failed [0, 5];
//! nat sent [0, 8000000];
//!
//! while (failed < 5 & sent < 8000000) {
//!     { failed := 0; sent := sent + 1 } [99/100] { failed := failed + 1 }
//! }
//! ```
//!
//! Comparisons support `<`, `<=`, `=`, `>`, `>=`; the last four desugar
//! into strict comparison, negation, and conjunction. A categorical
//! assignment `x := e1 : p1 + e2 : p2 + ...` desugars into nested binary
//! probabilistic choices. Probabilities are written as `p/q` rationals or
//! decimal literals and are kept exact.
//!
//! Expectations are sums of guarded affine terms such as
//! `[failed = 5] + [!(failed = 5)]*(1/10)`; a term without explicit
//! weight has weight one, and `INF` is allowed as a body. Property files
//! carry a `post:` line and an optional `pre:` line.

use num_traits::{One, Signed, Zero};

use crate::expect::{Body, BoolExpr, LinExp, Piece, Piecewise};
use crate::scalar::{display_rat, parse_rat, Rat};
use crate::syntax::{Decls, Expr, Guard, LoopProgram, State, Stmt, VarId};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Nat(String),
    Dec(String),
    Sym(&'static str),
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier '{s}'"),
            Tok::Nat(s) => format!("number '{s}'"),
            Tok::Dec(s) => format!("number '{s}'"),
            Tok::Sym(s) => format!("'{s}'"),
        }
    }
}

fn lex(text: &str) -> Result<Vec<Tok>, String> {
    let mut toks = Vec::new();
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c == '#' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len()
                && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_')
            {
                i += 1;
            }
            toks.push(Tok::Ident(text[start..i].to_string()));
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                i += 1;
            }
            if i + 1 < bytes.len()
                && bytes[i] == b'.'
                && (bytes[i + 1] as char).is_ascii_digit()
            {
                i += 1;
                while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                    i += 1;
                }
                toks.push(Tok::Dec(text[start..i].to_string()));
            } else {
                toks.push(Tok::Nat(text[start..i].to_string()));
            }
            continue;
        }
        let two = if i + 1 < bytes.len() { &text[i..i + 2] } else { "" };
        let sym = match two {
            ":=" => Some(":="),
            "<=" => Some("<="),
            ">=" => Some(">="),
            _ => None,
        };
        if let Some(s) = sym {
            toks.push(Tok::Sym(s));
            i += 2;
            continue;
        }
        let one = match c {
            ';' => ";",
            ':' => ":",
            ',' => ",",
            '[' => "[",
            ']' => "]",
            '{' => "{",
            '}' => "}",
            '(' => "(",
            ')' => ")",
            '<' => "<",
            '>' => ">",
            '=' => "=",
            '!' => "!",
            '&' => "&",
            '+' => "+",
            '-' => "-",
            '*' => "*",
            '/' => "/",
            _ => return Err(format!("unexpected character '{c}'")),
        };
        toks.push(Tok::Sym(one));
        i += 1;
    }
    Ok(toks)
}

struct Parser<'a> {
    toks: Vec<Tok>,
    pos: usize,
    decls: &'a Decls,
}

impl<'a> Parser<'a> {
    fn new(toks: Vec<Tok>, decls: &'a Decls) -> Self {
        Parser { toks, pos: 0, decls }
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Result<Tok, String> {
        let t = self
            .toks
            .get(self.pos)
            .cloned()
            .ok_or_else(|| "unexpected end of input".to_string())?;
        self.pos += 1;
        Ok(t)
    }

    fn at_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Some(Tok::Sym(t)) if *t == s)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.at_sym(s) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> Result<(), String> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            Err(match self.peek() {
                Some(t) => format!("expected '{s}', found {}", t.describe()),
                None => format!("expected '{s}', found end of input"),
            })
        }
    }

    fn at_ident(&self, word: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s == word)
    }

    fn eat_ident(&mut self, word: &str) -> bool {
        if self.at_ident(word) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_ident(&mut self) -> Result<String, String> {
        match self.next()? {
            Tok::Ident(s) => Ok(s),
            t => Err(format!("expected identifier, found {}", t.describe())),
        }
    }

    fn expect_nat(&mut self) -> Result<u64, String> {
        match self.next()? {
            Tok::Nat(s) => s.parse().map_err(|_| format!("number out of range: {s}")),
            t => Err(format!("expected number, found {}", t.describe())),
        }
    }

    fn var(&mut self) -> Result<VarId, String> {
        let name = self.expect_ident()?;
        self.decls
            .lookup(&name)
            .ok_or_else(|| format!("undeclared variable: {name}"))
    }

    // ---- program arithmetic and guards ----

    fn expr(&mut self) -> Result<Expr, String> {
        let mut e = self.term()?;
        loop {
            if self.eat_sym("+") {
                // a '+' inside a categorical assignment separates
                // alternatives; the caller backtracks at ':'
                let rhs = self.term()?;
                e = Expr::Add(Box::new(e), Box::new(rhs));
            } else if self.eat_sym("-") {
                let rhs = self.term()?;
                e = Expr::Sub(Box::new(e), Box::new(rhs));
            } else {
                return Ok(e);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, String> {
        match self.peek().cloned() {
            Some(Tok::Nat(_)) => {
                let z = self.expect_nat()?;
                if self.eat_sym("*") {
                    let f = self.term()?;
                    Ok(Expr::Scale(z, Box::new(f)))
                } else {
                    Ok(Expr::Const(z))
                }
            }
            Some(Tok::Ident(_)) => Ok(Expr::Var(self.var()?)),
            Some(Tok::Sym("(")) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            other => Err(format!(
                "expected arithmetic expression, found {}",
                other.map(|t| t.describe()).unwrap_or_else(|| "end of input".into())
            )),
        }
    }

    fn guard(&mut self) -> Result<Guard, String> {
        let mut g = self.guard_atom()?;
        while self.eat_sym("&") {
            let rhs = self.guard_atom()?;
            g = g.and(rhs);
        }
        Ok(g)
    }

    fn guard_atom(&mut self) -> Result<Guard, String> {
        if self.eat_sym("!") {
            return Ok(self.guard_atom()?.not());
        }
        if self.at_sym("(") {
            // parentheses start a nested guard here; parenthesized
            // arithmetic is only accepted after a comparison operator
            self.pos += 1;
            let g = self.guard()?;
            self.expect_sym(")")?;
            return Ok(g);
        }
        let lhs = self.expr()?;
        let op = match self.next()? {
            Tok::Sym(s @ ("<" | "<=" | "=" | ">" | ">=")) => s,
            t => return Err(format!("expected comparison, found {}", t.describe())),
        };
        let rhs = self.expr()?;
        Ok(match op {
            "<" => Guard::Lt(lhs, rhs),
            "<=" => Guard::Lt(rhs, lhs).not(),
            ">" => Guard::Lt(rhs, lhs),
            ">=" => Guard::Lt(lhs, rhs).not(),
            "=" => Guard::Lt(lhs.clone(), rhs.clone())
                .not()
                .and(Guard::Lt(rhs, lhs).not()),
            _ => unreachable!(),
        })
    }

    fn prob(&mut self) -> Result<Rat, String> {
        let p = match self.next()? {
            Tok::Dec(s) => parse_rat(&s)?,
            Tok::Nat(n) => {
                if self.eat_sym("/") {
                    let d = match self.next()? {
                        Tok::Nat(d) => d,
                        t => return Err(format!("expected denominator, found {}", t.describe())),
                    };
                    parse_rat(&format!("{n}/{d}"))?
                } else {
                    parse_rat(&n)?
                }
            }
            t => return Err(format!("expected probability, found {}", t.describe())),
        };
        if p.is_negative() || p > Rat::one() {
            return Err(format!("probability out of range: {}", display_rat(&p)));
        }
        Ok(p)
    }

    // ---- statements ----

    fn stmt_seq(&mut self) -> Result<Stmt, String> {
        let mut stmts = vec![self.stmt_atomic()?];
        while self.eat_sym(";") {
            if self.at_sym("}") || self.peek().is_none() {
                break;
            }
            stmts.push(self.stmt_atomic()?);
        }
        let mut it = stmts.into_iter().rev();
        let mut acc = it.next().unwrap();
        for s in it {
            acc = Stmt::Seq(Box::new(s), Box::new(acc));
        }
        Ok(acc)
    }

    fn block(&mut self) -> Result<Stmt, String> {
        self.expect_sym("{")?;
        let s = self.stmt_seq()?;
        self.expect_sym("}")?;
        Ok(s)
    }

    fn stmt_atomic(&mut self) -> Result<Stmt, String> {
        if self.eat_ident("skip") {
            return Ok(Stmt::Skip);
        }
        if self.at_sym("{") {
            let left = self.block()?;
            self.expect_sym("[")?;
            let p = self.prob()?;
            self.expect_sym("]")?;
            let right = self.block()?;
            return Ok(Stmt::Choice(Box::new(left), p, Box::new(right)));
        }
        if self.eat_ident("if") {
            self.expect_sym("(")?;
            let g = self.guard()?;
            self.expect_sym(")")?;
            let then = self.block()?;
            let els = if self.eat_ident("else") {
                self.block()?
            } else {
                Stmt::Skip
            };
            return Ok(Stmt::If(g, Box::new(then), Box::new(els)));
        }
        let x = self.var()?;
        self.expect_sym(":=")?;
        let first = self.expr()?;
        if !self.at_sym(":") {
            return Ok(Stmt::Assign(x, first));
        }
        // categorical assignment: e1 : p1 + e2 : p2 + ...
        self.pos += 1;
        let mut alts = vec![(first, self.prob()?)];
        while self.eat_sym("+") {
            let e = self.expr()?;
            self.expect_sym(":")?;
            let p = self.prob()?;
            alts.push((e, p));
        }
        desugar_categorical(x, alts)
    }

    fn program(&mut self) -> Result<(Guard, Stmt), String> {
        if !self.eat_ident("while") {
            return Err("expected 'while'".to_string());
        }
        self.expect_sym("(")?;
        let guard = self.guard()?;
        self.expect_sym(")")?;
        let body = self.block()?;
        if let Some(t) = self.peek() {
            return Err(format!("trailing input after loop: {}", t.describe()));
        }
        Ok((guard, body))
    }

    // ---- expectations ----

    fn wexpr(&mut self) -> Result<LinExp, String> {
        let mut e = self.wterm()?;
        loop {
            if self.eat_sym("+") {
                let rhs = self.wterm()?;
                e = e.add(&rhs);
            } else if self.eat_sym("-") {
                let rhs = self.wterm()?;
                e = e.sub(&rhs);
            } else {
                return Ok(e);
            }
        }
    }

    fn wterm(&mut self) -> Result<LinExp, String> {
        if self.eat_sym("-") {
            return Ok(self.wterm()?.scale(&-Rat::one()));
        }
        match self.peek().cloned() {
            Some(Tok::Nat(_)) | Some(Tok::Dec(_)) => {
                let q = self.wrat()?;
                if self.eat_sym("*") {
                    let f = self.wterm()?;
                    Ok(f.scale(&q))
                } else {
                    Ok(LinExp::rat(q))
                }
            }
            Some(Tok::Ident(_)) => Ok(LinExp::var(self.var()?)),
            Some(Tok::Sym("(")) => {
                self.pos += 1;
                let e = self.wexpr()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            other => Err(format!(
                "expected affine expression, found {}",
                other.map(|t| t.describe()).unwrap_or_else(|| "end of input".into())
            )),
        }
    }

    // expectation guards allow rational coefficients and unary minus,
    // so that printed invariants parse back
    fn wguard(&mut self) -> Result<BoolExpr, String> {
        let mut g = self.wguard_atom()?;
        while self.eat_sym("&") {
            let rhs = self.wguard_atom()?;
            g = g.and(rhs);
        }
        Ok(g)
    }

    fn wguard_atom(&mut self) -> Result<BoolExpr, String> {
        if self.eat_sym("!") {
            return Ok(self.wguard_atom()?.not());
        }
        if self.at_sym("(") {
            // parentheses start a nested guard here; parenthesized
            // arithmetic is only accepted after a comparison operator
            self.pos += 1;
            let g = self.wguard()?;
            self.expect_sym(")")?;
            return Ok(g);
        }
        let lhs = self.wexpr()?;
        let op = match self.next()? {
            Tok::Sym(s @ ("<" | "<=" | "=" | ">" | ">=")) => s,
            t => return Err(format!("expected comparison, found {}", t.describe())),
        };
        let rhs = self.wexpr()?;
        Ok(match op {
            "<" => BoolExpr::Lt(lhs, rhs),
            "<=" => BoolExpr::le(lhs, rhs),
            ">" => BoolExpr::Lt(rhs, lhs),
            ">=" => BoolExpr::le(rhs, lhs),
            "=" => BoolExpr::eq(lhs, rhs),
            _ => unreachable!(),
        })
    }

    fn wrat(&mut self) -> Result<Rat, String> {
        match self.next()? {
            Tok::Dec(s) => parse_rat(&s),
            Tok::Nat(n) => {
                if self.eat_sym("/") {
                    match self.next()? {
                        Tok::Nat(d) => parse_rat(&format!("{n}/{d}")),
                        t => Err(format!("expected denominator, found {}", t.describe())),
                    }
                } else {
                    parse_rat(&n)
                }
            }
            t => Err(format!("expected rational, found {}", t.describe())),
        }
    }

    fn expectation(&mut self) -> Result<Vec<(BoolExpr, Body)>, String> {
        let mut terms = Vec::new();
        loop {
            if self.at_sym("[") {
                self.pos += 1;
                let g = self.wguard()?;
                self.expect_sym("]")?;
                let body = if self.eat_sym("*") {
                    self.body()?
                } else {
                    Body::Fin(LinExp::rat(Rat::one()))
                };
                terms.push((g, body));
            } else {
                let body = self.body()?;
                terms.push((BoolExpr::True, body));
            }
            if !self.eat_sym("+") {
                return Ok(terms);
            }
        }
    }

    fn body(&mut self) -> Result<Body, String> {
        if self.eat_ident("INF") {
            return Ok(Body::Inf);
        }
        // factor level only: a multi-term body must be parenthesized so
        // that a top level '+' always separates guarded terms
        Ok(Body::Fin(self.wterm()?))
    }
}

fn desugar_categorical(x: VarId, alts: Vec<(Expr, Rat)>) -> Result<Stmt, String> {
    if alts.len() < 2 {
        return Err("categorical assignment needs at least two alternatives".to_string());
    }
    let total: Rat = alts.iter().map(|(_, p)| p.clone()).sum();
    if !total.is_one() {
        return Err(format!(
            "categorical weights sum to {}, expected 1",
            display_rat(&total)
        ));
    }
    for (_, p) in &alts {
        if p.is_zero() {
            return Err("categorical weight must be positive".to_string());
        }
    }
    let mut it = alts.into_iter().rev();
    let (last_e, mut tail) = it.next().unwrap();
    let mut acc = Stmt::Assign(x, last_e);
    for (e, p) in it {
        tail += &p;
        let w = &p / &tail;
        acc = Stmt::Choice(Box::new(Stmt::Assign(x, e)), w, Box::new(acc));
    }
    Ok(acc)
}

/// Parses a full program file: declarations followed by a single loop.
pub fn parse_program(text: &str) -> Result<LoopProgram, String> {
    let toks = lex(text)?;
    let mut decls = Decls::new();
    let mut pos = 0;
    // declarations are parsed by hand so the main parser can hold an
    // immutable view of them
    while matches!(toks.get(pos), Some(Tok::Ident(s)) if s == "nat") {
        pos += 1;
        let name = match toks.get(pos) {
            Some(Tok::Ident(s)) => s.clone(),
            other => {
                return Err(format!(
                    "expected variable name after 'nat', found {}",
                    other.map(|t| t.describe()).unwrap_or_else(|| "end of input".into())
                ))
            }
        };
        pos += 1;
        let mut lo = 0u64;
        let mut hi = None;
        if matches!(toks.get(pos), Some(Tok::Sym("["))) {
            pos += 1;
            lo = nat_at(&toks, &mut pos)?;
            if !matches!(toks.get(pos), Some(Tok::Sym(","))) {
                return Err("expected ',' in variable range".to_string());
            }
            pos += 1;
            hi = Some(nat_at(&toks, &mut pos)?);
            if !matches!(toks.get(pos), Some(Tok::Sym("]"))) {
                return Err("expected ']' in variable range".to_string());
            }
            pos += 1;
        }
        if !matches!(toks.get(pos), Some(Tok::Sym(";"))) {
            return Err(format!("expected ';' after declaration of {name}"));
        }
        pos += 1;
        decls.declare(&name, lo, hi)?;
    }
    if decls.is_empty() {
        return Err("program declares no variables".to_string());
    }
    let rest = toks[pos..].to_vec();
    let mut p = Parser::new(rest, &decls);
    let (guard, body) = p.program()?;
    Ok(LoopProgram { decls, guard, body })
}

fn nat_at(toks: &[Tok], pos: &mut usize) -> Result<u64, String> {
    match toks.get(*pos) {
        Some(Tok::Nat(s)) => {
            *pos += 1;
            s.parse().map_err(|_| format!("number out of range: {s}"))
        }
        other => Err(format!(
            "expected number, found {}",
            other.map(|t| t.describe()).unwrap_or_else(|| "end of input".into())
        )),
    }
}

/// Parses an expectation into explicit pieces plus a default piece
/// covering the remaining states with value zero. The default piece's
/// guard is the conjunction of the negated explicit guards; callers
/// should drop it when it is unsatisfiable. Guard disjointness is not
/// checked here; see the partition check in the SMT layer.
pub fn parse_expectation(text: &str, decls: &Decls) -> Result<Piecewise, String> {
    let toks = lex(text)?;
    let mut p = Parser::new(toks, decls);
    let terms = p.expectation()?;
    if let Some(t) = p.peek() {
        return Err(format!("trailing input in expectation: {}", t.describe()));
    }
    let mut rest = BoolExpr::True;
    let mut pieces = Vec::new();
    for (g, body) in terms {
        rest = rest.and(g.clone().not());
        pieces.push(Piece { guard: g, body });
    }
    if !rest.syntactically_false() {
        pieces.push(Piece { guard: rest, body: Body::Fin(LinExp::zero()) });
    }
    Ok(Piecewise { pieces })
}

/// A verification task: postexpectation `f` and upper bound `g`.
#[derive(Debug, Clone)]
pub struct Property {
    pub post: Piecewise,
    pub bound: Piecewise,
}

/// Parses a property file with a `post:` line and an optional `pre:`
/// line giving the upper bound; the bound defaults to infinity.
pub fn parse_property(text: &str, decls: &Decls) -> Result<Property, String> {
    let mut post = None;
    let mut bound = None;
    for raw in text.lines() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("post:") {
            if post.is_some() {
                return Err("duplicate post: line".to_string());
            }
            post = Some(parse_expectation(rest, decls)?);
        } else if let Some(rest) = line.strip_prefix("pre:") {
            if bound.is_some() {
                return Err("duplicate pre: line".to_string());
            }
            bound = Some(parse_expectation(rest, decls)?);
        } else {
            return Err(format!("unrecognized property line: {line}"));
        }
    }
    let post = post.ok_or("property file has no post: line")?;
    let bound =
        bound.unwrap_or_else(|| Piecewise::constant(crate::expect::Val::Inf));
    Ok(Property { post, bound })
}

// ---- canonical printing ----

fn print_expr(e: &Expr, decls: &Decls) -> String {
    match e {
        Expr::Const(z) => z.to_string(),
        Expr::Var(x) => decls.name(*x).to_string(),
        Expr::Scale(z, inner) => match inner.as_ref() {
            Expr::Const(_) | Expr::Var(_) => format!("{z}*{}", print_expr(inner, decls)),
            _ => format!("{z}*({})", print_expr(inner, decls)),
        },
        Expr::Add(a, b) => format!("{} + {}", print_expr(a, decls), print_expr(b, decls)),
        Expr::Sub(a, b) => {
            let rhs = match b.as_ref() {
                Expr::Add(..) | Expr::Sub(..) => format!("({})", print_expr(b, decls)),
                _ => print_expr(b, decls),
            };
            format!("{} - {}", print_expr(a, decls), rhs)
        }
    }
}

fn print_guard(g: &Guard, decls: &Decls) -> String {
    let atoms = flatten_conj(g);
    atoms
        .iter()
        .map(|a| print_guard_atom(a, decls))
        .collect::<Vec<_>>()
        .join(" & ")
}

/// Recognizes the desugared form of `a = b`.
fn equality_view(g: &Guard) -> Option<(&Expr, &Expr)> {
    if let Guard::And(a, b) = g {
        if let (Guard::Not(l), Guard::Not(r)) = (a.as_ref(), b.as_ref()) {
            if let (Guard::Lt(a1, b1), Guard::Lt(b2, a2)) = (l.as_ref(), r.as_ref()) {
                if a1 == a2 && b1 == b2 {
                    return Some((a1, b1));
                }
            }
        }
    }
    None
}

fn flatten_conj(g: &Guard) -> Vec<&Guard> {
    if equality_view(g).is_some() {
        return vec![g];
    }
    match g {
        Guard::And(a, b) => {
            let mut out = flatten_conj(a);
            out.extend(flatten_conj(b));
            out
        }
        other => vec![other],
    }
}

fn print_guard_atom(g: &Guard, decls: &Decls) -> String {
    // reconstruct =, <=, >= sugar from the strict/negation core
    if let Some((a, b)) = equality_view(g) {
        return format!("{} = {}", print_expr(a, decls), print_expr(b, decls));
    }
    match g {
        Guard::Lt(a, b) => format!("{} < {}", print_expr(a, decls), print_expr(b, decls)),
        Guard::Not(inner) => match inner.as_ref() {
            Guard::Lt(a, b) => {
                format!("{} <= {}", print_expr(b, decls), print_expr(a, decls))
            }
            other => format!("!({})", print_guard(other, decls)),
        },
        Guard::And(..) => format!("({})", print_guard(g, decls)),
    }
}

/// Recognizes a nested choice chain of assignments to one variable with
/// at least three alternatives, returning the categorical weights.
fn categorical_view(s: &Stmt) -> Option<(VarId, Vec<(Expr, Rat)>)> {
    let mut alts = Vec::new();
    let mut remaining = Rat::one();
    let mut cur = s;
    let var;
    loop {
        match cur {
            Stmt::Choice(left, p, right) => {
                if let Stmt::Assign(x, e) = left.as_ref() {
                    if let Some((first_x, _)) = alts.first() {
                        if *first_x != *x {
                            return None;
                        }
                    }
                    alts.push((*x, (e.clone(), &remaining * p)));
                    remaining *= Rat::one() - p;
                    cur = right;
                } else {
                    return None;
                }
            }
            Stmt::Assign(x, e) => {
                if let Some((first_x, _)) = alts.first() {
                    if *first_x != *x {
                        return None;
                    }
                }
                var = *x;
                alts.push((*x, (e.clone(), remaining)));
                break;
            }
            _ => return None,
        }
    }
    if alts.len() < 3 {
        return None;
    }
    Some((var, alts.into_iter().map(|(_, a)| a).collect()))
}

fn print_stmt(s: &Stmt, decls: &Decls, indent: usize, out: &mut String) {
    let pad = "    ".repeat(indent);
    match s {
        Stmt::Seq(a, b) => {
            print_stmt(a, decls, indent, out);
            out.push_str(";\n");
            print_stmt(b, decls, indent, out);
        }
        Stmt::Skip => {
            out.push_str(&pad);
            out.push_str("skip");
        }
        Stmt::Assign(x, e) => {
            out.push_str(&pad);
            out.push_str(&format!("{} := {}", decls.name(*x), print_expr(e, decls)));
        }
        Stmt::Choice(..) => {
            if let Some((x, alts)) = categorical_view(s) {
                out.push_str(&pad);
                out.push_str(&format!(
                    "{} := {}",
                    decls.name(x),
                    alts.iter()
                        .map(|(e, p)| format!("{} : {}", print_expr(e, decls), display_rat(p)))
                        .collect::<Vec<_>>()
                        .join(" + ")
                ));
                return;
            }
            let Stmt::Choice(a, p, b) = s else { unreachable!() };
            if let (Some(left), Some(right)) = (inline_stmt(a, decls), inline_stmt(b, decls)) {
                out.push_str(&pad);
                out.push_str(&format!(
                    "{{ {} }} [{}] {{ {} }}",
                    left,
                    display_rat(p),
                    right
                ));
                return;
            }
            out.push_str(&pad);
            out.push_str("{\n");
            print_stmt(a, decls, indent + 1, out);
            out.push('\n');
            out.push_str(&pad);
            out.push_str(&format!("}} [{}] {{\n", display_rat(p)));
            print_stmt(b, decls, indent + 1, out);
            out.push('\n');
            out.push_str(&pad);
            out.push('}');
        }
        Stmt::If(g, a, b) => {
            out.push_str(&pad);
            out.push_str(&format!("if ({}) {{\n", print_guard(g, decls)));
            print_stmt(a, decls, indent + 1, out);
            out.push('\n');
            out.push_str(&pad);
            out.push('}');
            if **b != Stmt::Skip {
                out.push_str(" else {\n");
                print_stmt(b, decls, indent + 1, out);
                out.push('\n');
                out.push_str(&pad);
                out.push('}');
            }
        }
    }
}

/// Renders sequences of skips and assignments on one line; anything with
/// nested control flow prints in block form instead.
fn inline_stmt(s: &Stmt, decls: &Decls) -> Option<String> {
    match s {
        Stmt::Skip => Some("skip".to_string()),
        Stmt::Assign(x, e) => {
            Some(format!("{} := {}", decls.name(*x), print_expr(e, decls)))
        }
        Stmt::Seq(a, b) => {
            Some(format!("{}; {}", inline_stmt(a, decls)?, inline_stmt(b, decls)?))
        }
        Stmt::Choice(..) | Stmt::If(..) => None,
    }
}

/// Canonical program text; parsing it yields the same syntax tree.
pub fn print_program(p: &LoopProgram) -> String {
    let mut out = String::new();
    for x in p.decls.ids() {
        let (lo, hi) = p.decls.bounds(x);
        match hi {
            Some(h) => {
                out.push_str(&format!("nat {} [{}, {}];\n", p.decls.name(x), lo, h))
            }
            None => out.push_str(&format!("nat {};\n", p.decls.name(x))),
        }
    }
    out.push('\n');
    out.push_str(&format!("while ({}) {{\n", print_guard(&p.guard, &p.decls)));
    print_stmt(&p.body, &p.decls, 1, &mut out);
    out.push_str("\n}\n");
    out
}

/// Canonical expectation text; parsing it reproduces the same pieces.
pub fn print_expectation(pw: &Piecewise, decls: &Decls) -> String {
    pw.pieces
        .iter()
        .map(|p| format!("[{}]*({})", p.guard.display(decls), p.body.display(decls)))
        .collect::<Vec<_>>()
        .join(" + ")
}

/// Sampling helper for tests: draws a state within the declared bounds
/// (unbounded variables draw from [0, fallback]).
pub fn random_state(
    decls: &Decls,
    fallback: u64,
    rng: &mut impl rand::Rng,
) -> State {
    let vals = decls
        .ids()
        .map(|x| {
            let (lo, hi) = decls.bounds(x);
            let hi = hi.unwrap_or(lo.saturating_add(fallback));
            rng.gen_range(lo..=hi)
        })
        .collect();
    State(vals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Scalar;

    const BRP: &str = "\
nat failed [0, 5];
nat sent [0, 8000000];

while (failed < 5 & sent < 8000000) {
    { failed := 0; sent := sent + 1 } [99/100] { failed := failed + 1 }
}
";

    #[test]
    fn parse_print_round_trip() {
        let p = parse_program(BRP).unwrap();
        let printed = print_program(&p);
        assert_eq!(printed, BRP);
        let again = parse_program(&printed).unwrap();
        assert_eq!(again, p);
    }

    #[test]
    fn categorical_desugars_and_reprints() {
        let src = "\
nat x;

while (x < 10) {
    x := x + 1 : 1/5 + x + 2 : 1/5 + x + 3 : 1/5 + x : 2/5
}
";
        let p = parse_program(src).unwrap();
        // nested binary choices with conditional weights 1/5, 1/4, 1/3
        let Stmt::Choice(_, p1, rest) = &p.body else { panic!() };
        assert_eq!(display_rat(p1), "1/5");
        let Stmt::Choice(_, p2, _) = rest.as_ref() else { panic!() };
        assert_eq!(display_rat(p2), "1/4");
        assert_eq!(print_program(&p), src);
    }

    #[test]
    fn guard_sugar_round_trips() {
        let src = "\
nat a;
nat b;

while (a <= 5 & b = a & 3 < b) {
    skip
}
";
        let p = parse_program(src).unwrap();
        assert_eq!(print_program(&p), src);
        assert!(p.guard.holds(&State(vec![4, 4])));
        assert!(!p.guard.holds(&State(vec![4, 3])));
        assert!(!p.guard.holds(&State(vec![6, 6])));
    }

    #[test]
    fn expectation_parsing_adds_default_piece() {
        let mut d = Decls::new();
        d.declare("failed", 0, Some(5)).unwrap();
        let pw = parse_expectation("[failed = 5]", &d).unwrap();
        assert_eq!(pw.pieces.len(), 2);
        assert_eq!(pw.eval(&State(vec![5])), crate::expect::Val::Fin(Rat::one()));
        assert_eq!(pw.eval(&State(vec![3])), crate::expect::Val::Fin(Rat::zero()));
    }

    #[test]
    fn property_with_bound() {
        let mut d = Decls::new();
        d.declare("failed", 0, Some(5)).unwrap();
        d.declare("sent", 0, Some(100)).unwrap();
        let text = "\
# toy property
post: [failed = 5]
pre: [failed <= 0 & sent <= 0]*(1/10) + [!(failed <= 0 & sent <= 0)]*INF
";
        let prop = parse_property(text, &d).unwrap();
        assert_eq!(
            prop.bound.eval(&State(vec![0, 0])),
            crate::expect::Val::Fin(Rat::ratio(1, 10))
        );
        assert_eq!(prop.bound.eval(&State(vec![1, 0])), crate::expect::Val::Inf);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(parse_program("while (x < 1) { skip }").is_err());
        assert!(parse_program("nat x; while (y < 1) { skip }").is_err());
        let mut d = Decls::new();
        d.declare("x", 0, None).unwrap();
        assert!(parse_expectation("[x < 1]*INF extra", &d).is_err());
    }

    #[test]
    fn expectation_print_parse_round_trip() {
        let mut d = Decls::new();
        d.declare("sent", 0, None).unwrap();
        d.declare("failed", 0, None).unwrap();
        let text = "[failed < 5 & sent < 8000000]*(-9/80000000*sent + 79991/720000000*failed + 9/10) + [!(failed < 5 & sent < 8000000)]*(0)";
        let pw = parse_expectation(text, &d).unwrap();
        let printed = print_expectation(&pw, &d);
        let again = parse_expectation(&printed, &d).unwrap();
        assert_eq!(pw, again);
    }
}

//! Term layer: turns S-expressions into formulas over linear arithmetic atoms.

use std::collections::{BTreeMap, HashMap};
use std::str::FromStr;

use num::{BigInt, BigRational, One, Signed, Zero};

use crate::sexp::SExp;

pub type Rat = BigRational;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sort {
    Int,
    Real,
}

impl Sort {
    pub fn parse(s: &SExp) -> Result<Sort, String> {
        match s.atom() {
            Some("Int") => Ok(Sort::Int),
            Some("Real") => Ok(Sort::Real),
            _ => Err(format!("unsupported sort: {s}")),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Sort::Int => "Int",
            Sort::Real => "Real",
        }
    }
}

/// An affine form sum(coeffs[v] * v) + k over declared variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinExpr {
    pub coeffs: BTreeMap<usize, Rat>,
    pub k: Rat,
}

impl LinExpr {
    pub fn constant(k: Rat) -> Self {
        LinExpr { coeffs: BTreeMap::new(), k }
    }

    pub fn var(v: usize) -> Self {
        let mut coeffs = BTreeMap::new();
        coeffs.insert(v, Rat::one());
        LinExpr { coeffs, k: Rat::zero() }
    }

    pub fn add(mut self, other: &LinExpr) -> Self {
        for (v, c) in &other.coeffs {
            let entry = self.coeffs.entry(*v).or_insert_with(Rat::zero);
            *entry += c;
            if entry.is_zero() {
                self.coeffs.remove(v);
            }
        }
        self.k += &other.k;
        self
    }

    pub fn scale(mut self, f: &Rat) -> Self {
        if f.is_zero() {
            return LinExpr::constant(Rat::zero());
        }
        for c in self.coeffs.values_mut() {
            *c *= f;
        }
        self.k *= f;
        self
    }

    pub fn neg(self) -> Self {
        let minus_one = -Rat::one();
        self.scale(&minus_one)
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.is_empty()
    }
}

/// Relation of an affine form against zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rel {
    Le,
    Lt,
    Eq,
    Ne,
}

/// Atom `expr rel 0`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinAtom {
    pub expr: LinExpr,
    pub rel: Rel,
}

impl LinAtom {
    /// Logical negation, staying within the same atom language.
    pub fn negate(&self) -> LinAtom {
        match self.rel {
            // not (e <= 0)  <=>  e > 0  <=>  -e < 0
            Rel::Le => LinAtom { expr: self.expr.clone().neg(), rel: Rel::Lt },
            // not (e < 0)  <=>  e >= 0  <=>  -e <= 0
            Rel::Lt => LinAtom { expr: self.expr.clone().neg(), rel: Rel::Le },
            Rel::Eq => LinAtom { expr: self.expr.clone(), rel: Rel::Ne },
            Rel::Ne => LinAtom { expr: self.expr.clone(), rel: Rel::Eq },
        }
    }
}

/// Formula in negation normal form over linear atoms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Formula {
    True,
    False,
    Atom(LinAtom),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    /// Anything outside the supported fragment (quantifiers, nonlinear
    /// terms hidden behind unsupported operators); forces `unknown`.
    Unsupported,
}

impl Formula {
    pub fn negate(&self) -> Formula {
        match self {
            Formula::True => Formula::False,
            Formula::False => Formula::True,
            Formula::Atom(a) => Formula::Atom(a.negate()),
            Formula::And(fs) => Formula::Or(fs.iter().map(|f| f.negate()).collect()),
            Formula::Or(fs) => Formula::And(fs.iter().map(|f| f.negate()).collect()),
            Formula::Unsupported => Formula::Unsupported,
        }
    }
}

enum Term {
    Bool(Formula),
    Num(LinExpr),
}

pub struct SymbolTable {
    pub names: Vec<String>,
    pub sorts: Vec<Sort>,
    pub index: HashMap<String, usize>,
}

impl SymbolTable {
    pub fn new() -> Self {
        SymbolTable { names: Vec::new(), sorts: Vec::new(), index: HashMap::new() }
    }

    pub fn declare(&mut self, name: &str, sort: Sort) -> Result<usize, String> {
        if self.index.contains_key(name) {
            return Err(format!("symbol already declared: {name}"));
        }
        let id = self.names.len();
        self.names.push(name.to_string());
        self.sorts.push(sort);
        self.index.insert(name.to_string(), id);
        Ok(id)
    }

    pub fn truncate(&mut self, len: usize) {
        while self.names.len() > len {
            let name = self.names.pop().unwrap();
            self.sorts.pop();
            self.index.remove(&name);
        }
    }
}

pub fn parse_formula(s: &SExp, sym: &SymbolTable) -> Result<Formula, String> {
    match parse_term(s, sym)? {
        Term::Bool(f) => Ok(f),
        Term::Num(_) => Err(format!("expected a Bool term: {s}")),
    }
}

fn parse_term(s: &SExp, sym: &SymbolTable) -> Result<Term, String> {
    match s {
        SExp::Atom(a) => parse_atom_term(a, sym),
        SExp::List(items) => {
            if items.is_empty() {
                return Err("empty application".into());
            }
            let head = match items[0].atom() {
                Some(h) => h,
                None => return Err(format!("unsupported application head: {}", items[0])),
            };
            let args = &items[1..];
            match head {
                "and" | "or" => {
                    let mut fs = Vec::with_capacity(args.len());
                    for a in args {
                        fs.push(parse_formula(a, sym)?);
                    }
                    Ok(Term::Bool(if head == "and" { Formula::And(fs) } else { Formula::Or(fs) }))
                }
                "not" => {
                    if args.len() != 1 {
                        return Err("not takes one argument".into());
                    }
                    Ok(Term::Bool(parse_formula(&args[0], sym)?.negate()))
                }
                "=>" => {
                    if args.len() < 2 {
                        return Err("=> takes at least two arguments".into());
                    }
                    // a => b => c  ==  a => (b => c)
                    let mut fs: Vec<Formula> = Vec::with_capacity(args.len());
                    for (i, a) in args.iter().enumerate() {
                        let f = parse_formula(a, sym)?;
                        if i + 1 == args.len() {
                            fs.push(f);
                        } else {
                            fs.push(f.negate());
                        }
                    }
                    Ok(Term::Bool(Formula::Or(fs)))
                }
                "ite" => {
                    if args.len() != 3 {
                        return Err("ite takes three arguments".into());
                    }
                    let c = parse_formula(&args[0], sym)?;
                    let t = parse_formula(&args[1], sym)?;
                    let e = parse_formula(&args[2], sym)?;
                    Ok(Term::Bool(Formula::Or(vec![
                        Formula::And(vec![c.clone(), t]),
                        Formula::And(vec![c.negate(), e]),
                    ])))
                }
                "=" | "<" | "<=" | ">" | ">=" | "distinct" => {
                    if args.len() < 2 {
                        return Err(format!("{head} takes at least two arguments"));
                    }
                    let mut nums = Vec::with_capacity(args.len());
                    for a in args {
                        match parse_term(a, sym)? {
                            Term::Num(e) => nums.push(e),
                            Term::Bool(_) => {
                                return Err(format!("boolean argument to {head}: {a}"));
                            }
                        }
                    }
                    if head == "distinct" {
                        if nums.len() != 2 {
                            return Err("distinct supported for two arguments only".into());
                        }
                        let e = nums[0].clone().add(&nums[1].clone().neg());
                        return Ok(Term::Bool(Formula::Atom(LinAtom { expr: e, rel: Rel::Ne })));
                    }
                    // Chained comparisons: pairwise over adjacent arguments.
                    let mut fs = Vec::with_capacity(nums.len() - 1);
                    for w in nums.windows(2) {
                        let lhs = w[0].clone();
                        let rhs = w[1].clone();
                        let atom = match head {
                            "=" => LinAtom { expr: lhs.add(&rhs.neg()), rel: Rel::Eq },
                            "<" => LinAtom { expr: lhs.add(&rhs.neg()), rel: Rel::Lt },
                            "<=" => LinAtom { expr: lhs.add(&rhs.neg()), rel: Rel::Le },
                            ">" => LinAtom { expr: rhs.add(&lhs.neg()), rel: Rel::Lt },
                            _ => LinAtom { expr: rhs.add(&lhs.neg()), rel: Rel::Le },
                        };
                        fs.push(Formula::Atom(atom));
                    }
                    Ok(Term::Bool(if fs.len() == 1 {
                        fs.pop().unwrap()
                    } else {
                        Formula::And(fs)
                    }))
                }
                "+" | "-" | "*" | "/" | "to_real" | "to_int" => {
                    parse_numeric_app(head, args, sym).map(Term::Num)
                }
                "forall" | "exists" => Ok(Term::Bool(Formula::Unsupported)),
                "let" => parse_let(args, sym),
                _ => Err(format!("unsupported operator: {head}")),
            }
        }
    }
}

fn parse_let(args: &[SExp], sym: &SymbolTable) -> Result<Term, String> {
    if args.len() != 2 {
        return Err("let takes a binding list and a body".into());
    }
    let bindings = args[0].list().ok_or("let bindings must be a list")?;
    // Inline by substitution at the S-expression level; bindings in a single
    // let are simultaneous, so substitute the original right-hand sides.
    let mut subst: HashMap<&str, &SExp> = HashMap::new();
    for b in bindings {
        let pair = b.list().ok_or("malformed let binding")?;
        if pair.len() != 2 {
            return Err("malformed let binding".into());
        }
        let name = pair[0].atom().ok_or("let binding name must be a symbol")?;
        subst.insert(name, &pair[1]);
    }
    let body = substitute(&args[1], &subst);
    parse_term(&body, sym)
}

fn substitute(s: &SExp, subst: &HashMap<&str, &SExp>) -> SExp {
    match s {
        SExp::Atom(a) => match subst.get(a.as_str()) {
            Some(rep) => (*rep).clone(),
            None => s.clone(),
        },
        SExp::List(items) => SExp::List(items.iter().map(|i| substitute(i, subst)).collect()),
    }
}

fn parse_numeric_app(head: &str, args: &[SExp], sym: &SymbolTable) -> Result<LinExpr, String> {
    let mut nums = Vec::with_capacity(args.len());
    for a in args {
        match parse_term(a, sym)? {
            Term::Num(e) => nums.push(e),
            Term::Bool(_) => return Err(format!("boolean argument to {head}: {a}")),
        }
    }
    match head {
        "+" => {
            let mut acc = LinExpr::constant(Rat::zero());
            for e in &nums {
                acc = acc.add(e);
            }
            Ok(acc)
        }
        "-" => {
            if nums.is_empty() {
                return Err("- takes at least one argument".into());
            }
            if nums.len() == 1 {
                return Ok(nums.pop().unwrap().neg());
            }
            let mut iter = nums.into_iter();
            let mut acc = iter.next().unwrap();
            for e in iter {
                acc = acc.add(&e.neg());
            }
            Ok(acc)
        }
        "*" => {
            // Linear fragment: at most one non-constant factor.
            let mut factor = Rat::one();
            let mut var_part: Option<LinExpr> = None;
            for e in nums {
                if e.is_constant() {
                    factor *= e.k;
                } else if var_part.is_none() {
                    var_part = Some(e);
                } else {
                    return Err("nonlinear multiplication is not supported".into());
                }
            }
            Ok(match var_part {
                Some(e) => e.scale(&factor),
                None => LinExpr::constant(factor),
            })
        }
        "/" => {
            if nums.len() != 2 {
                return Err("/ takes two arguments".into());
            }
            let den = nums.pop().unwrap();
            let num = nums.pop().unwrap();
            if !den.is_constant() || den.k.is_zero() {
                return Err("division only by a nonzero constant".into());
            }
            Ok(num.scale(&den.k.recip()))
        }
        // Exact rationals make the Int<->Real coercions identities for the
        // terms our clients emit; to_int of a non-integral constant is the
        // only case that would differ and it is folded here.
        "to_real" => {
            if nums.len() != 1 {
                return Err("to_real takes one argument".into());
            }
            Ok(nums.pop().unwrap())
        }
        "to_int" => {
            if nums.len() != 1 {
                return Err("to_int takes one argument".into());
            }
            let e = nums.pop().unwrap();
            if e.is_constant() {
                Ok(LinExpr::constant(e.k.floor()))
            } else {
                Err("to_int of a non-constant term is not supported".into())
            }
        }
        _ => unreachable!(),
    }
}

fn parse_atom_term(a: &str, sym: &SymbolTable) -> Result<Term, String> {
    match a {
        "true" => return Ok(Term::Bool(Formula::True)),
        "false" => return Ok(Term::Bool(Formula::False)),
        _ => {}
    }
    if let Some(&id) = sym.index.get(a) {
        return Ok(Term::Num(LinExpr::var(id)));
    }
    if let Some(r) = parse_numeral(a) {
        return Ok(Term::Num(LinExpr::constant(r)));
    }
    Err(format!("unknown symbol: {a}"))
}

/// Numerals: integers like `17` and decimals like `0.999`.
pub fn parse_numeral(a: &str) -> Option<Rat> {
    if let Ok(i) = BigInt::from_str(a) {
        return Some(Rat::from_integer(i));
    }
    let (int_part, frac_part) = a.split_once('.')?;
    if int_part.is_empty() || frac_part.is_empty() {
        return None;
    }
    let i = BigInt::from_str(int_part).ok()?;
    if frac_part.bytes().any(|b| !b.is_ascii_digit()) {
        return None;
    }
    let f = BigInt::from_str(frac_part).ok()?;
    let scale = BigInt::from(10u32).pow(frac_part.len() as u32);
    let neg = i.is_negative() || int_part.starts_with('-');
    let abs = Rat::from_integer(i.abs()) + Rat::new(f, scale);
    Some(if neg { -abs } else { abs })
}

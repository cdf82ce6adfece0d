//! Exact general simplex over delta-rationals, with bound backtracking.
//!
//! Follows the DPLL(T)-style linear arithmetic core: every asserted atom
//! becomes a bound on a variable (introducing an interned slack variable
//! for multi-variable forms), and `check` repairs the tableau assignment
//! with Bland-rule pivoting. Strict inequalities are modelled by an
//! infinitesimal delta component, made concrete only for model output.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use num::{One, Signed, Zero};

use crate::term::{LinAtom, Rat, Rel};

/// Value `r + d * delta` for a positive infinitesimal delta. The derived
/// lexicographic order is exactly the order of such values.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Delta {
    pub r: Rat,
    pub d: Rat,
}

impl Delta {
    fn exact(r: Rat) -> Self {
        Delta { r, d: Rat::zero() }
    }

    fn just_below(r: Rat) -> Self {
        Delta { r, d: -Rat::one() }
    }

    fn just_above(r: Rat) -> Self {
        Delta { r, d: Rat::one() }
    }

    fn add_assign(&mut self, other: &Delta) {
        self.r += &other.r;
        self.d += &other.d;
    }

    fn scaled(&self, f: &Rat) -> Delta {
        Delta { r: &self.r * f, d: &self.d * f }
    }

    fn sub(&self, other: &Delta) -> Delta {
        Delta { r: &self.r - &other.r, d: &self.d - &other.d }
    }
}

struct TrailEntry {
    var: usize,
    is_lower: bool,
    old: Option<Delta>,
}

pub struct Simplex {
    lower: Vec<Option<Delta>>,
    upper: Vec<Option<Delta>>,
    assign: Vec<Delta>,
    /// Tableau rows: basic variable = sum of coeff * nonbasic variable.
    rows: Vec<BTreeMap<usize, Rat>>,
    basic_var: Vec<usize>,
    row_of: Vec<Option<usize>>,
    /// For each nonbasic variable, the rows mentioning it.
    col: Vec<BTreeSet<usize>>,
    /// Canonical multi-variable form -> slack variable.
    forms: HashMap<Vec<(usize, Rat)>, usize>,
    trail: Vec<TrailEntry>,
    scopes: Vec<usize>,
    pub pivots: u64,
}

impl Simplex {
    pub fn new(n_vars: usize) -> Self {
        Simplex {
            lower: vec![None; n_vars],
            upper: vec![None; n_vars],
            assign: vec![Delta::exact(Rat::zero()); n_vars],
            rows: Vec::new(),
            basic_var: Vec::new(),
            row_of: vec![None; n_vars],
            col: vec![BTreeSet::new(); n_vars],
            forms: HashMap::new(),
            trail: Vec::new(),
            scopes: Vec::new(),
            pivots: 0,
        }
    }

    pub fn push(&mut self) {
        self.scopes.push(self.trail.len());
    }

    /// Restores bounds to the previous scope. Tableau pivots and slack
    /// variables persist; they only define slacks and stay sound.
    pub fn pop(&mut self) {
        let mark = self.scopes.pop().expect("pop without matching push");
        while self.trail.len() > mark {
            let e = self.trail.pop().unwrap();
            if e.is_lower {
                self.lower[e.var] = e.old;
            } else {
                self.upper[e.var] = e.old;
            }
        }
    }

    /// Asserts `atom` as a bound; returns false on an immediate conflict.
    /// `Rel::Ne` must be split by the caller before reaching this point.
    pub fn assert_atom(&mut self, atom: &LinAtom) -> bool {
        assert!(atom.rel != Rel::Ne, "disequality must be split before assertion");
        if atom.expr.coeffs.is_empty() {
            return match atom.rel {
                Rel::Le => atom.expr.k <= Rat::zero(),
                Rel::Lt => atom.expr.k < Rat::zero(),
                Rel::Eq => atom.expr.k.is_zero(),
                Rel::Ne => unreachable!(),
            };
        }
        // coeffs . x + k  rel  0   ==>   factor * v  rel  -k
        let (v, factor) = self.var_for_form(&atom.expr.coeffs);
        let rhs = -&atom.expr.k / &factor;
        let positive = factor.is_positive();
        match (atom.rel, positive) {
            (Rel::Le, true) => self.assert_upper(v, Delta::exact(rhs)),
            (Rel::Le, false) => self.assert_lower(v, Delta::exact(rhs)),
            (Rel::Lt, true) => self.assert_upper(v, Delta::just_below(rhs)),
            (Rel::Lt, false) => self.assert_lower(v, Delta::just_above(rhs)),
            (Rel::Eq, _) => {
                self.assert_upper(v, Delta::exact(rhs.clone()))
                    && self.assert_lower(v, Delta::exact(rhs))
            }
            (Rel::Ne, _) => unreachable!(),
        }
    }

    /// Maps a non-empty linear form to `(variable, factor)` with
    /// `form == factor * variable`. Single-variable forms use the variable
    /// itself; longer forms get an interned slack variable.
    fn var_for_form(&mut self, coeffs: &BTreeMap<usize, Rat>) -> (usize, Rat) {
        if coeffs.len() == 1 {
            let (&v, c) = coeffs.iter().next().unwrap();
            return (v, c.clone());
        }
        let lead = coeffs.values().next().unwrap().clone();
        let key: Vec<(usize, Rat)> =
            coeffs.iter().map(|(&v, c)| (v, c / &lead)).collect();
        if let Some(&slack) = self.forms.get(&key) {
            return (slack, lead);
        }
        let slack = self.new_slack(&key);
        self.forms.insert(key, slack);
        (slack, lead)
    }

    /// Introduces `slack = sum(coeff * var)` as a new basic variable,
    /// substituting any basic variables on the right-hand side.
    fn new_slack(&mut self, form: &[(usize, Rat)]) -> usize {
        let slack = self.lower.len();
        self.lower.push(None);
        self.upper.push(None);
        self.col.push(BTreeSet::new());
        self.row_of.push(None);

        let mut row: BTreeMap<usize, Rat> = BTreeMap::new();
        let mut value = Delta::exact(Rat::zero());
        for (v, c) in form {
            value.add_assign(&self.assign[*v].scaled(c));
            match self.row_of[*v] {
                Some(ri) => {
                    let sub_row = self.rows[ri].clone();
                    for (u, cu) in sub_row {
                        add_coeff(&mut row, u, &(c * &cu));
                    }
                }
                None => add_coeff(&mut row, *v, c),
            }
        }
        self.assign.push(value);

        let ri = self.rows.len();
        for u in row.keys() {
            self.col[*u].insert(ri);
        }
        self.rows.push(row);
        self.basic_var.push(slack);
        self.row_of[slack] = Some(ri);
        slack
    }

    fn assert_upper(&mut self, v: usize, c: Delta) -> bool {
        if let Some(l) = &self.lower[v] {
            if c < *l {
                return false;
            }
        }
        if let Some(u) = &self.upper[v] {
            if *u <= c {
                return true;
            }
        }
        self.trail.push(TrailEntry { var: v, is_lower: false, old: self.upper[v].take() });
        self.upper[v] = Some(c.clone());
        if self.row_of[v].is_none() && self.assign[v] > c {
            self.update(v, c);
        }
        true
    }

    fn assert_lower(&mut self, v: usize, c: Delta) -> bool {
        if let Some(u) = &self.upper[v] {
            if c > *u {
                return false;
            }
        }
        if let Some(l) = &self.lower[v] {
            if *l >= c {
                return true;
            }
        }
        self.trail.push(TrailEntry { var: v, is_lower: true, old: self.lower[v].take() });
        self.lower[v] = Some(c.clone());
        if self.row_of[v].is_none() && self.assign[v] < c {
            self.update(v, c);
        }
        true
    }

    /// Moves nonbasic `v` to value `c`, propagating into basic variables.
    fn update(&mut self, v: usize, c: Delta) {
        let diff = c.sub(&self.assign[v]);
        let touched: Vec<usize> = self.col[v].iter().copied().collect();
        for ri in touched {
            let coeff = self.rows[ri][&v].clone();
            let b = self.basic_var[ri];
            let inc = diff.scaled(&coeff);
            self.assign[b].add_assign(&inc);
        }
        self.assign[v] = c;
    }

    /// Repairs the assignment; true iff all bounds can be met.
    pub fn check(&mut self) -> bool {
        loop {
            // Bland's rule: smallest violating basic variable.
            let mut violated: Option<(usize, bool)> = None;
            for v in 0..self.assign.len() {
                if self.row_of[v].is_none() {
                    continue;
                }
                if let Some(l) = &self.lower[v] {
                    if self.assign[v] < *l {
                        violated = Some((v, true));
                        break;
                    }
                }
                if let Some(u) = &self.upper[v] {
                    if self.assign[v] > *u {
                        violated = Some((v, false));
                        break;
                    }
                }
            }
            let (vb, need_increase) = match violated {
                None => return true,
                Some(x) => x,
            };
            let ri = self.row_of[vb].unwrap();
            let target = if need_increase {
                self.lower[vb].clone().unwrap()
            } else {
                self.upper[vb].clone().unwrap()
            };
            // Smallest suitable nonbasic variable in the row.
            let mut pivot: Option<usize> = None;
            for (u, c) in &self.rows[ri] {
                let grows = c.is_positive() == need_increase;
                let ok = if grows {
                    match &self.upper[*u] {
                        Some(up) => self.assign[*u] < *up,
                        None => true,
                    }
                } else {
                    match &self.lower[*u] {
                        Some(lo) => self.assign[*u] > *lo,
                        None => true,
                    }
                };
                if ok {
                    pivot = Some(*u);
                    break;
                }
            }
            let vn = match pivot {
                None => return false,
                Some(u) => u,
            };
            self.pivot_and_update(vb, vn, target);
        }
    }

    fn pivot_and_update(&mut self, vb: usize, vn: usize, target: Delta) {
        self.pivots += 1;
        let ri = self.row_of[vb].unwrap();
        let a = self.rows[ri][&vn].clone();
        let theta = target.sub(&self.assign[vb]).scaled(&a.recip());
        self.assign[vb] = target;
        let touched: Vec<usize> = self.col[vn].iter().copied().collect();
        for rk in touched {
            if rk == ri {
                continue;
            }
            let c = self.rows[rk][&vn].clone();
            let inc = theta.scaled(&c);
            let b = self.basic_var[rk];
            self.assign[b].add_assign(&inc);
        }
        self.assign[vn].add_assign(&theta);

        // Rewrite the pivot row to define vn, then substitute elsewhere.
        let old_row = std::mem::take(&mut self.rows[ri]);
        for u in old_row.keys() {
            self.col[*u].remove(&ri);
        }
        let inv = a.recip();
        let mut new_row: BTreeMap<usize, Rat> = BTreeMap::new();
        new_row.insert(vb, inv.clone());
        for (u, c) in &old_row {
            if *u != vn {
                new_row.insert(*u, -(c * &inv));
            }
        }
        for u in new_row.keys() {
            self.col[*u].insert(ri);
        }
        self.rows[ri] = new_row.clone();
        self.basic_var[ri] = vn;
        self.row_of[vb] = None;
        self.row_of[vn] = Some(ri);

        let users: Vec<usize> = self.col[vn].iter().copied().filter(|&rk| rk != ri).collect();
        for rk in users {
            let c = self.rows[rk].remove(&vn).unwrap();
            self.col[vn].remove(&rk);
            for (u, cu) in &new_row {
                let before = self.rows[rk].contains_key(u);
                add_coeff(&mut self.rows[rk], *u, &(&c * cu));
                let after = self.rows[rk].contains_key(u);
                if after && !before {
                    self.col[*u].insert(rk);
                } else if before && !after {
                    self.col[*u].remove(&rk);
                }
            }
        }
    }

    /// Concrete rational values for variables `0..n`, valid right after a
    /// successful `check`. Picks a delta small enough for every bound.
    pub fn concrete_model(&self, n: usize) -> Vec<Rat> {
        let mut eps = Rat::one();
        for v in 0..self.assign.len() {
            let a = &self.assign[v];
            if let Some(l) = &self.lower[v] {
                shrink_eps(&mut eps, l, a);
            }
            if let Some(u) = &self.upper[v] {
                shrink_eps(&mut eps, a, u);
            }
        }
        (0..n).map(|v| &self.assign[v].r + &self.assign[v].d * &eps).collect()
    }

    /// Concrete value of a single variable under the same delta choice as
    /// `concrete_model`; used for branch point selection.
    pub fn concrete_value(&self, v: usize) -> Rat {
        self.concrete_model(v + 1).pop().unwrap()
    }
}

/// Keeps `lo <= hi` true once delta is a concrete epsilon in (0, eps].
fn shrink_eps(eps: &mut Rat, lo: &Delta, hi: &Delta) {
    if hi.r > lo.r && hi.d < lo.d {
        let cand = (&hi.r - &lo.r) / (&lo.d - &hi.d);
        if cand < *eps {
            *eps = cand;
        }
    }
}

fn add_coeff(row: &mut BTreeMap<usize, Rat>, v: usize, c: &Rat) {
    use std::collections::btree_map::Entry;
    match row.entry(v) {
        Entry::Vacant(e) => {
            if !c.is_zero() {
                e.insert(c.clone());
            }
        }
        Entry::Occupied(mut e) => {
            *e.get_mut() += c;
            if e.get().is_zero() {
                e.remove();
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::LinExpr;

    fn rat(n: i64, d: i64) -> Rat {
        Rat::new(n.into(), d.into())
    }

    fn atom(coeffs: &[(usize, i64)], k: i64, rel: Rel) -> LinAtom {
        let mut m = BTreeMap::new();
        for (v, c) in coeffs {
            m.insert(*v, rat(*c, 1));
        }
        LinAtom { expr: LinExpr { coeffs: m, k: rat(k, 1) }, rel }
    }

    #[test]
    fn contradictory_bounds_are_unsat() {
        let mut s = Simplex::new(1);
        // x <= -1 and x >= 0
        assert!(s.assert_atom(&atom(&[(0, 1)], 1, Rel::Le)));
        assert!(!s.assert_atom(&atom(&[(0, -1)], 0, Rel::Le)));
    }

    #[test]
    fn two_var_system_is_sat_with_model() {
        let mut s = Simplex::new(2);
        // x + y <= 4, x - y <= 2, -x <= -3  (x >= 3)
        assert!(s.assert_atom(&atom(&[(0, 1), (1, 1)], -4, Rel::Le)));
        assert!(s.assert_atom(&atom(&[(0, 1), (1, -1)], -2, Rel::Le)));
        assert!(s.assert_atom(&atom(&[(0, -1)], 3, Rel::Le)));
        assert!(s.check());
        let m = s.concrete_model(2);
        assert!(&m[0] + &m[1] <= rat(4, 1));
        assert!(&m[0] - &m[1] <= rat(2, 1));
        assert!(m[0] >= rat(3, 1));
    }

    #[test]
    fn strict_sandwich_is_unsat() {
        let mut s = Simplex::new(1);
        // x < 1 and x > 1: the bounds clash as soon as both are asserted.
        assert!(s.assert_atom(&atom(&[(0, 1)], -1, Rel::Lt)));
        assert!(!s.assert_atom(&atom(&[(0, -1)], 1, Rel::Lt)));
    }

    #[test]
    fn strict_gap_has_interior_model() {
        let mut s = Simplex::new(1);
        // 0 < x < 1
        assert!(s.assert_atom(&atom(&[(0, -1)], 0, Rel::Lt)));
        assert!(s.assert_atom(&atom(&[(0, 1)], -1, Rel::Lt)));
        assert!(s.check());
        let m = s.concrete_model(1);
        assert!(m[0] > rat(0, 1) && m[0] < rat(1, 1));
    }

    #[test]
    fn pop_restores_satisfiability() {
        let mut s = Simplex::new(2);
        assert!(s.assert_atom(&atom(&[(0, 1), (1, 1)], -1, Rel::Eq)));
        assert!(s.check());
        s.push();
        assert!(s.assert_atom(&atom(&[(0, -1)], 2, Rel::Le))); // x >= 2
        assert!(s.assert_atom(&atom(&[(1, -1)], 2, Rel::Le))); // y >= 2
        assert!(!s.check());
        s.pop();
        assert!(s.check());
        let m = s.concrete_model(2);
        assert_eq!(&m[0] + &m[1], rat(1, 1));
    }
}

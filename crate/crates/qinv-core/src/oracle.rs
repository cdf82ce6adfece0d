//! Exact finite-state oracle.
//!
//! For programs whose variables are all bounded, the loop induces a
//! finite Markov chain over the declared box of states. The oracle
//! computes the least fixed point of the loop's characteristic function
//! exactly: states that cannot reach the loop's exit get value zero, and
//! the rest are solved per strongly connected component in reverse
//! topological order with exact Gaussian elimination.
//!
//! The oracle is deliberately independent of the transformer pipeline:
//! it only uses the one-step distribution of the loop body and direct
//! evaluation of expectations, so agreement with the synthesizer's
//! machinery is meaningful evidence of correctness.

use std::collections::HashMap;

use num_traits::{Signed, Zero};

use crate::expect::{Piecewise, Val};
use crate::linalg::solve_dense;
use crate::scalar::Rat;
use crate::syntax::{LoopProgram, State};
use crate::wp::{distribution, expected_value};

#[derive(Debug, thiserror::Error)]
pub enum OracleError {
    #[error("program is not finite-state: {0} has no upper bound")]
    Unbounded(String),
    #[error("state space too large: {0} states exceed the cap of {1}")]
    TooLarge(u128, usize),
    #[error("loop body leaves the declared bounds at state {0}")]
    NotClosed(State),
    #[error("body execution failed: {0}")]
    Body(String),
    #[error("singular linear system in component containing {0}")]
    Singular(State),
}

/// The finite Markov chain of a bounded loop.
pub struct Chain {
    pub states: Vec<State>,
    pub index: HashMap<State, usize>,
    /// Guard truth per state.
    pub inside: Vec<bool>,
    /// One-step transition distribution for guard states; empty for
    /// exit states.
    pub trans: Vec<Vec<(usize, Rat)>>,
}

/// Enumerates every state of the declared box in lexicographic order.
pub fn enumerate_box(
    decls: &crate::syntax::Decls,
    cap: usize,
) -> Result<Vec<State>, OracleError> {
    let mut sizes = Vec::new();
    let mut total: u128 = 1;
    for x in decls.ids() {
        let (lo, hi) = decls.bounds(x);
        let hi = hi.ok_or_else(|| OracleError::Unbounded(decls.name(x).to_string()))?;
        let size = (hi - lo + 1) as u128;
        total = total.saturating_mul(size);
        sizes.push((lo, hi));
    }
    if total > cap as u128 {
        return Err(OracleError::TooLarge(total, cap));
    }
    let mut states = Vec::with_capacity(total as usize);
    let mut cursor: Vec<u64> = sizes.iter().map(|(lo, _)| *lo).collect();
    loop {
        states.push(State(cursor.clone()));
        if states.len() as u128 == total {
            return Ok(states);
        }
        let mut dim = sizes.len();
        loop {
            dim -= 1;
            if cursor[dim] < sizes[dim].1 {
                cursor[dim] += 1;
                break;
            }
            cursor[dim] = sizes[dim].0;
        }
    }
}

/// Enumerates the declared box and the one-step transitions.
pub fn build_chain(prog: &LoopProgram, cap: usize) -> Result<Chain, OracleError> {
    let states = enumerate_box(&prog.decls, cap)?;
    finish_chain(prog, states)
}

fn finish_chain(prog: &LoopProgram, states: Vec<State>) -> Result<Chain, OracleError> {
    let index: HashMap<State, usize> =
        states.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
    let mut inside = Vec::with_capacity(states.len());
    let mut trans = Vec::with_capacity(states.len());
    for s in &states {
        let hold = prog.guard.holds(s);
        inside.push(hold);
        if hold {
            let dist = distribution(&prog.body, s).map_err(OracleError::Body)?;
            let mut row = Vec::with_capacity(dist.len());
            for (t, p) in dist {
                match index.get(&t) {
                    Some(&j) => row.push((j, p)),
                    None => return Err(OracleError::NotClosed(s.clone())),
                }
            }
            trans.push(row);
        } else {
            trans.push(Vec::new());
        }
    }
    Ok(Chain { states, index, inside, trans })
}

/// Exact least fixed point of the characteristic function for
/// postexpectation `f`: per state, the expected value of `f` at loop
/// exit, counting only terminating runs.
pub fn exact_lfp(chain: &Chain, f: &Piecewise) -> Result<Vec<Rat>, OracleError> {
    let n = chain.states.len();
    // states that can reach an exit state; all others get value zero
    let mut can_exit = vec![false; n];
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut queue = Vec::new();
    for i in 0..n {
        if chain.inside[i] {
            for (j, _) in &chain.trans[i] {
                preds[*j].push(i);
            }
        } else {
            can_exit[i] = true;
            queue.push(i);
        }
    }
    while let Some(i) = queue.pop() {
        for &p in &preds[i] {
            if !can_exit[p] {
                can_exit[p] = true;
                queue.push(p);
            }
        }
    }

    let mut values = vec![Rat::zero(); n];
    for i in 0..n {
        if !chain.inside[i] {
            if let Val::Fin(q) = f.eval(&chain.states[i]) {
                values[i] = q;
            } else {
                // infinite postexpectations never reach the oracle;
                // the frontend rejects them for oracle use
                return Err(OracleError::Body("infinite postexpectation".to_string()));
            }
        }
    }

    // strongly connected components of the guard states that can exit,
    // solved in reverse topological order
    let relevant: Vec<usize> =
        (0..n).filter(|&i| chain.inside[i] && can_exit[i]).collect();
    let components = tarjan_sccs(&relevant, &chain.trans, &|j| {
        chain.inside[j] && can_exit[j]
    });
    // tarjan emits components in reverse topological order of the
    // condensation: every edge out of a later component targets an
    // earlier one, so earlier components are already solved
    for comp in components {
        solve_component(chain, &comp, &mut values)?;
    }
    Ok(values)
}

fn solve_component(
    chain: &Chain,
    comp: &[usize],
    values: &mut [Rat],
) -> Result<(), OracleError> {
    let local: HashMap<usize, usize> =
        comp.iter().enumerate().map(|(k, &i)| (i, k)).collect();
    let m = comp.len();
    // (I - P) v = c with c the mass flowing to already solved states
    let mut a = vec![vec![Rat::zero(); m]; m];
    let mut b = vec![Rat::zero(); m];
    for (k, &i) in comp.iter().enumerate() {
        a[k][k] = Rat::from_integer(1.into());
        for (j, p) in &chain.trans[i] {
            match local.get(j) {
                Some(&l) => {
                    let cur = a[k][l].clone();
                    a[k][l] = cur - p;
                }
                None => b[k] += p * &values[*j],
            }
        }
    }
    let solved = solve_dense(a, b)
        .ok_or_else(|| OracleError::Singular(chain.states[comp[0]].clone()))?;
    for (k, &i) in comp.iter().enumerate() {
        values[i] = solved[k].clone();
    }
    Ok(())
}

/// Iterative Tarjan over the subgraph induced by `keep`, emitting
/// components in reverse topological order of the condensation.
fn tarjan_sccs(
    nodes: &[usize],
    trans: &[Vec<(usize, Rat)>],
    keep: &dyn Fn(usize) -> bool,
) -> Vec<Vec<usize>> {
    #[derive(Clone)]
    struct NodeData {
        index: Option<usize>,
        lowlink: usize,
        on_stack: bool,
    }
    let n = trans.len();
    let mut data = vec![NodeData { index: None, lowlink: 0, on_stack: false }; n];
    let mut counter = 0usize;
    let mut stack: Vec<usize> = Vec::new();
    let mut out = Vec::new();

    for &root in nodes {
        if data[root].index.is_some() {
            continue;
        }
        // explicit DFS stack: (node, next successor position)
        let mut work: Vec<(usize, usize)> = vec![(root, 0)];
        while let Some(&mut (v, ref mut pos)) = work.last_mut() {
            if *pos == 0 {
                data[v].index = Some(counter);
                data[v].lowlink = counter;
                counter += 1;
                stack.push(v);
                data[v].on_stack = true;
            }
            let mut advanced = false;
            while *pos < trans[v].len() {
                let (w, _) = trans[v][*pos];
                *pos += 1;
                if !keep(w) {
                    continue;
                }
                match data[w].index {
                    None => {
                        work.push((w, 0));
                        advanced = true;
                        break;
                    }
                    Some(widx) => {
                        if data[w].on_stack {
                            data[v].lowlink = data[v].lowlink.min(widx);
                        }
                    }
                }
            }
            if advanced {
                continue;
            }
            work.pop();
            if let Some(&(parent, _)) = work.last() {
                let child_low = data[v].lowlink;
                data[parent].lowlink = data[parent].lowlink.min(child_low);
            }
            if Some(data[v].lowlink) == data[v].index {
                let mut comp = Vec::new();
                loop {
                    let w = stack.pop().unwrap();
                    data[w].on_stack = false;
                    comp.push(w);
                    if w == v {
                        break;
                    }
                }
                out.push(comp);
            }
        }
    }
    out
}

/// Evaluates the three invariant conditions at one state by direct
/// computation, mirroring what the SMT verifier checks symbolically:
/// nonnegativity of `inv`, one-step inductivity against the
/// characteristic function for `f`, and the bound `inv <= g`.
pub struct PointwiseReport {
    pub well_defined: bool,
    pub inductive: bool,
    pub safe: bool,
}

pub fn pointwise_check(
    prog: &LoopProgram,
    inv: &Piecewise,
    f: &Piecewise,
    bound: &Piecewise,
    s: &State,
) -> Result<PointwiseReport, String> {
    let inv_val = match inv.eval(s) {
        Val::Fin(q) => q,
        Val::Inf => return Err(format!("invariant is infinite at {s}")),
    };
    let well_defined = !inv_val.is_negative();
    let step = if prog.guard.holds(s) {
        expected_value(&prog.body, s, &|t| match inv.eval(t) {
            Val::Fin(q) => q,
            Val::Inf => unreachable!("invariant must be finite"),
        })?
    } else {
        match f.eval(s) {
            Val::Fin(q) => q,
            Val::Inf => return Err(format!("postexpectation is infinite at {s}")),
        }
    };
    let inductive = step <= inv_val;
    let safe = match bound.eval(s) {
        Val::Fin(g) => inv_val <= g,
        Val::Inf => true,
    };
    Ok(PointwiseReport { well_defined, inductive, safe })
}

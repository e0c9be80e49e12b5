//! A small deterministic DPLL solver. Variables are `0..n`; literal `2v` is `v` true and
//! `2v + 1` is `v` false.

use alloc::vec;
use alloc::vec::Vec;

pub(crate) type Lit = usize;

pub(crate) fn pos(v: usize) -> Lit {
    2 * v
}

pub(crate) fn neg(v: usize) -> Lit {
    2 * v + 1
}

pub(crate) fn var(l: Lit) -> usize {
    l / 2
}

pub(crate) fn is_pos(l: Lit) -> bool {
    l.is_multiple_of(2)
}

fn value(assign: &[Option<bool>], l: Lit) -> Option<bool> {
    assign[var(l)].map(|b| b == is_pos(l))
}

/// One unit-propagation step outcome.
enum Prop {
    Done,
    Conflict(usize),
}

/// Propagates to a fixed point, recording each forced literal with the clause that forced it.
fn propagate(clauses: &[Vec<Lit>], assign: &mut [Option<bool>], log: &mut Vec<(Lit, usize)>) -> Prop {
    loop {
        let mut changed = false;
        for (ci, c) in clauses.iter().enumerate() {
            let mut unassigned = None;
            let mut n_unassigned = 0;
            let mut satisfied = false;
            for &l in c {
                match value(assign, l) {
                    Some(true) => {
                        satisfied = true;
                        break;
                    }
                    Some(false) => {}
                    None => {
                        n_unassigned += 1;
                        unassigned = Some(l);
                    }
                }
            }
            if satisfied {
                continue;
            }
            match (n_unassigned, unassigned) {
                (0, _) => return Prop::Conflict(ci),
                (1, Some(l)) => {
                    assign[var(l)] = Some(is_pos(l));
                    log.push((l, ci));
                    changed = true;
                }
                _ => {}
            }
        }
        if !changed {
            return Prop::Done;
        }
    }
}

fn dpll(clauses: &[Vec<Lit>], assign: &mut Vec<Option<bool>>) -> bool {
    let mut log = Vec::new();
    if let Prop::Conflict(_) = propagate(clauses, assign, &mut log) {
        return false;
    }
    let Some(v) = assign.iter().position(|a| a.is_none()) else {
        return true;
    };
    for choice in [true, false] {
        let mut trial = assign.clone();
        trial[v] = Some(choice);
        if dpll(clauses, &mut trial) {
            *assign = trial;
            return true;
        }
    }
    false
}

/// A satisfying assignment, branching on the lowest unassigned variable with `true` first.
pub(crate) fn solve(n_vars: usize, clauses: &[Vec<Lit>]) -> Option<Vec<bool>> {
    let mut assign = vec![None; n_vars];
    if dpll(clauses, &mut assign) {
        Some(assign.into_iter().map(|a| a.unwrap_or(false)).collect())
    } else {
        None
    }
}

/// Unit propagation from scratch: forced literals in order and the conflicting clause, if any.
pub(crate) fn propagation_trace(n_vars: usize, clauses: &[Vec<Lit>]) -> (Vec<(Lit, usize)>, Option<usize>) {
    let mut assign = vec![None; n_vars];
    let mut log = Vec::new();
    match propagate(clauses, &mut assign, &mut log) {
        Prop::Conflict(c) => (log, Some(c)),
        Prop::Done => (log, None),
    }
}

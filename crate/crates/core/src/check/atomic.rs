//! Linearization search for single-variable Read/Write histories.
//!
//! Operations are tried in (end, start, id) order. A candidate may be placed
//! once everything that precedes it is placed; a Read only if it returns the
//! current value. Failed (placed-set, value) states are memoised.

use std::collections::{BTreeSet, HashSet};
use std::hash::Hash;

use super::Linearization;
use crate::history::{History, OpId, OpKind, Step, Value};

struct Node {
    id: OpId,
    write: bool,
    val: Value,
    start: Step,
    end: Option<Step>,
}

trait Mask: Clone + Eq + Hash {
    fn empty(n: usize) -> Self;
    fn insert(&mut self, i: usize);
    fn has(&self, i: usize) -> bool;
    fn covers(&self, other: &Self) -> bool;
}

impl Mask for u64 {
    fn empty(_: usize) -> Self {
        0
    }
    fn insert(&mut self, i: usize) {
        *self |= 1 << i;
    }
    fn has(&self, i: usize) -> bool {
        *self & (1 << i) != 0
    }
    fn covers(&self, other: &Self) -> bool {
        *self & *other == *other
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
struct Wide(Vec<u64>);

impl Mask for Wide {
    fn empty(n: usize) -> Self {
        Wide(vec![0; n.div_ceil(64)])
    }
    fn insert(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }
    fn has(&self, i: usize) -> bool {
        self.0[i / 64] & (1 << (i % 64)) != 0
    }
    fn covers(&self, other: &Self) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a & b == *b)
    }
}

/// Operations of `var` as seen at step `cutoff` (everything when `None`).
/// Reads still running at the cutoff are dropped; Writes still running
/// become pending.
fn nodes(h: &History, var: &str, cutoff: Option<Step>) -> Vec<Node> {
    let mut nodes: Vec<Node> = h
        .ops_on(var)
        .filter(|o| matches!(o.kind, OpKind::Read | OpKind::Write))
        .filter(|o| cutoff.is_none_or(|t| o.start <= t))
        .filter_map(|o| {
            let end = o.end.filter(|e| cutoff.is_none_or(|t| *e <= t));
            let write = o.kind == OpKind::Write;
            if !write && end.is_none() {
                return None;
            }
            Some(Node {
                id: o.id,
                write,
                val: if write { o.arg? } else { o.ret_value()? },
                start: o.start,
                end,
            })
        })
        .collect();
    nodes.sort_by_key(|n| (n.end.unwrap_or(Step::MAX), n.start, n.id));
    nodes
}

struct Search<'n, M> {
    nodes: &'n [Node],
    preds: Vec<M>,
    required: M,
    failed: HashSet<(M, Value)>,
    path: Vec<usize>,
}

impl<M: Mask> Search<'_, M> {
    fn new(nodes: &[Node]) -> Search<'_, M> {
        let n = nodes.len();
        let mut preds = vec![M::empty(n); n];
        let mut required = M::empty(n);
        for (i, a) in nodes.iter().enumerate() {
            if a.end.is_some() {
                required.insert(i);
            }
            for (j, b) in nodes.iter().enumerate() {
                if b.end.is_some_and(|e| e < a.start) {
                    preds[i].insert(j);
                }
            }
        }
        Search {
            nodes,
            preds,
            required,
            failed: HashSet::new(),
            path: Vec::with_capacity(n),
        }
    }

    fn go(&mut self, done: M, value: Value) -> bool {
        if done.covers(&self.required) {
            return true;
        }
        if self.failed.contains(&(done.clone(), value)) {
            return false;
        }
        for i in 0..self.nodes.len() {
            if done.has(i) || !done.covers(&self.preds[i]) {
                continue;
            }
            let node = &self.nodes[i];
            if !node.write && node.val != value {
                continue;
            }
            let mut next = done.clone();
            next.insert(i);
            self.path.push(i);
            if self.go(next, node.val) {
                return true;
            }
            self.path.pop();
        }
        self.failed.insert((done, value));
        false
    }
}

fn search(nodes: &[Node], init: Value) -> Option<Vec<OpId>> {
    fn run<M: Mask>(nodes: &[Node], init: Value) -> Option<Vec<OpId>> {
        let mut s = Search::<M>::new(nodes);
        let start = M::empty(nodes.len());
        s.go(start, init)
            .then(|| s.path.iter().map(|&i| nodes[i].id).collect())
    }
    if nodes.len() <= 64 {
        run::<u64>(nodes, init)
    } else {
        run::<Wide>(nodes, init)
    }
}

pub(super) fn linearize(h: &History, var: &str) -> Option<Vec<OpId>> {
    search(&nodes(h, var, None), h.vars()[var].init)
}

/// The Read whose response first makes the history of `var` impossible to
/// linearize, with that response step. Only meaningful when
/// [`linearize`] failed.
pub(super) fn earliest_inconsistent_read(h: &History, var: &str) -> (OpId, Step) {
    let init = h.vars()[var].init;
    let mut reads: Vec<(Step, OpId)> = h
        .ops_on(var)
        .filter(|o| o.kind == OpKind::Read)
        .filter_map(|o| Some((o.end?, o.id)))
        .collect();
    reads.sort();
    for &(end, id) in &reads {
        if search(&nodes(h, var, Some(end)), init).is_none() {
            return (id, end);
        }
    }
    let &(end, id) = reads.last().expect("an unlinearizable variable has a completed read");
    (id, end)
}

/// Replays `lin` against `h`: every completed Read/Write of the variable
/// appears once, only pending Writes may be added, the order extends
/// precedence, and each Read returns the latest Write before it.
pub fn verify_linearization(h: &History, lin: &Linearization) -> bool {
    let Some(decl) = h.var(&lin.var) else {
        return false;
    };
    let mut seen = BTreeSet::new();
    let mut ops = Vec::with_capacity(lin.order.len());
    for id in &lin.order {
        let Some(op) = h.op(*id) else { return false };
        let allowed = op.var == lin.var
            && match op.kind {
                OpKind::Write => true,
                OpKind::Read => op.is_complete(),
                _ => false,
            };
        if !allowed || !seen.insert(*id) {
            return false;
        }
        ops.push(op);
    }
    let all_completed = h
        .ops_on(&lin.var)
        .filter(|o| matches!(o.kind, OpKind::Read | OpKind::Write) && o.is_complete())
        .all(|o| seen.contains(&o.id));
    if !all_completed {
        return false;
    }
    for (i, a) in ops.iter().enumerate() {
        if ops[i + 1..].iter().any(|b| b.ends_before(a)) {
            return false;
        }
    }
    let mut current = decl.init;
    for op in ops {
        match op.kind {
            OpKind::Write => current = op.arg.expect("write argument"),
            _ if op.ret_value() != Some(current) => return false,
            _ => {}
        }
    }
    true
}

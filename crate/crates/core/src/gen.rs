//! Generators of single-variable, single-writer histories.
//!
//! The writer is always `p0`; the variable is `x` with initial value 0.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::history::{
    feasible_values, History, OpId, OpKind, OpRecord, Output, ProcessId, SemanticsLevel, Step,
    Value, VarDecl,
};

pub const VAR: &str = "x";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenParams {
    /// Upper bound on the number of operations (at least 1 is generated).
    pub max_ops: usize,
    /// Domain sizes are drawn from `2..=max_domain`.
    pub max_domain: u64,
    /// Reader processes are `p1..=max_readers`.
    pub max_readers: u32,
    /// Chance that a process's last operation never responds.
    pub pending: f64,
    /// Chance that a Read returns a value outside its regular feasible set.
    pub wild: f64,
}

impl Default for GenParams {
    fn default() -> Self {
        Self {
            max_ops: 6,
            max_domain: 4,
            max_readers: 3,
            pending: 0.1,
            wild: 0.25,
        }
    }
}

fn build(domain: u64, readers: u32, ops: Vec<OpRecord>) -> History {
    let decl = VarDecl::new(
        domain,
        Value(0),
        [ProcessId(0)],
        (1..=readers).map(ProcessId),
    );
    History::new(BTreeMap::from([(Arc::from(VAR), decl)]), ops).expect("generated history is valid")
}

/// A random history. Each process runs its operations back to back; the
/// processes are interleaved at random, event by event.
pub fn random_history(rng: &mut impl Rng, p: &GenParams) -> History {
    let domain = rng.gen_range(2..=p.max_domain.max(2));
    let readers = rng.gen_range(1..=p.max_readers.max(1));
    let total = rng.gen_range(1..=p.max_ops.max(1));
    let mut queues: Vec<Vec<OpKind>> = vec![Vec::new(); readers as usize + 1];
    for _ in 0..total {
        let proc = rng.gen_range(0..=readers) as usize;
        queues[proc].push(if proc == 0 { OpKind::Write } else { OpKind::Read });
    }
    let stop_early: Vec<bool> = queues.iter().map(|_| rng.gen_bool(p.pending)).collect();

    // each process alternates invoke / respond; an open op is in `open`
    let var: Arc<str> = Arc::from(VAR);
    let mut ops: Vec<OpRecord> = Vec::new();
    let mut next: Vec<usize> = vec![0; queues.len()];
    let mut open: Vec<Option<usize>> = vec![None; queues.len()];
    let mut step: Step = 0;
    loop {
        let live: Vec<usize> = (0..queues.len())
            .filter(|&q| {
                let last_pending = stop_early[q] && open[q].is_some() && next[q] == queues[q].len();
                (open[q].is_some() && !last_pending) || next[q] < queues[q].len()
            })
            .collect();
        if live.is_empty() {
            break;
        }
        let q = live[rng.gen_range(0..live.len())];
        match open[q].take() {
            Some(i) => ops[i].end = Some(step),
            None => {
                let kind = queues[q][next[q]];
                next[q] += 1;
                open[q] = Some(ops.len());
                ops.push(OpRecord {
                    id: OpId(ops.len() as u64),
                    proc: ProcessId(q as u32),
                    var: var.clone(),
                    kind,
                    arg: (kind == OpKind::Write).then(|| Value(rng.gen_range(0..domain))),
                    ret: None,
                    start: step,
                    end: None,
                });
            }
        }
        step += 1;
    }

    // Read values need the finished intervals
    for op in ops.iter_mut().filter(|o| o.kind == OpKind::Read && o.end.is_some()) {
        op.ret = Some(Output::Value(Value(0)));
    }
    let shape = build(domain, readers, ops.clone());
    for op in ops.iter_mut().filter(|o| o.kind == OpKind::Read && o.end.is_some()) {
        let v = if rng.gen_bool(p.wild) {
            Value(rng.gen_range(0..domain))
        } else {
            let feasible: Vec<Value> = feasible_values(&shape, op.id, SemanticsLevel::Regular)
                .expect("completed read")
                .iter()
                .collect();
            feasible[rng.gen_range(0..feasible.len())]
        };
        op.ret = Some(Output::Value(v));
    }
    build(domain, readers, ops)
}

/// `count` histories from a ChaCha8 stream seeded with `seed`.
pub fn random_histories(seed: u64, count: usize, p: &GenParams) -> Vec<History> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| random_history(&mut rng, p)).collect()
}

/// Calls `visit` on every history with up to `max_ops` completed
/// operations over the domain `0..domain`, up to process renaming.
///
/// Operations are numbered in invocation order. Writes belong to `p0` and
/// must not overlap each other; Read `k` belongs to its own process, so
/// every interval order of Reads is reachable.
pub fn exhaustive_histories(max_ops: usize, domain: u64, mut visit: impl FnMut(&History)) -> u64 {
    let mut count = 0;
    for k in 0..=max_ops {
        for events in interval_orders(k) {
            for kinds in 0u32..(1 << k) {
                let kind = |i: usize| if kinds & (1 << i) != 0 { OpKind::Write } else { OpKind::Read };
                if writes_overlap(&events, kind) {
                    continue;
                }
                let mut vals = vec![0u64; k];
                loop {
                    let h = materialize(&events, k, domain, kind, &vals);
                    visit(&h);
                    count += 1;
                    if !bump(&mut vals, domain) {
                        break;
                    }
                }
            }
        }
    }
    count
}

/// Odometer increment; false after the last combination.
fn bump(vals: &mut [u64], base: u64) -> bool {
    for v in vals.iter_mut() {
        *v += 1;
        if *v < base {
            return true;
        }
        *v = 0;
    }
    false
}

/// Event sequences for `k` intervals: `(op, is_invoke)`, with invokes in
/// op order and each respond after its invoke.
fn interval_orders(k: usize) -> Vec<Vec<(usize, bool)>> {
    fn go(
        k: usize,
        invoked: usize,
        open: &mut Vec<usize>,
        cur: &mut Vec<(usize, bool)>,
        out: &mut Vec<Vec<(usize, bool)>>,
    ) {
        if invoked == k && open.is_empty() {
            out.push(cur.clone());
            return;
        }
        if invoked < k {
            open.push(invoked);
            cur.push((invoked, true));
            go(k, invoked + 1, open, cur, out);
            cur.pop();
            open.pop();
        }
        for i in 0..open.len() {
            let op = open.remove(i);
            cur.push((op, false));
            go(k, invoked, open, cur, out);
            cur.pop();
            open.insert(i, op);
        }
    }
    let mut out = Vec::new();
    go(k, 0, &mut Vec::new(), &mut Vec::new(), &mut out);
    out
}

fn writes_overlap(events: &[(usize, bool)], kind: impl Fn(usize) -> OpKind) -> bool {
    let mut open_write = false;
    for &(op, invoke) in events {
        if kind(op) != OpKind::Write {
            continue;
        }
        if invoke {
            if open_write {
                return true;
            }
            open_write = true;
        } else {
            open_write = false;
        }
    }
    false
}

fn materialize(
    events: &[(usize, bool)],
    k: usize,
    domain: u64,
    kind: impl Fn(usize) -> OpKind,
    vals: &[u64],
) -> History {
    let var: Arc<str> = Arc::from(VAR);
    let mut start = vec![0; k];
    let mut end = vec![0; k];
    for (step, &(op, invoke)) in events.iter().enumerate() {
        if invoke {
            start[op] = step as Step;
        } else {
            end[op] = step as Step;
        }
    }
    let readers: BTreeSet<ProcessId> = (0..k)
        .filter(|&i| kind(i) == OpKind::Read)
        .map(|i| ProcessId(i as u32 + 1))
        .collect();
    let ops = (0..k)
        .map(|i| {
            let v = Value(vals[i]);
            let read = kind(i) == OpKind::Read;
            OpRecord {
                id: OpId(i as u64),
                proc: if read { ProcessId(i as u32 + 1) } else { ProcessId(0) },
                var: var.clone(),
                kind: kind(i),
                arg: (!read).then_some(v),
                ret: read.then_some(Output::Value(v)),
                start: start[i],
                end: Some(end[i]),
            }
        })
        .collect();
    let decl = VarDecl::new(domain, Value(0), [ProcessId(0)], readers);
    History::new(BTreeMap::from([(var, decl)]), ops).expect("generated history is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_order_counts() {
        // (2k - 1)!!
        let counts: Vec<usize> = (0..6).map(|k| interval_orders(k).len()).collect();
        assert_eq!(counts, vec![1, 1, 3, 15, 105, 945]);
    }

    #[test]
    fn small_corpus_count() {
        // k = 0: 1; k = 1: 2 kinds x 2 values; k = 2: 3 orders x 4 kind
        // patterns x 4 values, minus the 2 orders where two writes overlap
        // (x 4 values)
        let n = exhaustive_histories(2, 2, |_| {});
        assert_eq!(n, 1 + 4 + (3 * 4 - 2) * 4);
    }

    #[test]
    fn random_histories_respect_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = GenParams::default();
        for _ in 0..500 {
            let h = random_history(&mut rng, &p);
            assert!((1..=p.max_ops).contains(&h.len()));
            let decl = h.var(VAR).unwrap();
            assert!(decl.domain >= 2 && decl.domain <= p.max_domain);
        }
    }
}

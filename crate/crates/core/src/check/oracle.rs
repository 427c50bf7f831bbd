//! Exhaustive atomicity oracle: tries every permutation, no pruning.

use super::CheckError;
use crate::history::{History, OpKind, OpRecord, Value};

/// Largest number of operations per variable the oracle will permute.
pub const ORACLE_MAX_OPS: usize = 8;

/// True iff, for every variable, some ordering of its completed operations
/// (plus any subset of its pending Writes) respects real-time order and
/// explains every Read.
pub fn brute_force_atomic(h: &History) -> Result<bool, CheckError> {
    for (var, decl) in h.vars() {
        let rw: Vec<&OpRecord> = h
            .ops()
            .iter()
            .filter(|o| o.var == *var && matches!(o.kind, OpKind::Read | OpKind::Write))
            .collect();
        let completed: Vec<&OpRecord> = rw.iter().copied().filter(|o| o.end.is_some()).collect();
        let pending_writes: Vec<&OpRecord> = rw
            .iter()
            .copied()
            .filter(|o| o.end.is_none() && o.kind == OpKind::Write)
            .collect();
        let total = completed.len() + pending_writes.len();
        if total > ORACLE_MAX_OPS {
            return Err(CheckError::OracleTooLarge {
                var: var.to_string(),
                ops: total,
                max: ORACLE_MAX_OPS,
            });
        }
        let mut any = false;
        for subset in 0u32..(1 << pending_writes.len()) {
            let mut chosen = completed.clone();
            chosen.extend(
                pending_writes
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| subset & (1 << i) != 0)
                    .map(|(_, o)| *o),
            );
            if some_permutation_works(&mut chosen, decl.init) {
                any = true;
                break;
            }
        }
        if !any {
            return Ok(false);
        }
    }
    Ok(true)
}

fn some_permutation_works(ops: &mut [&OpRecord], init: Value) -> bool {
    // Heap's algorithm
    let n = ops.len();
    if valid(ops, init) {
        return true;
    }
    let mut c = vec![0usize; n];
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                ops.swap(0, i);
            } else {
                ops.swap(c[i], i);
            }
            if valid(ops, init) {
                return true;
            }
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    false
}

fn valid(order: &[&OpRecord], init: Value) -> bool {
    for i in 0..order.len() {
        for j in i + 1..order.len() {
            // a later op that finished before an earlier one started breaks real time
            if let Some(end) = order[j].end {
                if end < order[i].start {
                    return false;
                }
            }
        }
    }
    let mut current = init;
    for op in order {
        match op.kind {
            OpKind::Write => current = op.arg.expect("write argument"),
            _ => {
                if op.ret_value() != Some(current) {
                    return false;
                }
            }
        }
    }
    true
}

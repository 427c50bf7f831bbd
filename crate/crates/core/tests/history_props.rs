use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wfreg::gen::{random_history, GenParams, VAR};
use wfreg::history::FeasibleSet;
use wfreg::trace::{parse_trace, serialize_trace};
use wfreg::{feasible_values, precedes, History, OpKind, OpRecord, SemanticsLevel, Value};

fn history(seed: u64, max_ops: usize) -> History {
    let p = GenParams {
        max_ops,
        ..GenParams::default()
    };
    random_history(&mut ChaCha8Rng::seed_from_u64(seed), &p)
}

fn completed(h: &History) -> Vec<&OpRecord> {
    h.ops().iter().filter(|o| o.end.is_some()).collect()
}

/// Feasible values straight from the definitions, over plain intervals.
fn expected_feasible(h: &History, r: &OpRecord, level: SemanticsLevel) -> BTreeSet<Value> {
    let decl = h.var(VAR).unwrap();
    let r_end = r.end.unwrap();
    let writes: Vec<&OpRecord> = h.ops().iter().filter(|o| o.kind == OpKind::Write).collect();
    let before: Vec<&OpRecord> = writes
        .iter()
        .copied()
        .filter(|w| w.end.is_some_and(|e| e < r.start))
        .collect();
    let latest = before
        .iter()
        .max_by_key(|w| w.end)
        .map_or(decl.init, |w| w.arg.unwrap());
    let overlapping: Vec<Value> = writes
        .iter()
        .filter(|w| !w.end.is_some_and(|e| e < r.start) && w.start < r_end)
        .map(|w| w.arg.unwrap())
        .collect();
    if overlapping.is_empty() {
        return BTreeSet::from([latest]);
    }
    match level {
        SemanticsLevel::Safe => (0..decl.domain).map(Value).collect(),
        _ => std::iter::once(latest).chain(overlapping).collect(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn precedence_is_a_strict_partial_order(seed in any::<u64>()) {
        let h = history(seed, 10);
        let ops = completed(&h);
        for a in &ops {
            prop_assert!(!precedes(a, a).unwrap());
            for b in &ops {
                if precedes(a, b).unwrap() {
                    prop_assert!(!precedes(b, a).unwrap());
                    for c in &ops {
                        if precedes(b, c).unwrap() {
                            prop_assert!(precedes(a, c).unwrap());
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn feasible_sets_nest(seed in any::<u64>()) {
        let h = history(seed, 8);
        for r in completed(&h).into_iter().filter(|o| o.kind == OpKind::Read) {
            let safe = feasible_values(&h, r.id, SemanticsLevel::Safe).unwrap();
            let regular = feasible_values(&h, r.id, SemanticsLevel::Regular).unwrap();
            let atomic = feasible_values(&h, r.id, SemanticsLevel::Atomic).unwrap();
            prop_assert!(regular.is_subset(&safe));
            prop_assert_eq!(regular.to_set(), atomic.to_set());
            for level in SemanticsLevel::ALL {
                let got = feasible_values(&h, r.id, level).unwrap().to_set();
                prop_assert_eq!(got, expected_feasible(&h, r, level));
            }
        }
    }

    #[test]
    fn unoverlapped_reads_have_one_value(seed in any::<u64>()) {
        let h = history(seed, 8);
        let writes: Vec<&OpRecord> = h.ops().iter().filter(|o| o.kind == OpKind::Write).collect();
        for r in completed(&h).into_iter().filter(|o| o.kind == OpKind::Read) {
            let alone = writes.iter().all(|w| {
                w.end.is_some_and(|e| e < r.start) || r.end.unwrap() < w.start
            });
            if alone {
                for level in SemanticsLevel::ALL {
                    prop_assert_eq!(feasible_values(&h, r.id, level).unwrap().len(), 1);
                }
            }
        }
    }

    #[test]
    fn trace_round_trip(seed in any::<u64>()) {
        let h = history(seed, 12);
        let text = serialize_trace(&h);
        let back = parse_trace(&text).unwrap();
        prop_assert_eq!(&back, &h);
        prop_assert_eq!(serialize_trace(&back), text);
    }
}

#[test]
fn feasible_set_examples() {
    use wfreg::history::{OpId, Output, ProcessId, VarDecl};
    use std::collections::BTreeMap;
    use std::sync::Arc;

    let var: Arc<str> = Arc::from("x");
    let mk = |id, proc, kind, v, start, end| OpRecord {
        id: OpId(id),
        proc: ProcessId(proc),
        var: var.clone(),
        kind,
        arg: (kind == OpKind::Write).then_some(Value(v)),
        ret: (kind == OpKind::Read).then_some(Output::Value(Value(v))),
        start,
        end: Some(end),
    };
    let decl = VarDecl::new(10, Value(0), [ProcessId(0)], [ProcessId(1)]);

    let h = History::new(
        BTreeMap::from([(var.clone(), decl.clone())]),
        vec![mk(0, 0, OpKind::Write, 5, 0, 1), mk(1, 1, OpKind::Read, 5, 2, 3)],
    )
    .unwrap();
    let safe = feasible_values(&h, OpId(1), SemanticsLevel::Safe).unwrap();
    assert_eq!(safe.to_set(), BTreeSet::from([Value(5)]));

    let h = History::new(
        BTreeMap::from([(var.clone(), decl)]),
        vec![mk(0, 0, OpKind::Write, 1, 0, 3), mk(1, 1, OpKind::Read, 0, 1, 2)],
    )
    .unwrap();
    assert_eq!(feasible_values(&h, OpId(1), SemanticsLevel::Safe).unwrap(), FeasibleSet::Domain(10));
    assert_eq!(
        feasible_values(&h, OpId(1), SemanticsLevel::Regular).unwrap().to_set(),
        BTreeSet::from([Value(0), Value(1)])
    );
    let (w, r) = (h.op(OpId(0)).unwrap(), h.op(OpId(1)).unwrap());
    assert!(!precedes(w, r).unwrap() && !precedes(r, w).unwrap());
}

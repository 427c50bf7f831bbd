use wfreg::constructions::{
    build_direct, build_multireader, build_multireader_nowriteback, build_multiwriter,
    build_regular_bit, ConstructionError,
};
use wfreg::sim::{enumerate_executions, explore, random_execution, Invocation, Limits};
use wfreg::{check_level, check_wait_free, extract_history, Scope, SemanticsLevel, Value};

use SemanticsLevel::{Atomic, Regular, Safe};

fn w(v: u64) -> Invocation {
    Invocation::Write(Value(v))
}

#[test]
fn regular_bit_is_regular_over_a_safe_bit() {
    let spec = build_regular_bit(1, 2).unwrap();
    let workload = vec![vec![w(1), w(1), w(0)], vec![Invocation::Read, Invocation::Read]];
    let mut runs = 0;
    let mut not_atomic = 0;
    explore(&spec, &workload, Limits::default(), |e| {
        let h = extract_history(&e, Scope::HighLevel);
        assert!(check_level(&h, Regular).unwrap().pass, "{h:?}");
        not_atomic += !check_level(&h, Atomic).unwrap().pass as u32;
        assert!(check_wait_free(&e, &spec.budget).unwrap().pass);
        runs += 1;
    })
    .unwrap();
    assert!(runs > 0);
    // regular, not atomic: a new-old inversion across two reads is possible
    assert!(not_atomic > 0);
}

#[test]
fn safe_bit_without_the_skip_is_not_regular() {
    // writing the current value again lets the safe base flicker
    let spec = build_direct(1, 2, Safe).unwrap();
    let workload = vec![vec![w(0)], vec![Invocation::Read]];
    let e = enumerate_executions(&spec, &workload, Limits::default()).unwrap();
    assert!(e
        .executions
        .iter()
        .any(|x| !check_level(&extract_history(x, Scope::HighLevel), Regular).unwrap().pass));
    // with the skip the same workload never touches the base register
    let spec = build_regular_bit(1, 2).unwrap();
    for x in enumerate_executions(&spec, &workload, Limits::default()).unwrap().executions {
        assert!(check_level(&extract_history(&x, Scope::HighLevel), Regular).unwrap().pass);
    }
}

#[test]
fn multireader_small_cases_are_atomic() {
    for (n, workload) in [
        (1, vec![vec![w(1), w(2)], vec![Invocation::Read, Invocation::Read]]),
        (2, vec![vec![w(1)], vec![Invocation::Read], vec![Invocation::Read]]),
    ] {
        let spec = build_multireader(n, 3).unwrap();
        let e = enumerate_executions(&spec, &workload, Limits::default()).unwrap();
        assert!(!e.truncated);
        for x in &e.executions {
            assert!(check_level(&extract_history(x, Scope::HighLevel), Atomic).unwrap().pass);
            assert!(check_wait_free(x, &spec.budget).unwrap().pass);
        }
    }
}

#[test]
fn multireader_without_writeback_inverts() {
    let spec = build_multireader_nowriteback(2, 3).unwrap();
    let workload = vec![vec![w(1)], vec![Invocation::Read], vec![Invocation::Read]];
    let mut inversions = 0;
    explore(&spec, &workload, Limits::default(), |e| {
        let h = extract_history(&e, Scope::HighLevel);
        assert!(check_level(&h, Regular).unwrap().pass);
        inversions += !check_level(&h, Atomic).unwrap().pass as u32;
    })
    .unwrap();
    assert!(inversions > 0);
}

#[test]
fn random_runs_at_n3_are_atomic() {
    let mr = build_multireader(3, 4).unwrap();
    let workload = vec![
        vec![w(1), w(2), w(3)],
        vec![Invocation::Read, Invocation::Read],
        vec![Invocation::Read, Invocation::Read],
        vec![Invocation::Read],
    ];
    for seed in 0..500 {
        let x = random_execution(&mr, &workload, seed).unwrap();
        assert!(check_level(&extract_history(&x, Scope::HighLevel), Atomic).unwrap().pass);
    }
    let mw = build_multiwriter(3, 4).unwrap();
    let workload = vec![
        vec![w(1), Invocation::Read, w(2)],
        vec![w(3), Invocation::Read],
        vec![Invocation::Read, Invocation::Read],
    ];
    for seed in 0..500 {
        let x = random_execution(&mw, &workload, seed).unwrap();
        assert!(check_level(&extract_history(&x, Scope::HighLevel), Atomic).unwrap().pass);
        assert!(check_wait_free(&x, &mw.budget).unwrap().pass);
    }
}

#[test]
fn bad_parameters() {
    assert_eq!(build_regular_bit(1, 3).unwrap_err(), ConstructionError::NonBooleanDomain(3));
    assert!(matches!(build_regular_bit(0, 2), Err(ConstructionError::NoProcesses(_))));
    assert!(matches!(build_multireader(0, 2), Err(ConstructionError::NoProcesses(_))));
    assert!(matches!(build_multiwriter(0, 2), Err(ConstructionError::NoProcesses(_))));
    assert_eq!(build_multiwriter(2, 1).unwrap_err(), ConstructionError::DomainTooSmall(1));
}

//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use wfreg::check::AccessProfile;
use wfreg::constructions::{
    build_direct, build_multireader, build_multireader_nowriteback, build_multiwriter,
    build_regular_bit,
};
use wfreg::gen::{exhaustive_histories, random_histories, GenParams};
use wfreg::sim::{explore, random_execution, Execution, Invocation, Limits, ProtocolSpec};
use wfreg::timestamp::{build_cts, check_cts, check_label_precedence};
use wfreg::trace::{parse_trace, serialize_trace, serialize_trace_with_decisions};
use wfreg::{
    brute_force_atomic, check_level, extract_history, History, OpKind, Output, Scope,
    SemanticsLevel, Value, Workload,
};

const HIERARCHY_HISTORIES: usize = 10_000;
const HIERARCHY_MAX_OPS: usize = 6;
const HIERARCHY_TIME: Duration = Duration::from_secs(10);
const ORACLE_MAX_OPS: usize = 5;
const ORACLE_DOMAIN: u64 = 3;
const ORACLE_TIME: Duration = Duration::from_secs(120);
const MULTIWRITER_MAX_EXECUTIONS: u64 = 1_000_000;
const MULTIWRITER_TIME: Duration = Duration::from_secs(120);
const DETERMINISM_SEEDS: u64 = 100;

use SemanticsLevel::{Atomic, Regular, Safe};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn w(v: u64) -> Invocation {
    Invocation::Write(Value(v))
}

fn passes(h: &History, level: SemanticsLevel) -> bool {
    check_level(h, level).expect("checkable history").pass
}

/// Visits every execution; returns (executions, truncated).
fn enumerate(spec: &ProtocolSpec, workload: &Workload, visit: impl FnMut(Execution)) -> (u64, bool) {
    let limits = Limits {
        max_executions: u64::MAX,
        ..Limits::default()
    };
    let stats = explore(spec, workload, limits, visit).expect("valid scenario");
    (stats.executions, stats.truncated)
}

fn hierarchy() -> Outcome {
    let start = Instant::now();
    let params = GenParams {
        max_ops: HIERARCHY_MAX_OPS,
        ..GenParams::default()
    };
    let histories = random_histories(1, HIERARCHY_HISTORIES, &params);
    let mut violations = 0;
    let mut atomic = 0;
    let mut regular = 0;
    let mut safe = 0;
    for h in &histories {
        let (a, r, s) = (passes(h, Atomic), passes(h, Regular), passes(h, Safe));
        if (a && !r) || (r && !s) {
            violations += 1;
        }
        atomic += a as usize;
        regular += r as usize;
        safe += s as usize;
    }
    let elapsed = start.elapsed();
    outcome(
        violations == 0 && elapsed < HIERARCHY_TIME,
        format!(
            "{} histories, {violations} violations, pass counts atomic {atomic} regular {regular} safe {safe}, {elapsed:.2?}",
            histories.len()
        ),
    )
}

fn oracle_agreement() -> Outcome {
    let start = Instant::now();
    let mut disagreements = 0u64;
    let mut atomic = 0u64;
    let total = exhaustive_histories(ORACLE_MAX_OPS, ORACLE_DOMAIN, |h| {
        let fast = passes(h, Atomic);
        if fast != brute_force_atomic(h).expect("small history") {
            disagreements += 1;
        }
        atomic += fast as u64;
    });
    let elapsed = start.elapsed();
    outcome(
        disagreements == 0 && elapsed < ORACLE_TIME,
        format!("{total} histories ({atomic} atomic), {disagreements} disagreements, {elapsed:.2?}"),
    )
}

fn multiwriter_workload() -> Workload {
    vec![vec![w(1)], vec![w(2), Invocation::Read]]
}

fn multiwriter_atomicity(profile: &mut AccessProfile) -> Outcome {
    let start = Instant::now();
    let spec = build_multiwriter(2, 3).unwrap();
    let mut failures = 0u64;
    let limits = Limits {
        max_executions: MULTIWRITER_MAX_EXECUTIONS,
        ..Limits::default()
    };
    let stats = explore(&spec, &multiwriter_workload(), limits, |e| {
        if !passes(&extract_history(&e, Scope::HighLevel), Atomic) {
            failures += 1;
        }
        profile.record(&e);
    })
    .unwrap();
    let elapsed = start.elapsed();
    outcome(
        failures == 0 && !stats.truncated && elapsed < MULTIWRITER_TIME,
        format!(
            "{} executions, {failures} not atomic, truncated {}, {elapsed:.2?}",
            stats.executions, stats.truncated
        ),
    )
}

fn multireader_workload() -> Workload {
    vec![vec![w(1), w(2)], vec![Invocation::Read], vec![Invocation::Read]]
}

fn multireader_atomicity(profile: &mut AccessProfile) -> Outcome {
    let start = Instant::now();
    let spec = build_multireader(2, 3).unwrap();
    let mut failures = 0u64;
    let (executions, truncated) = enumerate(&spec, &multireader_workload(), |e| {
        if !passes(&extract_history(&e, Scope::HighLevel), Atomic) {
            failures += 1;
        }
        profile.record(&e);
    });
    let with = start.elapsed();

    let spec = build_multireader_nowriteback(2, 3).unwrap();
    let mut inversions = 0u64;
    let (plain, plain_truncated) = enumerate(&spec, &multireader_workload(), |e| {
        let h = extract_history(&e, Scope::HighLevel);
        if !passes(&h, Atomic) && passes(&h, Regular) {
            inversions += 1;
        }
    });
    let elapsed = start.elapsed();
    outcome(
        failures == 0 && !truncated && inversions >= 1 && !plain_truncated,
        format!(
            "write-back: {executions} executions, {failures} not atomic ({with:.2?}); \
             no write-back: {plain} executions, {inversions} regular but not atomic; {elapsed:.2?}"
        ),
    )
}

fn structural_counts() -> Outcome {
    let mut bad = Vec::new();
    for n in 1..=4usize {
        let mr = build_multireader(n, 2).unwrap();
        if mr.registers().len() != n * n {
            bad.push(format!("multireader n={n}: {}", mr.registers().len()));
        }
        if mr.registers().iter().any(|r| r.readers.len() != 1) {
            bad.push(format!("multireader n={n}: a base register has several readers"));
        }
        let mw = build_multiwriter(n, 2).unwrap();
        if mw.registers().len() != n {
            bad.push(format!("multiwriter n={n}: {}", mw.registers().len()));
        }
        if mw.registers().iter().any(|r| r.readers.len() != n) {
            bad.push(format!("multiwriter n={n}: a base register is not n-reader"));
        }
    }
    let detail = if bad.is_empty() {
        "multireader n², multiwriter n, for n = 1..4".to_string()
    } else {
        bad.join("; ")
    };
    outcome(bad.is_empty(), detail)
}

fn exact(profile: &AccessProfile, kind: OpKind, lo: u32, hi: u32) -> Result<(), String> {
    match profile.range(kind) {
        Some((a, b)) if a == lo && b == hi => Ok(()),
        other => Err(format!("{kind}: observed {other:?}, expected ({lo}, {hi})")),
    }
}

fn sampled_profile(spec: &ProtocolSpec, workload: &Workload, seeds: u64) -> AccessProfile {
    let mut profile = AccessProfile::default();
    for seed in 0..seeds {
        profile.record(&random_execution(spec, workload, seed).unwrap());
    }
    profile
}

fn wait_freedom(multiwriter: &AccessProfile, multireader: &AccessProfile) -> Outcome {
    let mut errors = Vec::new();
    let mut note = |what: &str, r: Result<(), String>| {
        if let Err(e) = r {
            errors.push(format!("{what} {e}"));
        }
    };

    // the repeated W(1) takes the zero-access path
    let bit = build_regular_bit(1, 2).unwrap();
    let workload = vec![vec![w(1), w(1), w(0)], vec![Invocation::Read, Invocation::Read]];
    let mut bit_profile = AccessProfile::default();
    let (bit_runs, _) = enumerate(&bit, &workload, |e| bit_profile.record(&e));
    note("regular_bit", exact(&bit_profile, OpKind::Write, 0, 1));
    note("regular_bit", exact(&bit_profile, OpKind::Read, 1, 1));

    note("multireader n=2", exact(multireader, OpKind::Write, 2, 2));
    note("multireader n=2", exact(multireader, OpKind::Read, 3, 3));
    note("multiwriter n=2", exact(multiwriter, OpKind::Write, 3, 3));
    note("multiwriter n=2", exact(multiwriter, OpKind::Read, 2, 2));
    let mut cts = AccessProfile::default();
    enumerate(&build_cts(2, 3).unwrap(), &cts_workload(), |e| cts.record(&e));
    note("cts n=2", exact(&cts, OpKind::Label, 3, 3));
    note("cts n=2", exact(&cts, OpKind::Scan, 2, 2));

    let mr3 = build_multireader(3, 3).unwrap();
    let workload = vec![
        vec![w(1), w(2)],
        vec![Invocation::Read, Invocation::Read],
        vec![Invocation::Read],
        vec![Invocation::Read],
    ];
    let p = sampled_profile(&mr3, &workload, 1000);
    note("multireader n=3", exact(&p, OpKind::Write, 3, 3));
    note("multireader n=3", exact(&p, OpKind::Read, 5, 5));

    let mw3 = build_multiwriter(3, 4).unwrap();
    let workload = vec![
        vec![w(1), Invocation::Read],
        vec![w(2), Invocation::Read],
        vec![w(3), Invocation::Read],
    ];
    let p = sampled_profile(&mw3, &workload, 1000);
    note("multiwriter n=3", exact(&p, OpKind::Write, 4, 4));
    note("multiwriter n=3", exact(&p, OpKind::Read, 3, 3));

    let cts3 = build_cts(3, 4).unwrap();
    let workload = vec![
        vec![Invocation::Label(Value(1)), Invocation::Scan],
        vec![Invocation::Label(Value(2)), Invocation::Scan],
        vec![Invocation::Label(Value(3))],
    ];
    let p = sampled_profile(&cts3, &workload, 1000);
    note("cts n=3", exact(&p, OpKind::Label, 4, 4));
    note("cts n=3", exact(&p, OpKind::Scan, 3, 3));

    let detail = if errors.is_empty() {
        format!(
            "regular_bit W 0..1 R 1 over {bit_runs} executions; multireader W n R 2n-1, \
             multiwriter W n+1 R n, cts L n+1 S n for n = 2 (all schedules) and n = 3 (1000 seeds)"
        )
    } else {
        errors.join("; ")
    };
    outcome(errors.is_empty(), detail)
}

fn safe_adversary() -> Outcome {
    let spec = build_direct(1, 2, Safe).unwrap();
    let workload = vec![vec![w(0)], vec![Invocation::Read]];
    let mut overlapped_values = BTreeSet::new();
    let mut safe_not_regular = 0u64;
    let (executions, truncated) = enumerate(&spec, &workload, |e| {
        let h = extract_history(&e, Scope::HighLevel);
        let of = |kind| h.ops().iter().find(|o| o.kind == kind).expect("one op of each kind");
        let (write, read) = (of(OpKind::Write), of(OpKind::Read));
        let overlapped = !(write.end < Some(read.start) || read.end < Some(write.start));
        if overlapped {
            overlapped_values.insert(read.ret_value().expect("completed read"));
        }
        if passes(&h, Safe) && !passes(&h, Regular) {
            safe_not_regular += 1;
        }
    });
    outcome(
        overlapped_values.len() == 2 && safe_not_regular >= 1 && !truncated,
        format!(
            "{executions} executions, overlapped read returned {overlapped_values:?}, \
             {safe_not_regular} safe but not regular"
        ),
    )
}

fn cts_workload() -> Workload {
    vec![
        vec![Invocation::Label(Value(1)), Invocation::Scan],
        vec![Invocation::Label(Value(2))],
    ]
}

fn cts_correctness() -> Outcome {
    let spec = build_cts(2, 3).unwrap();
    let workload = cts_workload();
    let mut cts_failures = 0u64;
    let mut precedence_failures = 0u64;
    let mut orders = BTreeSet::new();
    let (executions, truncated) = enumerate(&spec, &workload, |e| {
        let h = extract_history(&e, Scope::HighLevel);
        if !check_cts(&h).unwrap().pass {
            cts_failures += 1;
        }
        if !check_label_precedence(&h).unwrap().pass {
            precedence_failures += 1;
        }
        for op in h.ops() {
            if let Some(Output::Scan(s)) = &op.ret {
                orders.insert(s.owners());
            }
        }
    });
    outcome(
        cts_failures == 0 && precedence_failures == 0 && !truncated,
        format!(
            "{executions} executions, {cts_failures} fail check_cts, {precedence_failures} \
             break label precedence, {} distinct scan orders",
            orders.len()
        ),
    )
}

fn round_trip_and_determinism() -> Outcome {
    let mut errors = Vec::new();
    let mut round_trips = 0u64;
    let mut check = |h: &History| {
        let text = serialize_trace(h);
        match parse_trace(&text) {
            Ok(back) if back == *h && serialize_trace(&back) == text => {}
            _ => errors.push(format!("round trip failed:\n{text}")),
        }
        round_trips += 1;
    };
    for h in random_histories(9, HIERARCHY_HISTORIES, &GenParams::default()) {
        check(&h);
    }
    exhaustive_histories(4, ORACLE_DOMAIN, &mut check);
    let spec = build_cts(2, 3).unwrap();
    let workload = cts_workload();
    enumerate(&spec, &workload, |e| {
        check(&extract_history(&e, Scope::HighLevel));
        check(&extract_history(&e, Scope::BaseLevel));
    });

    let scenarios: Vec<(ProtocolSpec, Workload)> = vec![
        (build_multiwriter(2, 3).unwrap(), multiwriter_workload()),
        (build_multireader(2, 3).unwrap(), multireader_workload()),
        (
            build_regular_bit(2, 2).unwrap(),
            vec![vec![w(1), w(0)], vec![Invocation::Read], vec![Invocation::Read]],
        ),
        (spec, workload),
    ];
    let mut distinct = 0;
    for (spec, workload) in &scenarios {
        let mut seen = BTreeSet::new();
        for seed in 0..DETERMINISM_SEEDS {
            let render = || {
                let e = random_execution(spec, workload, seed).unwrap();
                let h = extract_history(&e, Scope::HighLevel);
                serialize_trace_with_decisions(&h, &e.decisions)
                    + &serialize_trace(&extract_history(&e, Scope::BaseLevel))
            };
            let (a, b) = (render(), render());
            if a != b {
                errors.push(format!("{} seed {seed}: traces differ", spec.name));
            }
            seen.insert(a);
        }
        distinct += seen.len();
    }
    errors.truncate(3);
    let detail = if errors.is_empty() {
        format!(
            "{round_trips} round trips, {} scenarios x {DETERMINISM_SEEDS} seeds replayed \
             byte-identically ({distinct} distinct traces)",
            scenarios.len()
        )
    } else {
        errors.join("; ")
    };
    outcome(errors.is_empty(), detail)
}

fn main() {
    let mut multiwriter = AccessProfile::default();
    let mut multireader = AccessProfile::default();
    let mut results: Vec<(&str, Outcome)> = Vec::new();
    let mut run = |name: &'static str, f: &mut dyn FnMut() -> Outcome| {
        let o = f();
        println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((name, o));
    };
    run("1 hierarchy soundness", &mut hierarchy);
    run("2 oracle agreement", &mut oracle_agreement);
    run("3 multiwriter atomicity", &mut || multiwriter_atomicity(&mut multiwriter));
    run("4 multireader atomicity and write-back necessity", &mut || {
        multireader_atomicity(&mut multireader)
    });
    run("5 structural counts", &mut structural_counts);
    // 6 reuses the access profiles gathered by 3 and 4
    run("6 wait-freedom", &mut || wait_freedom(&multiwriter, &multireader));
    run("7 safe adversary", &mut safe_adversary);
    run("8 timestamp system", &mut cts_correctness);
    run("9 round trip and determinism", &mut round_trip_and_determinism);
    let failed = results.iter().filter(|(_, o)| !o.pass).count();
    println!("{} of {} criteria pass", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

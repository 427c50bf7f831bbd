//! Unbounded concurrent timestamp system.
//!
//! Every process owns one labeled object. A Labeling gives the caller's
//! object a fresh label larger than every label it saw; a Scan returns all
//! objects ordered by label.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use thiserror::Error;

use crate::check::{StepBudget, Verdict};
use crate::constructions::ConstructionError;
use crate::history::{History, OpKind, OpRecord, Output, ProcessId, SemanticsLevel, Value, VarDecl};
use crate::sim::{
    Action, BaseRegisterSpec, Invocation, ObjectKind, ObjectSpec, Process, ProtocolSpec, RegId,
};
use crate::tag::{tag_less, Tag, TagCodec, TaggedValue};

/// Name of the timestamp object in extracted histories.
pub const CTS_VAR: &str = "cts";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LabeledObject {
    pub owner: ProcessId,
    pub label: Tag,
    pub payload: Value,
}

/// Objects in ascending label order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct ScanResult(Vec<LabeledObject>);

impl ScanResult {
    /// Wraps a list that is already in scan order, as read from a trace.
    /// No ordering is checked here; [`check_cts`] does that.
    pub fn from_ordered(objects: Vec<LabeledObject>) -> Self {
        Self(objects)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, LabeledObject> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn owners(&self) -> Vec<ProcessId> {
        self.0.iter().map(|o| o.owner).collect()
    }

    /// Position of `owner`'s object in the scan.
    pub fn rank(&self, owner: ProcessId) -> Option<usize> {
        self.0.iter().position(|o| o.owner == owner)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CtsError {
    #[error("{0} appears more than once")]
    DuplicateOwner(ProcessId),
    #[error("not a timestamp history: {0}")]
    Malformed(String),
}

/// Stable sort by label.
pub fn scan_order(objects: Vec<LabeledObject>) -> Result<ScanResult, CtsError> {
    let mut owners = BTreeSet::new();
    for o in &objects {
        if !owners.insert(o.owner) {
            return Err(CtsError::DuplicateOwner(o.owner));
        }
    }
    let mut objects = objects;
    objects.sort_by_key(|o| o.label);
    Ok(ScanResult(objects))
}

#[derive(Clone)]
struct CtsProc {
    me: ProcessId,
    n: usize,
    codec: TagCodec,
    op: Option<Invocation>,
    seen: Vec<LabeledObject>,
    written: Option<Tag>,
}

impl Process for CtsProc {
    fn invoke(&mut self, op: &Invocation) {
        self.op = Some(*op);
        self.seen.clear();
        self.written = None;
    }

    fn step(&mut self, input: Option<Value>) -> Action {
        if let Some(code) = input {
            let tv = self.codec.decode(code);
            self.seen.push(LabeledObject {
                owner: ProcessId(self.seen.len() as u32),
                label: tv.tag,
                payload: tv.val,
            });
        }
        if self.seen.len() < self.n {
            return Action::Read(RegId(self.seen.len()));
        }
        match self.op.expect("invoked") {
            Invocation::Label(payload) => match self.written {
                Some(tag) => Action::Return(Some(Output::Label(tag))),
                None => {
                    let top = self.seen.iter().map(|o| o.label.seq).max().unwrap_or(0);
                    let tag = Tag::new(top + 1, self.me);
                    self.written = Some(tag);
                    let code = self.codec.encode(TaggedValue::new(tag, payload));
                    Action::Write(RegId(self.me.index()), code)
                }
            },
            _ => {
                let scan = scan_order(self.seen.clone()).expect("one register per process");
                Action::Return(Some(Output::Scan(scan)))
            }
        }
    }

    fn clone_box(&self) -> Box<dyn Process> {
        Box::new(self.clone())
    }
}

/// Timestamp system over `n` atomic 1-writer n-reader registers, one per
/// process, each holding `(label, payload)`; initially `((0, p), 0)`.
///
/// Labeling by `p`: collect all registers, write `((1 + max seq, p),
/// payload)` to its own register, return the new label (n + 1 accesses).
/// Scan: collect all registers and return them sorted by label (n
/// accesses). Scans never write.
pub fn build_cts(n: usize, domain: u64) -> Result<ProtocolSpec, ConstructionError> {
    if n == 0 {
        return Err(ConstructionError::NoProcesses("process"));
    }
    if domain < 2 {
        return Err(ConstructionError::DomainTooSmall(domain));
    }
    let codec = TagCodec::new(n, domain);
    let everyone: BTreeSet<ProcessId> = (0..n).map(|p| ProcessId(p as u32)).collect();
    let registers = (0..n)
        .map(|p| {
            let pid = ProcessId(p as u32);
            BaseRegisterSpec {
                name: Arc::from(format!("l{p}")),
                owner: pid,
                readers: everyone.clone(),
                domain: codec.register_domain(),
                init: codec.encode(TaggedValue::new(Tag::initial(pid), Value(0))),
                semantics: SemanticsLevel::Atomic,
            }
        })
        .collect();
    let object = ObjectSpec {
        var: Arc::from(CTS_VAR),
        kind: ObjectKind::Timestamp,
        decl: VarDecl::new(domain, Value(0), everyone.clone(), everyone),
    };
    let budget = StepBudget::new()
        .with(OpKind::Label, n as u32 + 1)
        .with(OpKind::Scan, n as u32);
    Ok(ProtocolSpec::new(
        "cts",
        n,
        object,
        registers,
        budget,
        Arc::new(move |me| {
            Box::new(CtsProc {
                me,
                n,
                codec,
                op: None,
                seen: Vec::with_capacity(n),
                written: None,
            })
        }),
    ))
}

fn label_of(op: &OpRecord) -> Option<Tag> {
    match op.ret {
        Some(Output::Label(t)) => Some(t),
        _ => None,
    }
}

fn timestamp_ops(h: &History) -> Result<Vec<&OpRecord>, CtsError> {
    let mut out = Vec::new();
    for op in h.ops() {
        match op.kind {
            OpKind::Label | OpKind::Scan => out.push(op),
            kind => {
                return Err(CtsError::Malformed(format!(
                    "{kind} operation {} in a timestamp history",
                    op.id
                )))
            }
        }
    }
    Ok(out)
}

/// Checks a Labeling/Scan history:
///
/// - (a) each process's Labelings receive strictly increasing labels;
/// - (b) for a Scan `S` and processes `p`, `q`: when the latest Labeling by
///   `p` before `S` precedes the latest one by `q` before `S`, and no
///   Labeling by `p` or `q` overlaps `S`, then `S` ranks `p` before `q`
///   (a process with no earlier Labeling counts as labeled at the start);
/// - (c) every Scan lists each process exactly once, in strictly increasing
///   label order.
pub fn check_cts(h: &History) -> Result<Verdict, CtsError> {
    let ops = timestamp_ops(h)?;
    let mut processes = BTreeSet::new();
    for decl in h.vars().values() {
        processes.extend(decl.writers.iter().copied());
    }

    // (a)
    let mut by_owner: BTreeMap<ProcessId, Vec<&OpRecord>> = BTreeMap::new();
    for op in ops.iter().filter(|o| o.kind == OpKind::Label) {
        by_owner.entry(op.proc).or_default().push(op);
    }
    for labelings in by_owner.values_mut() {
        labelings.sort_by_key(|o| o.start);
        let mut prev: Option<Tag> = None;
        for op in labelings.iter().filter(|o| o.is_complete()) {
            let tag = label_of(op).ok_or_else(|| {
                CtsError::Malformed(format!("labeling {} returned no label", op.id))
            })?;
            if prev.is_some_and(|p| !tag_less(p, tag)) {
                return Ok(Verdict::fail(
                    op.id,
                    format!("labeling {} by {} got label {tag}, not above {}", op.id, op.proc, prev.unwrap()),
                ));
            }
            prev = Some(tag);
        }
    }

    let mut scans: Vec<&OpRecord> = ops
        .iter()
        .copied()
        .filter(|o| o.kind == OpKind::Scan && o.is_complete())
        .collect();
    scans.sort_by_key(|o| (o.end, o.id));
    for s in scans {
        let Some(Output::Scan(scan)) = &s.ret else {
            return Err(CtsError::Malformed(format!("scan {} returned no objects", s.id)));
        };

        // (c)
        let owners: BTreeSet<ProcessId> = scan.owners().into_iter().collect();
        if owners.len() != scan.len() || owners != processes {
            return Ok(Verdict::fail(
                s.id,
                format!("scan {} does not list every process exactly once", s.id),
            ));
        }
        if scan.0.windows(2).any(|w| !tag_less(w[0].label, w[1].label)) {
            return Ok(Verdict::fail(
                s.id,
                format!("scan {} is not sorted by label", s.id),
            ));
        }

        // (b)
        let quiet = |p: ProcessId| {
            by_owner.get(&p).is_none_or(|ls| {
                ls.iter().all(|l| l.ends_before(s) || s.ends_before(l))
            })
        };
        // None stands for the initial labeling
        let latest = |p: ProcessId| -> Option<&OpRecord> {
            by_owner
                .get(&p)?
                .iter()
                .copied()
                .filter(|l| l.ends_before(s))
                .max_by_key(|l| l.end)
        };
        for &p in &processes {
            for &q in &processes {
                if p == q || !quiet(p) || !quiet(q) {
                    continue;
                }
                let ordered = match (latest(p), latest(q)) {
                    (None, Some(_)) => true,
                    (Some(lp), Some(lq)) => lp.ends_before(lq),
                    _ => false,
                };
                if ordered && scan.rank(p) > scan.rank(q) {
                    return Ok(Verdict::fail(
                        s.id,
                        format!(
                            "scan {} ranks {q} before {p}, but {p} was labeled before {q}",
                            s.id
                        ),
                    ));
                }
            }
        }
    }
    Ok(Verdict::pass())
}

/// Passes iff every pair of Labelings where one precedes the other got
/// labels in that order.
pub fn check_label_precedence(h: &History) -> Result<Verdict, CtsError> {
    let labelings: Vec<&OpRecord> = timestamp_ops(h)?
        .into_iter()
        .filter(|o| o.kind == OpKind::Label && o.is_complete())
        .collect();
    for a in &labelings {
        for b in &labelings {
            if !a.ends_before(b) {
                continue;
            }
            let (ta, tb) = (label_of(a), label_of(b));
            if let (Some(ta), Some(tb)) = (ta, tb) {
                if !tag_less(ta, tb) {
                    return Ok(Verdict::fail(
                        b.id,
                        format!("labeling {} precedes {} but {ta} is not below {tb}", a.id, b.id),
                    ));
                }
            }
        }
    }
    Ok(Verdict::pass())
}

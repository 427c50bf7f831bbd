//! Operation records, histories, and the precedence relation between
//! operation executions.
//!
//! A [`History`] is a set of [`OpRecord`]s placed on a single logical
//! timeline: every invocation and response carries a distinct [`Step`].
//! Concurrency is expressed purely by interval overlap.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tag::Tag;
use crate::timestamp::ScanResult;

/// Position on the global logical timeline.
pub type Step = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProcessId(pub u32);

impl ProcessId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for ProcessId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

/// An element of a variable's finite domain `0..m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Value(pub u64);

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OpId(pub u64);

impl fmt::Display for OpId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// The safe < regular < atomic hierarchy for single-writer variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SemanticsLevel {
    Safe,
    Regular,
    Atomic,
}

impl SemanticsLevel {
    pub const ALL: [SemanticsLevel; 3] = [Self::Safe, Self::Regular, Self::Atomic];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Safe => "safe",
            Self::Regular => "regular",
            Self::Atomic => "atomic",
        }
    }
}

impl fmt::Display for SemanticsLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SemanticsLevel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "safe" => Ok(Self::Safe),
            "regular" => Ok(Self::Regular),
            "atomic" => Ok(Self::Atomic),
            other => Err(format!("unknown semantics level `{other}`")),
        }
    }
}

/// Operation kinds. `Label` and `Scan` are the timestamp-system operations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OpKind {
    Read,
    Write,
    Label,
    Scan,
}

impl OpKind {
    /// Single-letter code used in traces.
    pub fn code(self) -> &'static str {
        match self {
            Self::Read => "R",
            Self::Write => "W",
            Self::Label => "L",
            Self::Scan => "S",
        }
    }

    pub fn from_code(s: &str) -> Option<Self> {
        match s {
            "R" => Some(Self::Read),
            "W" => Some(Self::Write),
            "L" => Some(Self::Label),
            "S" => Some(Self::Scan),
            _ => None,
        }
    }

    /// Writes and Labelings are performed by writers, the rest by readers.
    pub fn is_mutator(self) -> bool {
        matches!(self, Self::Write | Self::Label)
    }

    fn takes_arg(self) -> bool {
        self.is_mutator()
    }
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// What a completed operation returned.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Output {
    Value(Value),
    Label(Tag),
    Scan(ScanResult),
}

/// Declaration of one shared variable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarDecl {
    pub domain: u64,
    pub init: Value,
    pub writers: BTreeSet<ProcessId>,
    pub readers: BTreeSet<ProcessId>,
}

impl VarDecl {
    pub fn new(
        domain: u64,
        init: Value,
        writers: impl IntoIterator<Item = ProcessId>,
        readers: impl IntoIterator<Item = ProcessId>,
    ) -> Self {
        Self {
            domain,
            init,
            writers: writers.into_iter().collect(),
            readers: readers.into_iter().collect(),
        }
    }

    pub fn is_single_writer(&self) -> bool {
        self.writers.len() <= 1
    }
}

/// One operation execution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OpRecord {
    pub id: OpId,
    pub proc: ProcessId,
    pub var: Arc<str>,
    pub kind: OpKind,
    /// Write value or Labeling payload.
    pub arg: Option<Value>,
    /// Present exactly when a Read, Labeling, or Scan completed.
    pub ret: Option<Output>,
    pub start: Step,
    /// `None` while pending.
    pub end: Option<Step>,
}

impl OpRecord {
    pub fn is_complete(&self) -> bool {
        self.end.is_some()
    }

    pub fn ret_value(&self) -> Option<Value> {
        match self.ret {
            Some(Output::Value(v)) => Some(v),
            _ => None,
        }
    }

    /// `self` finishes before `other` starts. Pending operations never
    /// finish, so they precede nothing.
    pub(crate) fn ends_before(&self, other: &OpRecord) -> bool {
        self.end.is_some_and(|e| e < other.start)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HistoryError {
    #[error("incomplete operation has no end ({0})")]
    Incomplete(OpId),
    #[error("variable `{var}`: domain must have at least 2 values, got {domain}")]
    DomainTooSmall { var: String, domain: u64 },
    #[error("variable `{var}`: value {value} outside domain 0..{domain}")]
    ValueOutOfDomain { var: String, value: u64, domain: u64 },
    #[error("duplicate operation id {0}")]
    DuplicateOp(OpId),
    #[error("step {0} used by more than one event")]
    DuplicateStep(Step),
    #[error("operation {0} refers to undeclared variable `{1}`")]
    UnknownVar(OpId, String),
    #[error("operation {0} must start before it ends")]
    EmptyInterval(OpId),
    #[error("operation {op}: {proc} is not a declared writer of `{var}`")]
    NotWriter { op: OpId, proc: ProcessId, var: String },
    #[error("operation {op}: {proc} is not a declared reader of `{var}`")]
    NotReader { op: OpId, proc: ProcessId, var: String },
    #[error("operation {op}: {reason}")]
    MalformedOp { op: OpId, reason: String },
    #[error("operations {0} and {1} of {2} overlap")]
    ProcessOverlap(OpId, OpId, ProcessId),
    #[error("writes {0} and {1} on single-writer variable `{2}` are not totally ordered")]
    ConcurrentWrites(OpId, OpId, String),
    #[error("operation {0} is not in the history")]
    NotInHistory(OpId),
    #[error("operation {0} is not a Read")]
    NotARead(OpId),
    #[error("variable `{0}` has several writers; safe/regular classification is undefined, use Atomic")]
    MultiWriter(String),
}

/// `a` precedes `b` when `a` finishes before `b` starts.
pub fn precedes(a: &OpRecord, b: &OpRecord) -> Result<bool, HistoryError> {
    let a_end = a.end.ok_or(HistoryError::Incomplete(a.id))?;
    b.end.ok_or(HistoryError::Incomplete(b.id))?;
    Ok(a_end < b.start)
}

/// Neither operation precedes the other.
pub fn overlaps(a: &OpRecord, b: &OpRecord) -> Result<bool, HistoryError> {
    Ok(!precedes(a, b)? && !precedes(b, a)?)
}

/// A validated history. Operations are kept sorted by id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct History {
    vars: BTreeMap<Arc<str>, VarDecl>,
    ops: Vec<OpRecord>,
}

impl History {
    pub fn new(
        vars: BTreeMap<Arc<str>, VarDecl>,
        mut ops: Vec<OpRecord>,
    ) -> Result<Self, HistoryError> {
        ops.sort_by_key(|o| o.id);
        for w in ops.windows(2) {
            if w[0].id == w[1].id {
                return Err(HistoryError::DuplicateOp(w[0].id));
            }
        }
        for (name, decl) in &vars {
            if decl.domain < 2 {
                return Err(HistoryError::DomainTooSmall {
                    var: name.to_string(),
                    domain: decl.domain,
                });
            }
            check_in_domain(name, decl, decl.init)?;
        }

        let mut steps = HashSet::with_capacity(ops.len() * 2);
        for op in &ops {
            let decl = vars
                .get(&op.var)
                .ok_or_else(|| HistoryError::UnknownVar(op.id, op.var.to_string()))?;
            for s in std::iter::once(op.start).chain(op.end) {
                if !steps.insert(s) {
                    return Err(HistoryError::DuplicateStep(s));
                }
            }
            if op.end.is_some_and(|e| e <= op.start) {
                return Err(HistoryError::EmptyInterval(op.id));
            }
            validate_shape(op, decl)?;
        }

        let mut by_proc: BTreeMap<ProcessId, Vec<&OpRecord>> = BTreeMap::new();
        for op in &ops {
            by_proc.entry(op.proc).or_default().push(op);
        }
        for (proc, mut list) in by_proc {
            list.sort_by_key(|o| o.start);
            for w in list.windows(2) {
                if !w[0].ends_before(w[1]) {
                    let both_writes = w[0].kind == OpKind::Write
                        && w[1].kind == OpKind::Write
                        && w[0].var == w[1].var
                        && vars[&w[0].var].is_single_writer();
                    return Err(if both_writes {
                        HistoryError::ConcurrentWrites(w[0].id, w[1].id, w[0].var.to_string())
                    } else {
                        HistoryError::ProcessOverlap(w[0].id, w[1].id, proc)
                    });
                }
            }
        }
        Ok(Self { vars, ops })
    }

    pub fn empty() -> Self {
        Self {
            vars: BTreeMap::new(),
            ops: Vec::new(),
        }
    }

    pub fn vars(&self) -> &BTreeMap<Arc<str>, VarDecl> {
        &self.vars
    }

    pub fn var(&self, name: &str) -> Option<&VarDecl> {
        self.vars.get(name)
    }

    pub fn ops(&self) -> &[OpRecord] {
        &self.ops
    }

    pub fn op(&self, id: OpId) -> Option<&OpRecord> {
        self.ops
            .binary_search_by_key(&id, |o| o.id)
            .ok()
            .map(|i| &self.ops[i])
    }

    pub fn ops_on<'a>(&'a self, var: &'a str) -> impl Iterator<Item = &'a OpRecord> + 'a {
        self.ops.iter().filter(move |o| &*o.var == var)
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn into_parts(self) -> (BTreeMap<Arc<str>, VarDecl>, Vec<OpRecord>) {
        (self.vars, self.ops)
    }
}

fn check_in_domain(var: &str, decl: &VarDecl, v: Value) -> Result<(), HistoryError> {
    if v.0 >= decl.domain {
        return Err(HistoryError::ValueOutOfDomain {
            var: var.to_string(),
            value: v.0,
            domain: decl.domain,
        });
    }
    Ok(())
}

fn validate_shape(op: &OpRecord, decl: &VarDecl) -> Result<(), HistoryError> {
    let malformed = |reason: &str| HistoryError::MalformedOp {
        op: op.id,
        reason: reason.to_string(),
    };
    if op.kind.is_mutator() {
        if !decl.writers.contains(&op.proc) {
            return Err(HistoryError::NotWriter {
                op: op.id,
                proc: op.proc,
                var: op.var.to_string(),
            });
        }
    } else if !decl.readers.contains(&op.proc) {
        return Err(HistoryError::NotReader {
            op: op.id,
            proc: op.proc,
            var: op.var.to_string(),
        });
    }
    match (op.kind.takes_arg(), op.arg) {
        (true, None) => return Err(malformed("missing argument")),
        (false, Some(_)) => return Err(malformed("unexpected argument")),
        (true, Some(v)) => check_in_domain(&op.var, decl, v)?,
        (false, None) => {}
    }
    match (op.kind, op.is_complete(), &op.ret) {
        (_, false, Some(_)) => Err(malformed("pending operation has a return value")),
        (OpKind::Write, true, Some(_)) => Err(malformed("write has a return value")),
        (OpKind::Write, _, None) => Ok(()),
        (_, true, None) => Err(malformed("completed operation lacks a return value")),
        (OpKind::Read, true, Some(Output::Value(v))) => check_in_domain(&op.var, decl, *v),
        (OpKind::Label, true, Some(Output::Label(_))) => Ok(()),
        (OpKind::Scan, true, Some(Output::Scan(scan))) => scan
            .iter()
            .try_for_each(|obj| check_in_domain(&op.var, decl, obj.payload)),
        (_, _, None) => Ok(()),
        (kind, true, Some(_)) => Err(malformed(&format!("return value does not fit a {kind}"))),
    }
}

/// The set of values a Read may legally return.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FeasibleSet {
    /// Any value in `0..m`.
    Domain(u64),
    Values(BTreeSet<Value>),
}

impl FeasibleSet {
    pub fn contains(&self, v: Value) -> bool {
        match self {
            Self::Domain(m) => v.0 < *m,
            Self::Values(s) => s.contains(&v),
        }
    }

    pub fn len(&self) -> u64 {
        match self {
            Self::Domain(m) => *m,
            Self::Values(s) => s.len() as u64,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> Box<dyn Iterator<Item = Value> + '_> {
        match self {
            Self::Domain(m) => Box::new((0..*m).map(Value)),
            Self::Values(s) => Box::new(s.iter().copied()),
        }
    }

    /// Normalises to an explicit set; only sensible for small domains.
    pub fn to_set(&self) -> BTreeSet<Value> {
        self.iter().collect()
    }

    /// Whether every member of `self` belongs to `other`.
    pub fn is_subset(&self, other: &FeasibleSet) -> bool {
        match (self, other) {
            (Self::Domain(a), Self::Domain(b)) => a <= b,
            (Self::Values(s), _) => s.iter().all(|v| other.contains(*v)),
            (Self::Domain(a), Self::Values(s)) => {
                s.len() as u64 >= *a && (0..*a).all(|v| s.contains(&Value(v)))
            }
        }
    }
}

/// Values the Read `read` may return under `level`, judged on its own.
///
/// A Read that overlaps no Write gets the most recent preceding Write (or
/// the initial value) at every level. Otherwise safe allows the whole domain
/// while regular and atomic allow that value plus every overlapping Write.
/// Atomicity additionally needs a global order, see [`crate::check`].
pub fn feasible_values(
    h: &History,
    read: OpId,
    level: SemanticsLevel,
) -> Result<FeasibleSet, HistoryError> {
    let r = h.op(read).ok_or(HistoryError::NotInHistory(read))?;
    if r.kind != OpKind::Read {
        return Err(HistoryError::NotARead(read));
    }
    if !r.is_complete() {
        return Err(HistoryError::Incomplete(read));
    }
    let decl = &h.vars[&r.var];
    if !decl.is_single_writer() {
        return Err(HistoryError::MultiWriter(r.var.to_string()));
    }

    let mut latest: Option<&OpRecord> = None;
    let mut overlapping = Vec::new();
    for w in h.ops_on(&r.var).filter(|o| o.kind == OpKind::Write) {
        if w.ends_before(r) {
            if latest.is_none_or(|l| l.end < w.end) {
                latest = Some(w);
            }
        } else if !r.ends_before(w) {
            overlapping.push(w);
        }
    }
    let prior = latest.and_then(|w| w.arg).unwrap_or(decl.init);

    if overlapping.is_empty() {
        return Ok(FeasibleSet::Values(BTreeSet::from([prior])));
    }
    Ok(match level {
        SemanticsLevel::Safe => FeasibleSet::Domain(decl.domain),
        SemanticsLevel::Regular | SemanticsLevel::Atomic => FeasibleSet::Values(
            std::iter::once(prior)
                .chain(overlapping.iter().filter_map(|w| w.arg))
                .collect(),
        ),
    })
}

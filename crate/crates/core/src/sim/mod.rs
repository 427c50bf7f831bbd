//! Deterministic simulation of register constructions over weak base
//! registers.
//!
//! A [`ProtocolSpec`] names a set of single-writer base registers and, for
//! every process, a resumable [`Process`] program. The engine interleaves
//! the processes one logged event at a time; every choice it makes (which
//! process moves next, which value a safe or regular base Read returns) is a
//! [`Decision`], so an execution is fully described by its decision
//! sequence.
//!
//! Base accesses to atomic registers take effect at a single commit point.
//! All commit placements that keep the same commit order are equivalent, so
//! the engine places the commit, the invocation, and the response of an
//! atomic base access in one scheduling step (two consecutive log events).
//! Safe and regular base accesses keep separate invoke and respond steps
//! because their overlap determines what the adversary may return.

mod engine;
mod explore;
mod extract;

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::check::StepBudget;
use crate::history::{OpId, OpKind, Output, ProcessId, SemanticsLevel, Step, Value, VarDecl};

pub use engine::{random_execution, run_schedule};
pub use explore::{enumerate_executions, explore, Enumeration, ExploreStats, Limits};
pub use extract::{extract_history, Scope};

/// Largest full-domain adversary choice the enumerator will branch over.
pub const MAX_ENUMERATED_DOMAIN: u64 = 1 << 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RegId(pub usize);

/// A single-writer base register.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BaseRegisterSpec {
    pub name: Arc<str>,
    pub owner: ProcessId,
    pub readers: BTreeSet<ProcessId>,
    pub domain: u64,
    pub init: Value,
    pub semantics: SemanticsLevel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectKind {
    /// Read/Write register.
    Register,
    /// Labeling/Scan timestamp system.
    Timestamp,
}

/// The high-level object a construction implements.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObjectSpec {
    pub var: Arc<str>,
    pub kind: ObjectKind,
    pub decl: VarDecl,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub object: ObjectSpec,
    pub registers: Vec<BaseRegisterSpec>,
}

/// One high-level operation in a workload.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Invocation {
    #[serde(rename = "R")]
    Read,
    #[serde(rename = "W")]
    Write(Value),
    #[serde(rename = "L")]
    Label(Value),
    #[serde(rename = "S")]
    Scan,
}

impl Invocation {
    pub fn kind(&self) -> OpKind {
        match self {
            Self::Read => OpKind::Read,
            Self::Write(_) => OpKind::Write,
            Self::Label(_) => OpKind::Label,
            Self::Scan => OpKind::Scan,
        }
    }

    pub fn arg(&self) -> Option<Value> {
        match self {
            Self::Write(v) | Self::Label(v) => Some(*v),
            Self::Read | Self::Scan => None,
        }
    }
}

impl fmt::Display for Invocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.arg() {
            Some(v) => write!(f, "{}({v})", self.kind()),
            None => write!(f, "{}", self.kind()),
        }
    }
}

/// Per-process lists of high-level operations, run in order.
pub type Workload = Vec<Vec<Invocation>>;

/// What a program wants to do next.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Action {
    Read(RegId),
    Write(RegId, Value),
    /// Finish the current high-level operation. Writes return `None`.
    Return(Option<Output>),
}

/// A resumable per-process program. Local state persists across the
/// high-level operations of one process.
pub trait Process: Send {
    /// Start a new high-level operation.
    fn invoke(&mut self, op: &Invocation);

    /// Advance by one action. `input` is the value returned by the previous
    /// base Read, if the previous action was one.
    fn step(&mut self, input: Option<Value>) -> Action;

    fn clone_box(&self) -> Box<dyn Process>;
}

impl Clone for Box<dyn Process> {
    fn clone(&self) -> Self {
        self.clone_box()
    }
}

pub type ProcessFactory = Arc<dyn Fn(ProcessId) -> Box<dyn Process> + Send + Sync>;

/// A register or timestamp construction.
#[derive(Clone)]
pub struct ProtocolSpec {
    pub name: String,
    /// Number of processes, ids `0..n`.
    pub n: usize,
    pub layout: Arc<Layout>,
    /// Declared per-operation bound on base accesses.
    pub budget: StepBudget,
    factory: ProcessFactory,
}

impl fmt::Debug for ProtocolSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProtocolSpec")
            .field("name", &self.name)
            .field("n", &self.n)
            .field("layout", &self.layout)
            .field("budget", &self.budget)
            .finish_non_exhaustive()
    }
}

impl ProtocolSpec {
    pub fn new(
        name: impl Into<String>,
        n: usize,
        object: ObjectSpec,
        registers: Vec<BaseRegisterSpec>,
        budget: StepBudget,
        factory: ProcessFactory,
    ) -> Self {
        Self {
            name: name.into(),
            n,
            layout: Arc::new(Layout { object, registers }),
            budget,
            factory,
        }
    }

    pub fn registers(&self) -> &[BaseRegisterSpec] {
        &self.layout.registers
    }

    pub fn object(&self) -> &ObjectSpec {
        &self.layout.object
    }

    pub fn register(&self, id: RegId) -> &BaseRegisterSpec {
        &self.layout.registers[id.0]
    }

    /// Replaces the semantics of every base register.
    pub fn with_base_semantics(mut self, level: SemanticsLevel) -> Self {
        let mut layout = (*self.layout).clone();
        for r in &mut layout.registers {
            r.semantics = level;
        }
        self.layout = Arc::new(layout);
        self
    }

    pub(crate) fn spawn(&self, pid: ProcessId) -> Box<dyn Process> {
        (self.factory)(pid)
    }
}

/// One scheduler or adversary choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    /// Let this process perform its next event.
    Run(ProcessId),
    /// Value returned by the safe or regular base Read that just responded.
    Pick(Value),
}

pub type DecisionSequence = Vec<Decision>;

/// Whether an operation targets the high-level object or a base register.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Object,
    Register(RegId),
}

/// An operation as recorded by the engine.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecOp {
    pub id: OpId,
    pub proc: ProcessId,
    pub target: Target,
    pub kind: OpKind,
    pub arg: Option<Value>,
    pub ret: Option<Output>,
    pub start: Step,
    pub end: Option<Step>,
    /// High-level operation a base access belongs to.
    pub parent: Option<OpId>,
    /// Base accesses performed so far (high-level operations only).
    pub accesses: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Invoke,
    Respond,
}

/// Log entry; its step is its position in the log.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Event {
    pub op: OpId,
    pub kind: EventKind,
}

/// A fully resolved run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Execution {
    pub layout: Arc<Layout>,
    /// Indexed by `OpId`.
    pub ops: Vec<ExecOp>,
    pub events: Vec<Event>,
    pub decisions: DecisionSequence,
}

impl Execution {
    pub fn high_level_ops(&self) -> impl Iterator<Item = &ExecOp> {
        self.ops.iter().filter(|o| o.target == Target::Object)
    }

    /// Base accesses performed by each completed high-level operation.
    pub fn access_counts(&self) -> impl Iterator<Item = (OpKind, u32)> + '_ {
        self.high_level_ops()
            .filter(|o| o.end.is_some())
            .map(|o| (o.kind, o.accesses))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("process {0} has nothing to run")]
    NotRunnable(ProcessId),
    #[error("a base Read is waiting for the adversary to pick its value")]
    PickExpected,
    #[error("no base Read is waiting for a value")]
    UnexpectedPick,
    #[error("value {0} is not feasible for the pending base Read")]
    Infeasible(Value),
    #[error("decision sequence ended before the execution finished")]
    ScheduleExhausted,
    #[error("{0} decisions left over after the execution finished")]
    TrailingDecisions(usize),
    #[error("workload names {given} processes but the construction has {n}")]
    WorkloadShape { given: usize, n: usize },
    #[error("{proc} cannot perform {op} on this construction")]
    UnsupportedOp { proc: ProcessId, op: Invocation },
    #[error("argument {value} outside domain 0..{domain}")]
    ValueOutOfDomain { value: Value, domain: u64 },
    #[error("protocol error at {proc}: {reason}")]
    Protocol { proc: ProcessId, reason: String },
    #[error("execution exceeded {0} steps")]
    StepLimit(u64),
    #[error("register `{reg}` has a domain of {domain} values, too large to enumerate adversary choices")]
    DomainTooLarge { reg: String, domain: u64 },
}

//! Register constructions, each shipped as a [`ProtocolSpec`].
//!
//! | name          | processes                     | base registers                  |
//! |---------------|-------------------------------|---------------------------------|
//! | `regular_bit` | writer `p0`, readers `p1..=n` | one safe 1-writer n-reader bit  |
//! | `multireader` | writer `p0`, readers `p1..=n` | n² atomic 1-writer 1-reader     |
//! | `multiwriter` | `p0..n`, all read and write   | n atomic 1-writer n-reader      |
//! | `direct`      | writer `p0`, readers `p1..=n` | the base register itself        |
//!
//! Composite register contents are packed with [`TagCodec`].

use std::collections::BTreeSet;
use std::sync::Arc;

use thiserror::Error;

use crate::check::StepBudget;
use crate::history::{OpKind, Output, ProcessId, SemanticsLevel, Value, VarDecl};
use crate::sim::{
    Action, BaseRegisterSpec, Invocation, ObjectKind, ObjectSpec, Process, ProtocolSpec, RegId,
};
pub use crate::tag::{tag_less, Tag, TagCodec, TaggedValue};

/// Name of the high-level register in extracted histories.
pub const REGISTER_VAR: &str = "x";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConstructionError {
    #[error("a construction needs at least one {0}")]
    NoProcesses(&'static str),
    #[error("the regular bit is boolean, domain {0} requested")]
    NonBooleanDomain(u64),
    #[error("value domain must have at least 2 values, got {0}")]
    DomainTooSmall(u64),
}

fn pids(range: std::ops::Range<usize>) -> BTreeSet<ProcessId> {
    range.map(|p| ProcessId(p as u32)).collect()
}

fn register_object(domain: u64, writers: BTreeSet<ProcessId>, readers: BTreeSet<ProcessId>) -> ObjectSpec {
    ObjectSpec {
        var: Arc::from(REGISTER_VAR),
        kind: ObjectKind::Register,
        decl: VarDecl::new(domain, Value(0), writers, readers),
    }
}

fn check_domain(domain: u64) -> Result<(), ConstructionError> {
    if domain < 2 {
        return Err(ConstructionError::DomainTooSmall(domain));
    }
    Ok(())
}

/// Reads or writes one base register with no extra logic.
#[derive(Clone)]
struct Passthrough {
    reg: RegId,
    op: Option<Invocation>,
    issued: bool,
}

impl Process for Passthrough {
    fn invoke(&mut self, op: &Invocation) {
        self.op = Some(*op);
        self.issued = false;
    }

    fn step(&mut self, input: Option<Value>) -> Action {
        if self.issued {
            return Action::Return(input.map(Output::Value));
        }
        self.issued = true;
        match self.op.expect("invoked") {
            Invocation::Write(v) => Action::Write(self.reg, v),
            _ => Action::Read(self.reg),
        }
    }

    fn clone_box(&self) -> Box<dyn Process> {
        Box::new(self.clone())
    }
}

/// Exposes a single base register as the high-level register: one base
/// access per operation. Useful for observing base semantics directly.
pub fn build_direct(
    n_readers: usize,
    domain: u64,
    semantics: SemanticsLevel,
) -> Result<ProtocolSpec, ConstructionError> {
    if n_readers == 0 {
        return Err(ConstructionError::NoProcesses("reader"));
    }
    check_domain(domain)?;
    let register = BaseRegisterSpec {
        name: Arc::from("base"),
        owner: ProcessId(0),
        readers: pids(1..n_readers + 1),
        domain,
        init: Value(0),
        semantics,
    };
    let budget = StepBudget::new().with(OpKind::Write, 1).with(OpKind::Read, 1);
    Ok(ProtocolSpec::new(
        "direct",
        n_readers + 1,
        register_object(domain, pids(0..1), pids(1..n_readers + 1)),
        vec![register],
        budget,
        Arc::new(|_| {
            Box::new(Passthrough {
                reg: RegId(0),
                op: None,
                issued: false,
            })
        }),
    ))
}

/// Writer of the regular bit: skips the base write when the value would not
/// change, so every base write it issues flips the bit.
#[derive(Clone)]
struct BitWriter {
    last: Value,
    want: Value,
    issued: bool,
}

impl Process for BitWriter {
    fn invoke(&mut self, op: &Invocation) {
        let Invocation::Write(v) = op else {
            unreachable!("the bit writer only writes")
        };
        self.want = *v;
        self.issued = false;
    }

    fn step(&mut self, _: Option<Value>) -> Action {
        if self.issued || self.want == self.last {
            self.last = self.want;
            return Action::Return(None);
        }
        self.issued = true;
        Action::Write(RegId(0), self.want)
    }

    fn clone_box(&self) -> Box<dyn Process> {
        Box::new(self.clone())
    }
}

/// A regular boolean register from one safe boolean base register.
///
/// Writer `p0` keeps the last value it wrote; a Write of the same value
/// returns with no base access, otherwise it performs one base write. A
/// Read is one base read.
pub fn build_regular_bit(n_readers: usize, domain: u64) -> Result<ProtocolSpec, ConstructionError> {
    if domain != 2 {
        return Err(ConstructionError::NonBooleanDomain(domain));
    }
    if n_readers == 0 {
        return Err(ConstructionError::NoProcesses("reader"));
    }
    let register = BaseRegisterSpec {
        name: Arc::from("bit"),
        owner: ProcessId(0),
        readers: pids(1..n_readers + 1),
        domain: 2,
        init: Value(0),
        semantics: SemanticsLevel::Safe,
    };
    let budget = StepBudget::new().with(OpKind::Write, 1).with(OpKind::Read, 1);
    Ok(ProtocolSpec::new(
        "regular_bit",
        n_readers + 1,
        register_object(2, pids(0..1), pids(1..n_readers + 1)),
        vec![register],
        budget,
        Arc::new(|pid| -> Box<dyn Process> {
            if pid == ProcessId(0) {
                Box::new(BitWriter {
                    last: Value(0),
                    want: Value(0),
                    issued: false,
                })
            } else {
                Box::new(Passthrough {
                    reg: RegId(0),
                    op: None,
                    issued: false,
                })
            }
        }),
    ))
}

/// Register indices of the multireader layout for `n` readers. Reader `j`
/// (process `pj`, `1 <= j <= n`) owns no `W` register; `W_j` sits at index
/// `j - 1` and the reader-to-reader registers follow in `(i, j)` order.
#[derive(Clone, Copy, Debug)]
struct MultireaderLayout {
    n: usize,
}

impl MultireaderLayout {
    fn w(&self, j: usize) -> RegId {
        RegId(j - 1)
    }

    /// Register written by reader `i` and read by reader `j`.
    fn c(&self, i: usize, j: usize) -> RegId {
        debug_assert!(i != j);
        let col = if j < i { j - 1 } else { j - 2 };
        RegId(self.n + (i - 1) * (self.n - 1) + col)
    }

    fn others(&self, j: usize) -> impl Iterator<Item = usize> {
        (1..=self.n).filter(move |&i| i != j)
    }
}

#[derive(Clone)]
struct MultireaderWriter {
    layout: MultireaderLayout,
    codec: TagCodec,
    seq: u64,
    val: Value,
    next: usize,
}

impl Process for MultireaderWriter {
    fn invoke(&mut self, op: &Invocation) {
        let Invocation::Write(v) = op else {
            unreachable!("the multireader writer only writes")
        };
        self.seq += 1;
        self.val = *v;
        self.next = 1;
    }

    fn step(&mut self, _: Option<Value>) -> Action {
        if self.next > self.layout.n {
            return Action::Return(None);
        }
        let reg = self.layout.w(self.next);
        self.next += 1;
        let tv = TaggedValue::new(Tag::new(self.seq, ProcessId(0)), self.val);
        Action::Write(reg, self.codec.encode(tv))
    }

    fn clone_box(&self) -> Box<dyn Process> {
        Box::new(self.clone())
    }
}

#[derive(Clone)]
struct MultireaderReader {
    codec: TagCodec,
    writeback: bool,
    /// Last value this reader returned, with its tag.
    memory: TaggedValue,
    best: TaggedValue,
    reads: Vec<RegId>,
    writes: Vec<RegId>,
    pc: usize,
}

impl Process for MultireaderReader {
    fn invoke(&mut self, _: &Invocation) {
        self.best = self.memory;
        self.pc = 0;
    }

    fn step(&mut self, input: Option<Value>) -> Action {
        if let Some(code) = input {
            let seen = self.codec.decode(code);
            if tag_less(self.best.tag, seen.tag) {
                self.best = seen;
            }
        }
        if self.pc < self.reads.len() {
            self.pc += 1;
            return Action::Read(self.reads[self.pc - 1]);
        }
        self.memory = self.best;
        let k = self.pc - self.reads.len();
        if self.writeback && k < self.writes.len() {
            self.pc += 1;
            return Action::Write(self.writes[k], self.codec.encode(self.best));
        }
        Action::Return(Some(Output::Value(self.best.val)))
    }

    fn clone_box(&self) -> Box<dyn Process> {
        Box::new(self.clone())
    }
}

fn multireader(n: usize, domain: u64, writeback: bool) -> Result<ProtocolSpec, ConstructionError> {
    if n == 0 {
        return Err(ConstructionError::NoProcesses("reader"));
    }
    check_domain(domain)?;
    let layout = MultireaderLayout { n };
    let codec = TagCodec::new(n + 1, domain);
    let init = codec.encode(TaggedValue::new(Tag::initial(ProcessId(0)), Value(0)));
    let reg = |name: String, owner: usize, reader: usize| BaseRegisterSpec {
        name: Arc::from(name),
        owner: ProcessId(owner as u32),
        readers: BTreeSet::from([ProcessId(reader as u32)]),
        domain: codec.register_domain(),
        init,
        semantics: SemanticsLevel::Atomic,
    };
    let mut registers: Vec<BaseRegisterSpec> = (1..=n).map(|j| reg(format!("w{j}"), 0, j)).collect();
    for i in 1..=n {
        for j in layout.others(i) {
            debug_assert_eq!(layout.c(i, j).0, registers.len());
            registers.push(reg(format!("c{i}_{j}"), i, j));
        }
    }
    let read_budget = if writeback { 2 * n - 1 } else { n };
    let budget = StepBudget::new()
        .with(OpKind::Write, n as u32)
        .with(OpKind::Read, read_budget as u32);
    let name = if writeback { "multireader" } else { "multireader_nowriteback" };
    Ok(ProtocolSpec::new(
        name,
        n + 1,
        register_object(domain, pids(0..1), pids(1..n + 1)),
        registers,
        budget,
        Arc::new(move |pid| -> Box<dyn Process> {
            let me = pid.index();
            let start = TaggedValue::new(Tag::initial(ProcessId(0)), Value(0));
            if me == 0 {
                return Box::new(MultireaderWriter {
                    layout,
                    codec,
                    seq: 0,
                    val: Value(0),
                    next: 1,
                });
            }
            Box::new(MultireaderReader {
                codec,
                writeback,
                memory: start,
                best: start,
                reads: std::iter::once(layout.w(me))
                    .chain(layout.others(me).map(|i| layout.c(i, me)))
                    .collect(),
                writes: layout.others(me).map(|i| layout.c(me, i)).collect(),
                pc: 0,
            })
        }),
    ))
}

/// A 1-writer n-reader atomic register from n² atomic 1-writer 1-reader
/// registers.
///
/// The writer `p0` stamps each value with an increasing sequence number and
/// writes it to `w_j` for every reader `j`. Reader `j` reads `w_j` and every
/// `c_i_j`, takes the largest tag among those and its own previous result,
/// writes it back to every `c_j_i`, and returns it. The write-back is what
/// stops a later reader from returning an older value than an earlier one.
pub fn build_multireader(n: usize, domain: u64) -> Result<ProtocolSpec, ConstructionError> {
    multireader(n, domain, true)
}

/// [`build_multireader`] without the reader-to-reader write-back. Not
/// atomic; kept to exhibit the new-old inversion the write-back prevents.
pub fn build_multireader_nowriteback(n: usize, domain: u64) -> Result<ProtocolSpec, ConstructionError> {
    multireader(n, domain, false)
}

/// Reads every register of a collect in index order, keeping the maximum.
#[derive(Clone)]
struct MultiwriterProc {
    me: ProcessId,
    n: usize,
    codec: TagCodec,
    op: Option<Invocation>,
    best: Option<TaggedValue>,
    pc: usize,
}

impl Process for MultiwriterProc {
    fn invoke(&mut self, op: &Invocation) {
        self.op = Some(*op);
        self.best = None;
        self.pc = 0;
    }

    fn step(&mut self, input: Option<Value>) -> Action {
        if let Some(code) = input {
            let seen = self.codec.decode(code);
            if self.best.is_none_or(|b| tag_less(b.tag, seen.tag)) {
                self.best = Some(seen);
            }
        }
        if self.pc < self.n {
            self.pc += 1;
            return Action::Read(RegId(self.pc - 1));
        }
        let best = self.best.expect("collected at least one register");
        match self.op.expect("invoked") {
            Invocation::Write(v) if self.pc == self.n => {
                self.pc += 1;
                let tag = Tag::new(best.tag.seq + 1, self.me);
                Action::Write(RegId(self.me.index()), self.codec.encode(TaggedValue::new(tag, v)))
            }
            Invocation::Write(_) => Action::Return(None),
            _ => Action::Return(Some(Output::Value(best.val))),
        }
    }

    fn clone_box(&self) -> Box<dyn Process> {
        Box::new(self.clone())
    }
}

/// An n-writer n-reader atomic register from n atomic 1-writer n-reader
/// registers, one per process.
///
/// A Write collects all registers, takes `1 + max seq`, and writes its value
/// under tag `(seq, pid)` to its own register. A Read collects all registers
/// and returns the value with the largest tag.
pub fn build_multiwriter(n: usize, domain: u64) -> Result<ProtocolSpec, ConstructionError> {
    if n == 0 {
        return Err(ConstructionError::NoProcesses("process"));
    }
    check_domain(domain)?;
    let codec = TagCodec::new(n, domain);
    let everyone = pids(0..n);
    let registers = (0..n)
        .map(|p| BaseRegisterSpec {
            name: Arc::from(format!("r{p}")),
            owner: ProcessId(p as u32),
            readers: everyone.clone(),
            domain: codec.register_domain(),
            init: codec.encode(TaggedValue::new(Tag::initial(ProcessId(p as u32)), Value(0))),
            semantics: SemanticsLevel::Atomic,
        })
        .collect();
    let budget = StepBudget::new()
        .with(OpKind::Write, n as u32 + 1)
        .with(OpKind::Read, n as u32);
    Ok(ProtocolSpec::new(
        "multiwriter",
        n,
        register_object(domain, everyone.clone(), everyone),
        registers,
        budget,
        Arc::new(move |me| {
            Box::new(MultiwriterProc {
                me,
                n,
                codec,
                op: None,
                best: None,
                pc: 0,
            })
        }),
    ))
}

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    Action, Decision, Event, EventKind, ExecOp, Execution, Invocation, ObjectKind, Process,
    ProtocolSpec, RegId, SimError, Target, Workload, MAX_ENUMERATED_DOMAIN,
};
use crate::history::{FeasibleSet, OpId, OpKind, Output, ProcessId, SemanticsLevel, Step, Value};

/// Safety net for [`random_execution`] on non-terminating programs.
const RANDOM_STEP_LIMIT: u64 = 1 << 20;

#[derive(Clone, Copy, Debug)]
enum Phase {
    Idle,
    Busy {
        hl: OpId,
        input: Option<Value>,
        inflight: Option<OpId>,
    },
}

#[derive(Clone)]
struct Slot {
    logic: Box<dyn Process>,
    next: usize,
    phase: Phase,
}

#[derive(Clone, Debug)]
struct RegState {
    /// Current value of an atomic register; last completed write otherwise.
    value: Value,
    /// Completed writes of a safe or regular register: (value, respond step).
    completed: Vec<(Value, Step)>,
    inflight_write: Option<Value>,
}

#[derive(Clone, Debug)]
struct PendingPick {
    proc: ProcessId,
    op: OpId,
    feasible: FeasibleSet,
}

/// What the next decision has to resolve.
pub(crate) enum Choice<'s> {
    Run(Vec<ProcessId>),
    Pick(&'s FeasibleSet),
}

/// Engine state for one execution in progress.
#[derive(Clone)]
pub(crate) struct Sim<'a> {
    spec: &'a ProtocolSpec,
    workload: &'a Workload,
    procs: Vec<Slot>,
    regs: Vec<RegState>,
    ops: Vec<ExecOp>,
    events: Vec<Event>,
    decisions: Vec<Decision>,
    pick: Option<PendingPick>,
}

impl<'a> Sim<'a> {
    pub(crate) fn new(spec: &'a ProtocolSpec, workload: &'a Workload) -> Result<Self, SimError> {
        if workload.len() > spec.n {
            return Err(SimError::WorkloadShape {
                given: workload.len(),
                n: spec.n,
            });
        }
        let object = spec.object();
        for (p, ops) in workload.iter().enumerate() {
            let proc = ProcessId(p as u32);
            for op in ops {
                let allowed = match (object.kind, op) {
                    (ObjectKind::Register, Invocation::Write(_))
                    | (ObjectKind::Timestamp, Invocation::Label(_)) => {
                        object.decl.writers.contains(&proc)
                    }
                    (ObjectKind::Register, Invocation::Read)
                    | (ObjectKind::Timestamp, Invocation::Scan) => {
                        object.decl.readers.contains(&proc)
                    }
                    _ => false,
                };
                if !allowed {
                    return Err(SimError::UnsupportedOp { proc, op: *op });
                }
                if let Some(v) = op.arg().filter(|v| v.0 >= object.decl.domain) {
                    return Err(SimError::ValueOutOfDomain {
                        value: v,
                        domain: object.decl.domain,
                    });
                }
            }
        }
        let procs = (0..spec.n)
            .map(|p| Slot {
                logic: spec.spawn(ProcessId(p as u32)),
                next: 0,
                phase: Phase::Idle,
            })
            .collect();
        let regs = spec
            .registers()
            .iter()
            .map(|r| RegState {
                value: r.init,
                completed: Vec::new(),
                inflight_write: None,
            })
            .collect();
        Ok(Self {
            spec,
            workload,
            procs,
            regs,
            ops: Vec::new(),
            events: Vec::new(),
            decisions: Vec::new(),
            pick: None,
        })
    }

    fn has_work(&self, p: usize) -> bool {
        match self.procs[p].phase {
            Phase::Busy { .. } => true,
            Phase::Idle => self.procs[p].next < self.workload.get(p).map_or(0, Vec::len),
        }
    }

    pub(crate) fn is_done(&self) -> bool {
        self.pick.is_none() && (0..self.procs.len()).all(|p| !self.has_work(p))
    }

    pub(crate) fn steps(&self) -> u64 {
        self.events.len() as u64
    }

    pub(crate) fn choice(&self) -> Choice<'_> {
        match &self.pick {
            Some(pick) => Choice::Pick(&pick.feasible),
            None => Choice::Run(
                (0..self.procs.len())
                    .filter(|&p| self.has_work(p))
                    .map(|p| ProcessId(p as u32))
                    .collect(),
            ),
        }
    }

    /// Every decision valid at this point, for exhaustive enumeration.
    pub(crate) fn decisions_here(&self) -> Result<Vec<Decision>, SimError> {
        match self.choice() {
            Choice::Run(procs) => Ok(procs.into_iter().map(Decision::Run).collect()),
            Choice::Pick(set) => {
                if set.len() > MAX_ENUMERATED_DOMAIN {
                    let pick = self.pick.as_ref().expect("pick pending");
                    let reg = match self.ops[pick.op.0 as usize].target {
                        Target::Register(r) => self.spec.register(r).name.to_string(),
                        Target::Object => unreachable!("picks only happen on base registers"),
                    };
                    return Err(SimError::DomainTooLarge {
                        reg,
                        domain: set.len(),
                    });
                }
                Ok(set.iter().map(Decision::Pick).collect())
            }
        }
    }

    pub(crate) fn apply(&mut self, d: Decision) -> Result<(), SimError> {
        match (d, self.pick.take()) {
            (Decision::Pick(v), Some(pick)) => {
                if !pick.feasible.contains(v) {
                    self.pick = Some(pick);
                    return Err(SimError::Infeasible(v));
                }
                self.ops[pick.op.0 as usize].ret = Some(Output::Value(v));
                let slot = &mut self.procs[pick.proc.index()];
                if let Phase::Busy { input, .. } = &mut slot.phase {
                    *input = Some(v);
                }
            }
            (Decision::Run(_), Some(pick)) => {
                self.pick = Some(pick);
                return Err(SimError::PickExpected);
            }
            (Decision::Pick(_), None) => return Err(SimError::UnexpectedPick),
            (Decision::Run(p), None) => self.run(p)?,
        }
        self.decisions.push(d);
        Ok(())
    }

    fn log(&mut self, op: OpId, kind: EventKind) -> Step {
        let step = self.events.len() as Step;
        self.events.push(Event { op, kind });
        step
    }

    fn new_op(
        &mut self,
        proc: ProcessId,
        target: Target,
        kind: OpKind,
        arg: Option<Value>,
        parent: Option<OpId>,
    ) -> OpId {
        let id = OpId(self.ops.len() as u64);
        let start = self.log(id, EventKind::Invoke);
        self.ops.push(ExecOp {
            id,
            proc,
            target,
            kind,
            arg,
            ret: None,
            start,
            end: None,
            parent,
            accesses: 0,
        });
        id
    }

    fn finish_op(&mut self, id: OpId, ret: Option<Output>) {
        let end = self.log(id, EventKind::Respond);
        let op = &mut self.ops[id.0 as usize];
        op.end = Some(end);
        op.ret = ret;
    }

    fn run(&mut self, proc: ProcessId) -> Result<(), SimError> {
        let p = proc.index();
        if p >= self.procs.len() || !self.has_work(p) {
            return Err(SimError::NotRunnable(proc));
        }
        match self.procs[p].phase {
            Phase::Idle => {
                let inv = self.workload[p][self.procs[p].next];
                self.procs[p].next += 1;
                let hl = self.new_op(proc, Target::Object, inv.kind(), inv.arg(), None);
                self.procs[p].logic.invoke(&inv);
                self.procs[p].phase = Phase::Busy {
                    hl,
                    input: None,
                    inflight: None,
                };
            }
            Phase::Busy {
                hl,
                input,
                inflight: None,
            } => {
                let action = self.procs[p].logic.step(input);
                self.perform(proc, hl, action)?;
            }
            Phase::Busy {
                hl,
                inflight: Some(base),
                ..
            } => self.complete_weak_access(proc, hl, base),
        }
        Ok(())
    }

    fn perform(&mut self, proc: ProcessId, hl: OpId, action: Action) -> Result<(), SimError> {
        let p = proc.index();
        let protocol = |reason: String| SimError::Protocol { proc, reason };
        let (reg, kind, arg) = match action {
            Action::Return(out) => {
                let kind = self.ops[hl.0 as usize].kind;
                let fits = matches!(
                    (kind, &out),
                    (OpKind::Write, None)
                        | (OpKind::Read, Some(Output::Value(_)))
                        | (OpKind::Label, Some(Output::Label(_)))
                        | (OpKind::Scan, Some(Output::Scan(_)))
                );
                if !fits {
                    return Err(protocol(format!("{kind} returned {out:?}")));
                }
                if let Some(Output::Value(v)) = out {
                    let domain = self.spec.object().decl.domain;
                    if v.0 >= domain {
                        return Err(protocol(format!("returned {v} outside domain 0..{domain}")));
                    }
                }
                self.finish_op(hl, out);
                self.procs[p].phase = Phase::Idle;
                return Ok(());
            }
            Action::Read(reg) => (reg, OpKind::Read, None),
            Action::Write(reg, v) => (reg, OpKind::Write, Some(v)),
        };

        let spec = self
            .spec
            .registers()
            .get(reg.0)
            .ok_or_else(|| protocol(format!("no base register {}", reg.0)))?;
        match kind {
            OpKind::Write if spec.owner != proc => {
                return Err(protocol(format!("writes `{}` owned by {}", spec.name, spec.owner)));
            }
            OpKind::Read if !spec.readers.contains(&proc) => {
                return Err(protocol(format!("reads `{}` without being a reader", spec.name)));
            }
            _ => {}
        }
        if let Some(v) = arg.filter(|v| v.0 >= spec.domain) {
            return Err(protocol(format!("writes {v} outside `{}` domain", spec.name)));
        }
        let semantics = spec.semantics;

        self.ops[hl.0 as usize].accesses += 1;
        let base = self.new_op(proc, Target::Register(reg), kind, arg, Some(hl));
        if semantics == SemanticsLevel::Atomic {
            // invoke, commit, respond in one step
            let state = &mut self.regs[reg.0];
            let ret = match arg {
                Some(v) => {
                    state.value = v;
                    None
                }
                None => Some(state.value),
            };
            self.finish_op(base, ret.map(Output::Value));
            self.procs[p].phase = Phase::Busy {
                hl,
                input: ret,
                inflight: None,
            };
        } else {
            if let Some(v) = arg {
                self.regs[reg.0].inflight_write = Some(v);
            }
            self.procs[p].phase = Phase::Busy {
                hl,
                input: None,
                inflight: Some(base),
            };
        }
        Ok(())
    }

    fn complete_weak_access(&mut self, proc: ProcessId, hl: OpId, base: OpId) {
        let Target::Register(reg) = self.ops[base.0 as usize].target else {
            unreachable!("in-flight access targets a base register")
        };
        let kind = self.ops[base.0 as usize].kind;
        let start = self.ops[base.0 as usize].start;
        self.procs[proc.index()].phase = Phase::Busy {
            hl,
            input: None,
            inflight: None,
        };
        if kind == OpKind::Write {
            self.finish_op(base, None);
            let end = self.ops[base.0 as usize].end.expect("just finished");
            let v = self.ops[base.0 as usize].arg.expect("write has an argument");
            let state = &mut self.regs[reg.0];
            state.completed.push((v, end));
            state.value = v;
            state.inflight_write = None;
            return;
        }
        let feasible = self.weak_read_feasible(reg, start);
        // the value is filled in by the following Pick
        let end = self.log(base, EventKind::Respond);
        self.ops[base.0 as usize].end = Some(end);
        self.pick = Some(PendingPick {
            proc,
            op: base,
            feasible,
        });
    }

    /// Feasible values for a safe or regular base Read invoked at `start`
    /// and responding now; every overlapping write is known at this point.
    fn weak_read_feasible(&self, reg: RegId, start: Step) -> FeasibleSet {
        let spec = self.spec.register(reg);
        let state = &self.regs[reg.0];
        let prior = state
            .completed
            .iter()
            .rev()
            .find(|(_, end)| *end < start)
            .map_or(spec.init, |(v, _)| *v);
        let mut overlapping: Vec<Value> = state
            .completed
            .iter()
            .filter(|(_, end)| *end > start)
            .map(|(v, _)| *v)
            .collect();
        overlapping.extend(state.inflight_write);
        if overlapping.is_empty() {
            return FeasibleSet::Values([prior].into());
        }
        match spec.semantics {
            SemanticsLevel::Safe => FeasibleSet::Domain(spec.domain),
            _ => FeasibleSet::Values(std::iter::once(prior).chain(overlapping).collect()),
        }
    }

    pub(crate) fn into_execution(self) -> Execution {
        Execution {
            layout: self.spec.layout.clone(),
            ops: self.ops,
            events: self.events,
            decisions: self.decisions,
        }
    }
}

/// Replays a decision sequence. The sequence must resolve every decision
/// point of the run and nothing more.
pub fn run_schedule(
    spec: &ProtocolSpec,
    workload: &Workload,
    decisions: &[Decision],
) -> Result<Execution, SimError> {
    let mut sim = Sim::new(spec, workload)?;
    for (i, d) in decisions.iter().enumerate() {
        if sim.is_done() {
            return Err(SimError::TrailingDecisions(decisions.len() - i));
        }
        sim.apply(*d)?;
    }
    if !sim.is_done() {
        return Err(SimError::ScheduleExhausted);
    }
    Ok(sim.into_execution())
}

/// Runs one execution with every decision drawn uniformly from the valid
/// options by a ChaCha8 generator seeded with `seed` (`seed_from_u64`).
/// Scheduling picks among runnable processes; the adversary picks among the
/// feasible values of the pending base Read.
pub fn random_execution(
    spec: &ProtocolSpec,
    workload: &Workload,
    seed: u64,
) -> Result<Execution, SimError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sim = Sim::new(spec, workload)?;
    while !sim.is_done() {
        if sim.steps() >= RANDOM_STEP_LIMIT {
            return Err(SimError::StepLimit(RANDOM_STEP_LIMIT));
        }
        let d = match sim.choice() {
            Choice::Run(procs) => Decision::Run(procs[rng.gen_range(0..procs.len())]),
            Choice::Pick(FeasibleSet::Domain(m)) => Decision::Pick(Value(rng.gen_range(0..*m))),
            Choice::Pick(FeasibleSet::Values(set)) => {
                let i = rng.gen_range(0..set.len());
                Decision::Pick(*set.iter().nth(i).expect("index in range"))
            }
        };
        sim.apply(d)?;
    }
    Ok(sim.into_execution())
}

//! JSON Lines trace codec.
//!
//! ```text
//! {"version":1,"vars":{"x":{"domain":2,"init":0,"writers":[0],"readers":[1]}}}
//! {"step":0,"op":0,"proc":0,"var":"x","act":"invoke","kind":"W","arg":1}
//! {"step":1,"op":0,"proc":0,"var":"x","act":"respond","kind":"W"}
//! ```
//!
//! Labelings respond with `"ret":[seq,pid]`; Scans respond with
//! `"ret":[[owner,seq,pid,payload],...]` in scan order. A trace may end with
//! one extension record `{"decisions":[...]}` carrying the schedule that
//! produced it.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::history::{
    History, HistoryError, OpId, OpKind, OpRecord, Output, ProcessId, Step, Value, VarDecl,
};
use crate::sim::Decision;
use crate::tag::Tag;
use crate::timestamp::{LabeledObject, ScanResult};

pub const TRACE_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("trace is empty, expected a header line")]
    MissingHeader,
    #[error("unsupported trace version {0}")]
    UnsupportedVersion(u32),
    #[error("line {line}: step {step} does not increase")]
    StepOrder { line: usize, step: Step },
    #[error("line {line}: operation {op} invoked twice")]
    DuplicateInvoke { line: usize, op: OpId },
    #[error("line {line}: respond without invoke for operation {op}")]
    RespondWithoutInvoke { line: usize, op: OpId },
    #[error("line {line}: operation {op} responded twice")]
    DuplicateRespond { line: usize, op: OpId },
    #[error("line {line}: respond for operation {op} disagrees with its invoke on `{field}`")]
    Mismatch { line: usize, op: OpId, field: &'static str },
    #[error("line {line}: {reason}")]
    MalformedEvent { line: usize, reason: String },
    #[error("line {line}: the decisions record must be the last line")]
    MisplacedExtension { line: usize },
    #[error(transparent)]
    History(#[from] HistoryError),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    version: u32,
    vars: BTreeMap<String, VarLine>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VarLine {
    domain: u64,
    init: u64,
    writers: Vec<u32>,
    readers: Vec<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Act {
    Invoke,
    Respond,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum RetLine {
    Value(u64),
    Label(u64, u32),
    Scan(Vec<(u32, u64, u32, u64)>),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EventLine {
    step: Step,
    op: u64,
    proc: u32,
    var: String,
    act: Act,
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    arg: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ret: Option<RetLine>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExtensionLine {
    decisions: Vec<Decision>,
}

impl From<&Output> for RetLine {
    fn from(out: &Output) -> Self {
        match out {
            Output::Value(v) => RetLine::Value(v.0),
            Output::Label(t) => RetLine::Label(t.seq, t.pid.0),
            Output::Scan(scan) => RetLine::Scan(
                scan.iter()
                    .map(|o| (o.owner.0, o.label.seq, o.label.pid.0, o.payload.0))
                    .collect(),
            ),
        }
    }
}

fn ret_to_output(kind: OpKind, ret: RetLine) -> Result<Output, String> {
    match (kind, ret) {
        (OpKind::Read, RetLine::Value(v)) => Ok(Output::Value(Value(v))),
        (OpKind::Label, RetLine::Label(seq, pid)) => Ok(Output::Label(Tag::new(seq, ProcessId(pid)))),
        (OpKind::Scan, RetLine::Scan(entries)) => Ok(Output::Scan(ScanResult::from_ordered(
            entries
                .into_iter()
                .map(|(owner, seq, pid, payload)| LabeledObject {
                    owner: ProcessId(owner),
                    label: Tag::new(seq, ProcessId(pid)),
                    payload: Value(payload),
                })
                .collect(),
        ))),
        (kind, _) => Err(format!("return value does not fit a {kind} operation")),
    }
}

/// A trace parsed together with its optional decisions record.
#[derive(Debug, Clone)]
pub struct ParsedTrace {
    pub history: History,
    pub decisions: Option<Vec<Decision>>,
}

pub fn parse_trace(text: &str) -> Result<History, TraceError> {
    parse_trace_full(text).map(|t| t.history)
}

pub fn parse_trace_full(text: &str) -> Result<ParsedTrace, TraceError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty());

    let (hline, htext) = lines.next().ok_or(TraceError::MissingHeader)?;
    let header: Header =
        serde_json::from_str(htext).map_err(|source| TraceError::Json { line: hline, source })?;
    if header.version != TRACE_VERSION {
        return Err(TraceError::UnsupportedVersion(header.version));
    }
    let vars: BTreeMap<Arc<str>, VarDecl> = header
        .vars
        .into_iter()
        .map(|(name, v)| {
            let decl = VarDecl::new(
                v.domain,
                Value(v.init),
                v.writers.into_iter().map(ProcessId),
                v.readers.into_iter().map(ProcessId),
            );
            (Arc::from(name), decl)
        })
        .collect();

    let mut ops: HashMap<u64, OpRecord> = HashMap::new();
    let mut last_step: Option<Step> = None;
    let mut decisions = None;
    for (line, text) in lines {
        if decisions.is_some() {
            return Err(TraceError::MisplacedExtension { line });
        }
        let raw: serde_json::Value =
            serde_json::from_str(text).map_err(|source| TraceError::Json { line, source })?;
        if raw.get("decisions").is_some() {
            let ext: ExtensionLine =
                serde_json::from_value(raw).map_err(|source| TraceError::Json { line, source })?;
            decisions = Some(ext.decisions);
            continue;
        }
        let ev: EventLine =
            serde_json::from_value(raw).map_err(|source| TraceError::Json { line, source })?;
        if last_step.is_some_and(|s| ev.step <= s) {
            return Err(TraceError::StepOrder { line, step: ev.step });
        }
        last_step = Some(ev.step);
        apply_event(&mut ops, &vars, line, ev)?;
    }

    let history = History::new(vars, ops.into_values().collect())?;
    Ok(ParsedTrace { history, decisions })
}

fn apply_event(
    ops: &mut HashMap<u64, OpRecord>,
    vars: &BTreeMap<Arc<str>, VarDecl>,
    line: usize,
    ev: EventLine,
) -> Result<(), TraceError> {
    let malformed = |reason: String| TraceError::MalformedEvent { line, reason };
    let kind = OpKind::from_code(&ev.kind)
        .ok_or_else(|| malformed(format!("unknown operation kind `{}`", ev.kind)))?;
    let id = OpId(ev.op);
    match ev.act {
        Act::Invoke => {
            if ops.contains_key(&ev.op) {
                return Err(TraceError::DuplicateInvoke { line, op: id });
            }
            if ev.ret.is_some() {
                return Err(malformed("invoke events carry no return value".into()));
            }
            let var = vars
                .get_key_value(ev.var.as_str())
                .map(|(k, _)| k.clone())
                .ok_or(HistoryError::UnknownVar(id, ev.var.clone()))?;
            ops.insert(
                ev.op,
                OpRecord {
                    id,
                    proc: ProcessId(ev.proc),
                    var,
                    kind,
                    arg: ev.arg.map(Value),
                    ret: None,
                    start: ev.step,
                    end: None,
                },
            );
        }
        Act::Respond => {
            let op = ops
                .get_mut(&ev.op)
                .ok_or(TraceError::RespondWithoutInvoke { line, op: id })?;
            if op.end.is_some() {
                return Err(TraceError::DuplicateRespond { line, op: id });
            }
            let mismatch = |field| TraceError::Mismatch { line, op: id, field };
            if op.proc != ProcessId(ev.proc) {
                return Err(mismatch("proc"));
            }
            if *op.var != *ev.var {
                return Err(mismatch("var"));
            }
            if op.kind != kind {
                return Err(mismatch("kind"));
            }
            if ev.arg.is_some() {
                return Err(malformed("respond events carry no argument".into()));
            }
            op.end = Some(ev.step);
            op.ret = ev.ret.map(|r| ret_to_output(kind, r)).transpose().map_err(malformed)?;
        }
    }
    Ok(())
}

/// Canonical form: header, then one event per line in step order.
pub fn serialize_trace(h: &History) -> String {
    serialize_inner(h, None)
}

/// [`serialize_trace`] followed by a decisions record.
pub fn serialize_trace_with_decisions(h: &History, decisions: &[Decision]) -> String {
    serialize_inner(h, Some(decisions))
}

fn serialize_inner(h: &History, decisions: Option<&[Decision]>) -> String {
    let header = Header {
        version: TRACE_VERSION,
        vars: h
            .vars()
            .iter()
            .map(|(name, d)| {
                (
                    name.to_string(),
                    VarLine {
                        domain: d.domain,
                        init: d.init.0,
                        writers: d.writers.iter().map(|p| p.0).collect(),
                        readers: d.readers.iter().map(|p| p.0).collect(),
                    },
                )
            })
            .collect(),
    };
    let mut events = Vec::with_capacity(h.len() * 2);
    for op in h.ops() {
        events.push(EventLine {
            step: op.start,
            op: op.id.0,
            proc: op.proc.0,
            var: op.var.to_string(),
            act: Act::Invoke,
            kind: op.kind.code().to_string(),
            arg: op.arg.map(|v| v.0),
            ret: None,
        });
        if let Some(end) = op.end {
            events.push(EventLine {
                step: end,
                op: op.id.0,
                proc: op.proc.0,
                var: op.var.to_string(),
                act: Act::Respond,
                kind: op.kind.code().to_string(),
                arg: None,
                ret: op.ret.as_ref().map(RetLine::from),
            });
        }
    }
    events.sort_by_key(|e| e.step);

    let mut out = serde_json::to_string(&header).expect("header serializes");
    out.push('\n');
    for e in &events {
        out.push_str(&serde_json::to_string(e).expect("event serializes"));
        out.push('\n');
    }
    if let Some(decisions) = decisions {
        let ext = ExtensionLine {
            decisions: decisions.to_vec(),
        };
        out.push_str(&serde_json::to_string(&ext).expect("decisions serialize"));
        out.push('\n');
    }
    out
}

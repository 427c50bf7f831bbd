//! Judging histories against safe, regular, and atomic semantics, and
//! executions against their wait-freedom budgets.

mod atomic;
mod oracle;
mod wait_free;

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::history::{
    feasible_values, FeasibleSet, History, HistoryError, OpId, OpKind, SemanticsLevel,
};

pub use atomic::verify_linearization;
pub use oracle::{brute_force_atomic, ORACLE_MAX_OPS};
pub use wait_free::{check_wait_free, AccessProfile, StepBudget};

/// A total order of one variable's operations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Linearization {
    pub var: Arc<str>,
    pub order: Vec<OpId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Witness {
    /// The offending operation and what went wrong.
    Violation { op: OpId, explanation: String },
    /// One linearization per checked variable.
    Linearizations(Vec<Linearization>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdict {
    pub pass: bool,
    pub witness: Option<Witness>,
}

impl Verdict {
    pub fn pass() -> Self {
        Self {
            pass: true,
            witness: None,
        }
    }

    pub fn pass_with(witness: Witness) -> Self {
        Self {
            pass: true,
            witness: Some(witness),
        }
    }

    pub fn fail(op: OpId, explanation: impl Into<String>) -> Self {
        Self {
            pass: false,
            witness: Some(Witness::Violation {
                op,
                explanation: explanation.into(),
            }),
        }
    }

    /// Operation named by a failing verdict.
    pub fn violating_op(&self) -> Option<OpId> {
        match &self.witness {
            Some(Witness::Violation { op, .. }) => Some(*op),
            _ => None,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(if self.pass { "pass" } else { "FAIL" })?;
        match &self.witness {
            Some(Witness::Violation { explanation, .. }) => write!(f, ": {explanation}"),
            Some(Witness::Linearizations(lins)) => {
                for lin in lins {
                    let order: Vec<String> = lin.order.iter().map(|o| o.to_string()).collect();
                    write!(f, "; {}: {}", lin.var, order.join(" "))?;
                }
                Ok(())
            }
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CheckError {
    #[error(transparent)]
    History(#[from] HistoryError),
    #[error("variable `{var}` has {ops} operations; the brute-force oracle handles at most {max}")]
    OracleTooLarge { var: String, ops: usize, max: usize },
    #[error("no step budget for {0} operations")]
    MissingBudget(OpKind),
    #[error("operation {0} is a {1}; register levels apply to Read/Write histories only")]
    NotRegisterOp(OpId, OpKind),
}

/// Variables that carry Read/Write operations.
fn rw_vars(h: &History) -> Vec<Arc<str>> {
    h.vars()
        .keys()
        .filter(|v| {
            h.ops_on(v)
                .any(|o| matches!(o.kind, OpKind::Read | OpKind::Write))
        })
        .cloned()
        .collect()
}

fn show_set(set: &FeasibleSet) -> String {
    match set {
        FeasibleSet::Domain(m) => format!("any value in 0..{m}"),
        FeasibleSet::Values(s) => {
            let vals: Vec<String> = s.iter().map(|v| v.to_string()).collect();
            format!("{{{}}}", vals.join(", "))
        }
    }
}

/// Checks every Read/Write variable of `h` at `level`.
///
/// Safe and regular are judged Read by Read through [`feasible_values`] and
/// only apply to single-writer variables. Atomic searches for a
/// linearization per variable; pending Writes may be placed or left out and
/// pending Reads are ignored. A failing verdict names the earliest (by
/// response step) Read that cannot be explained.
pub fn check_level(h: &History, level: SemanticsLevel) -> Result<Verdict, CheckError> {
    if let Some(op) = h.ops().iter().find(|o| !matches!(o.kind, OpKind::Read | OpKind::Write)) {
        return Err(CheckError::NotRegisterOp(op.id, op.kind));
    }
    let vars = rw_vars(h);
    if level == SemanticsLevel::Atomic {
        return check_atomic(h, &vars);
    }
    for var in &vars {
        if !h.vars()[var].is_single_writer() {
            return Err(HistoryError::MultiWriter(var.to_string()).into());
        }
    }
    let mut reads: Vec<_> = h
        .ops()
        .iter()
        .filter(|o| o.kind == OpKind::Read && o.is_complete())
        .filter(|o| vars.contains(&o.var))
        .collect();
    reads.sort_by_key(|o| (o.end, o.id));
    for r in reads {
        let allowed = feasible_values(h, r.id, level)?;
        let ret = r.ret_value().expect("completed read has a value");
        if !allowed.contains(ret) {
            return Ok(Verdict::fail(
                r.id,
                format!(
                    "read {} on `{}` returned {ret}; {level} allows {}",
                    r.id,
                    r.var,
                    show_set(&allowed)
                ),
            ));
        }
    }
    Ok(Verdict::pass())
}

fn check_atomic(h: &History, vars: &[Arc<str>]) -> Result<Verdict, CheckError> {
    let mut lins = Vec::with_capacity(vars.len());
    let mut worst: Option<(u64, OpId, String)> = None;
    for var in vars {
        match atomic::linearize(h, var) {
            Some(order) => lins.push(Linearization {
                var: var.clone(),
                order,
            }),
            None => {
                let (read, end) = atomic::earliest_inconsistent_read(h, var);
                let r = h.op(read).expect("read comes from the history");
                let text = format!(
                    "read {read} on `{var}` returned {}; no linearization of `{var}` up to step {end} explains it",
                    r.ret_value().expect("completed read")
                );
                if worst.as_ref().is_none_or(|(e, ..)| end < *e) {
                    worst = Some((end, read, text));
                }
            }
        }
    }
    Ok(match worst {
        Some((_, op, text)) => Verdict::fail(op, text),
        None => Verdict::pass_with(Witness::Linearizations(lins)),
    })
}

/// Highest level `h` satisfies, or `None` when even safe fails.
pub fn classify(h: &History) -> Result<Option<SemanticsLevel>, CheckError> {
    let mut best = None;
    for level in SemanticsLevel::ALL {
        if !check_level(h, level)?.pass {
            break;
        }
        best = Some(level);
    }
    Ok(best)
}

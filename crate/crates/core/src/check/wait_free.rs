use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{CheckError, Verdict};
use crate::history::OpKind;
use crate::sim::Execution;

/// Maximum base accesses allowed per high-level operation kind.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepBudget(BTreeMap<OpKind, u32>);

impl StepBudget {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, kind: OpKind, max_accesses: u32) -> Self {
        self.0.insert(kind, max_accesses);
        self
    }

    pub fn get(&self, kind: OpKind) -> Option<u32> {
        self.0.get(&kind).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (OpKind, u32)> + '_ {
        self.0.iter().map(|(k, v)| (*k, *v))
    }
}

/// Passes iff every completed high-level operation stayed within its budget.
pub fn check_wait_free(e: &Execution, budget: &StepBudget) -> Result<Verdict, CheckError> {
    for op in e.high_level_ops().filter(|o| o.end.is_some()) {
        let max = budget.get(op.kind).ok_or(CheckError::MissingBudget(op.kind))?;
        if op.accesses > max {
            return Ok(Verdict::fail(
                op.id,
                format!(
                    "{} {} by {} took {} base accesses, budget is {max}",
                    op.kind, op.id, op.proc, op.accesses
                ),
            ));
        }
    }
    Ok(Verdict::pass())
}

/// Smallest and largest base-access counts seen per operation kind.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessProfile {
    pub min: BTreeMap<OpKind, u32>,
    pub max: BTreeMap<OpKind, u32>,
}

impl AccessProfile {
    pub fn record(&mut self, e: &Execution) {
        for (kind, n) in e.access_counts() {
            let lo = self.min.entry(kind).or_insert(n);
            *lo = (*lo).min(n);
            let hi = self.max.entry(kind).or_insert(n);
            *hi = (*hi).max(n);
        }
    }

    pub fn merge(&mut self, other: &AccessProfile) {
        for (k, v) in &other.min {
            let lo = self.min.entry(*k).or_insert(*v);
            *lo = (*lo).min(*v);
        }
        for (k, v) in &other.max {
            let hi = self.max.entry(*k).or_insert(*v);
            *hi = (*hi).max(*v);
        }
    }

    /// `(min, max)` for one kind.
    pub fn range(&self, kind: OpKind) -> Option<(u32, u32)> {
        Some((*self.min.get(&kind)?, *self.max.get(&kind)?))
    }
}

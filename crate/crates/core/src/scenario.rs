//! Scenario files and enumeration reports.
//!
//! ```json
//! {"construction": "multiwriter", "n": 2, "base_semantics": "atomic",
//!  "workload": [[{"W": 1}], [{"W": 2}, "R"]],
//!  "mode": "enumerate", "seed": 0, "limits": {"max_executions": 1000000}}
//! ```
//!
//! For `regular_bit`, `multireader`, `multireader_nowriteback` and `direct`,
//! `n` counts readers and the workload lists the writer `p0` first. For
//! `multiwriter` and `cts`, `n` counts all processes.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::check::{check_level, check_wait_free, AccessProfile, CheckError, Verdict, Witness};
use crate::constructions::{
    build_direct, build_multireader, build_multireader_nowriteback, build_multiwriter,
    build_regular_bit, ConstructionError,
};
use crate::history::{History, OpId, OpKind, SemanticsLevel};
use crate::sim::{explore, extract_history, Execution, Limits, ProtocolSpec, Scope, SimError, Workload};
use crate::timestamp::{build_cts, check_cts, CtsError};
use crate::trace::serialize_trace_with_decisions;

pub const CONSTRUCTIONS: [&str; 6] = [
    "regular_bit",
    "multireader",
    "multireader_nowriteback",
    "multiwriter",
    "cts",
    "direct",
];

/// Trace lines kept in a report's counterexample excerpt.
pub const EXCERPT_LINES: usize = 40;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Enumerate,
    Random,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub construction: String,
    pub n: usize,
    /// Overrides the semantics of every base register.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_semantics: Option<SemanticsLevel>,
    pub workload: Workload,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub limits: Limits,
    /// Value domain of the high-level object; derived from the workload
    /// when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<u64>,
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid scenario: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unknown construction `{0}`")]
    UnknownConstruction(String),
    #[error(transparent)]
    Construction(#[from] ConstructionError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("{check} cannot be checked on this scenario: {reason}")]
    Unsupported { check: CheckTarget, reason: String },
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn domain(&self) -> u64 {
        if let Some(m) = self.domain {
            return m;
        }
        if self.construction == "regular_bit" {
            return 2;
        }
        let top = self
            .workload
            .iter()
            .flatten()
            .filter_map(|op| op.arg())
            .map(|v| v.0)
            .max()
            .unwrap_or(0);
        top.saturating_add(1).max(2)
    }

    pub fn protocol(&self) -> Result<ProtocolSpec, ScenarioError> {
        let m = self.domain();
        let base = self.base_semantics.unwrap_or(SemanticsLevel::Atomic);
        let spec = match self.construction.as_str() {
            "regular_bit" => build_regular_bit(self.n, m)?,
            "multireader" => build_multireader(self.n, m)?,
            "multireader_nowriteback" => build_multireader_nowriteback(self.n, m)?,
            "multiwriter" => build_multiwriter(self.n, m)?,
            "cts" => build_cts(self.n, m)?,
            "direct" => return Ok(build_direct(self.n, m, base)?),
            other => return Err(ScenarioError::UnknownConstruction(other.to_string())),
        };
        Ok(match self.base_semantics {
            Some(level) => spec.with_base_semantics(level),
            None => spec,
        })
    }
}

/// What each enumerated execution is judged against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckTarget {
    Safe,
    Regular,
    Atomic,
    /// The timestamp-system conditions.
    Cts,
}

impl CheckTarget {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Safe => "safe",
            Self::Regular => "regular",
            Self::Atomic => "atomic",
            Self::Cts => "cts",
        }
    }

    pub fn level(self) -> Option<SemanticsLevel> {
        match self {
            Self::Safe => Some(SemanticsLevel::Safe),
            Self::Regular => Some(SemanticsLevel::Regular),
            Self::Atomic => Some(SemanticsLevel::Atomic),
            Self::Cts => None,
        }
    }

    /// Checks the high-level history of one execution.
    pub fn check(self, h: &History) -> Result<Verdict, CheckTargetError> {
        match self.level() {
            Some(level) => Ok(check_level(h, level)?),
            None => Ok(check_cts(h)?),
        }
    }
}

impl From<SemanticsLevel> for CheckTarget {
    fn from(level: SemanticsLevel) -> Self {
        match level {
            SemanticsLevel::Safe => Self::Safe,
            SemanticsLevel::Regular => Self::Regular,
            SemanticsLevel::Atomic => Self::Atomic,
        }
    }
}

impl fmt::Display for CheckTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CheckTarget {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cts" => Ok(Self::Cts),
            _ => s.parse::<SemanticsLevel>().map(Self::from).map_err(|_| {
                format!("unknown check `{s}`, expected safe, regular, atomic or cts")
            }),
        }
    }
}

#[derive(Debug, Error)]
pub enum CheckTargetError {
    #[error(transparent)]
    Check(#[from] CheckError),
    #[error(transparent)]
    Cts(#[from] CtsError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub pass: u64,
    pub fail: u64,
}

impl Counts {
    fn add(&mut self, pass: bool) {
        if pass {
            self.pass += 1;
        } else {
            self.fail += 1;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counterexample {
    /// Position of the execution in enumeration order.
    pub execution: u64,
    /// Which check failed: the requested one or `wait_free`.
    pub check: String,
    pub op: Option<OpId>,
    pub explanation: String,
    /// Leading lines of the high-level trace.
    pub excerpt: Vec<String>,
    /// Where the full trace was written, if anywhere.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub scenario: ScenarioConfig,
    pub check: CheckTarget,
    pub executions: u64,
    pub truncated: bool,
    /// Pass/fail counts for the requested check and for `wait_free`; each
    /// entry sums to `executions`.
    pub verdicts: BTreeMap<String, Counts>,
    pub counterexample: Option<Counterexample>,
    /// Largest number of base accesses by one completed operation, per kind.
    pub max_base_accesses: BTreeMap<String, u32>,
}

impl Report {
    pub fn failed(&self) -> bool {
        self.verdicts.values().any(|c| c.fail > 0)
    }

    /// One line for a terminal.
    pub fn summary(&self) -> String {
        let mut parts = vec![format!(
            "{}: {} executions{}",
            self.scenario.construction,
            self.executions,
            if self.truncated { " (truncated)" } else { "" }
        )];
        for (name, c) in &self.verdicts {
            parts.push(format!("{name} {}/{} pass", c.pass, c.pass + c.fail));
        }
        let accesses: Vec<String> = self
            .max_base_accesses
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect();
        if !accesses.is_empty() {
            parts.push(format!("max base accesses {}", accesses.join(" ")));
        }
        parts.join(", ")
    }
}

/// A finished enumeration with the first failing execution, if any.
pub struct EnumerationOutcome {
    pub report: Report,
    /// Full high-level trace of the counterexample, with its decisions.
    pub counterexample_trace: Option<String>,
}

pub const WAIT_FREE: &str = "wait_free";

/// Enumerates the scenario's executions, checking each high-level history
/// against `check` and each execution against the construction's budget.
pub fn run_enumeration(
    cfg: &ScenarioConfig,
    check: CheckTarget,
    limits: Limits,
) -> Result<EnumerationOutcome, ScenarioError> {
    let spec = cfg.protocol()?;
    let mut counts = Counts::default();
    let mut wait_free = Counts::default();
    let mut profile = AccessProfile::default();
    let mut first: Option<(Counterexample, String)> = None;
    let mut failure: Option<CheckTargetError> = None;
    let mut index = 0u64;
    let stats = explore(&spec, &cfg.workload, limits, |e: Execution| {
        if failure.is_some() {
            return;
        }
        let h = extract_history(&e, Scope::HighLevel);
        let verdict = match check.check(&h) {
            Ok(v) => v,
            Err(err) => {
                failure = Some(err);
                return;
            }
        };
        let budget = match check_wait_free(&e, &spec.budget) {
            Ok(v) => v,
            Err(err) => {
                failure = Some(err.into());
                return;
            }
        };
        counts.add(verdict.pass);
        wait_free.add(budget.pass);
        profile.record(&e);
        if first.is_none() {
            let failed = [(check.as_str(), &verdict), (WAIT_FREE, &budget)]
                .into_iter()
                .find(|(_, v)| !v.pass);
            if let Some((name, v)) = failed {
                let trace = serialize_trace_with_decisions(&h, &e.decisions);
                let (op, explanation) = match &v.witness {
                    Some(Witness::Violation { op, explanation }) => (Some(*op), explanation.clone()),
                    _ => (None, String::new()),
                };
                let excerpt = trace.lines().take(EXCERPT_LINES).map(String::from).collect();
                first = Some((
                    Counterexample {
                        execution: index,
                        check: name.to_string(),
                        op,
                        explanation,
                        excerpt,
                        path: None,
                    },
                    trace,
                ));
            }
        }
        index += 1;
    })?;
    if let Some(err) = failure {
        return Err(ScenarioError::Unsupported {
            check,
            reason: err.to_string(),
        });
    }
    let (counterexample, counterexample_trace) = match first {
        Some((c, t)) => (Some(c), Some(t)),
        None => (None, None),
    };
    let report = Report {
        scenario: cfg.clone(),
        check,
        executions: stats.executions,
        truncated: stats.truncated,
        verdicts: BTreeMap::from([
            (check.as_str().to_string(), counts),
            (WAIT_FREE.to_string(), wait_free),
        ]),
        counterexample,
        max_base_accesses: profile
            .max
            .iter()
            .map(|(k, v): (&OpKind, &u32)| (k.code().to_string(), *v))
            .collect(),
    };
    Ok(EnumerationOutcome {
        report,
        counterexample_trace,
    })
}

//! Simulation and verification of wait-free shared register constructions.
//!
//! - [`history`] and [`trace`]: operation records, precedence, and the JSON
//!   Lines trace format.
//! - [`check`]: safe / regular / atomic checkers, a brute-force atomicity
//!   oracle, and wait-freedom budgets.
//! - [`sim`]: a deterministic engine that runs constructions over weak base
//!   registers under full control of the schedule and of the adversary.
//! - [`constructions`] and [`timestamp`]: the shipped protocols.
//! - [`scenario`]: scenario files and enumeration reports.

pub mod check;
pub mod constructions;
pub mod gen;
pub mod history;
pub mod scenario;
pub mod sim;
pub mod tag;
pub mod timestamp;
pub mod trace;

pub use check::{brute_force_atomic, check_level, check_wait_free, classify, StepBudget, Verdict};
pub use history::{
    feasible_values, precedes, History, OpId, OpKind, OpRecord, Output, ProcessId, SemanticsLevel,
    Step, Value, VarDecl,
};
pub use sim::{
    enumerate_executions, explore, extract_history, random_execution, run_schedule, Decision,
    Execution, Invocation, Limits, ProtocolSpec, Scope, Workload,
};
pub use tag::Tag;
pub use trace::{parse_trace, serialize_trace};

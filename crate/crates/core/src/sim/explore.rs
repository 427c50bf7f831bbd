use serde::{Deserialize, Serialize};

use super::engine::Sim;
use super::{Execution, ProtocolSpec, SimError, Workload};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Limits {
    pub max_executions: u64,
    /// Longest execution, in logged events.
    pub max_steps: u64,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            max_executions: 1_000_000,
            max_steps: 10_000,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ExploreStats {
    pub executions: u64,
    /// Some part of the decision tree was not visited.
    pub truncated: bool,
}

#[derive(Debug, Clone)]
pub struct Enumeration {
    pub executions: Vec<Execution>,
    pub truncated: bool,
}

struct Walk<'v> {
    limits: Limits,
    stats: ExploreStats,
    stop: bool,
    visit: &'v mut dyn FnMut(Execution),
}

/// Depth-first walk over every interleaving and every adversary value
/// choice, calling `visit` on each complete execution in a fixed order.
pub fn explore(
    spec: &ProtocolSpec,
    workload: &Workload,
    limits: Limits,
    mut visit: impl FnMut(Execution),
) -> Result<ExploreStats, SimError> {
    let root = Sim::new(spec, workload)?;
    let mut walk = Walk {
        limits,
        stats: ExploreStats::default(),
        stop: false,
        visit: &mut visit,
    };
    dfs(root, &mut walk)?;
    Ok(walk.stats)
}

fn dfs(mut sim: Sim<'_>, walk: &mut Walk<'_>) -> Result<(), SimError> {
    loop {
        if walk.stop {
            return Ok(());
        }
        if sim.is_done() {
            if walk.stats.executions >= walk.limits.max_executions {
                walk.stats.truncated = true;
                walk.stop = true;
            } else {
                walk.stats.executions += 1;
                (walk.visit)(sim.into_execution());
            }
            return Ok(());
        }
        if sim.steps() >= walk.limits.max_steps {
            walk.stats.truncated = true;
            return Ok(());
        }
        let mut choices = sim.decisions_here()?;
        let last = choices.pop().expect("an unfinished execution has a next decision");
        for d in choices {
            let mut child = sim.clone();
            child.apply(d)?;
            dfs(child, walk)?;
        }
        sim.apply(last)?;
    }
}

/// Collects every execution of the decision tree, or as many as the limits
/// allow.
pub fn enumerate_executions(
    spec: &ProtocolSpec,
    workload: &Workload,
    limits: Limits,
) -> Result<Enumeration, SimError> {
    let mut executions = Vec::new();
    let stats = explore(spec, workload, limits, |e| executions.push(e))?;
    Ok(Enumeration {
        executions,
        truncated: stats.truncated,
    })
}

use std::collections::BTreeMap;

use super::{Execution, Target};
use crate::history::{History, OpRecord, VarDecl};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scope {
    /// One record per operation on the implemented object.
    HighLevel,
    /// One record per base register access.
    BaseLevel,
}

/// Projects an execution onto the operations of one scope.
pub fn extract_history(e: &Execution, scope: Scope) -> History {
    let layout = &e.layout;
    let vars: BTreeMap<_, _> = match scope {
        Scope::HighLevel => {
            BTreeMap::from([(layout.object.var.clone(), layout.object.decl.clone())])
        }
        Scope::BaseLevel => layout
            .registers
            .iter()
            .map(|r| {
                let decl = VarDecl::new(r.domain, r.init, [r.owner], r.readers.iter().copied());
                (r.name.clone(), decl)
            })
            .collect(),
    };
    let ops = e
        .ops
        .iter()
        .filter_map(|o| {
            let var = match (scope, o.target) {
                (Scope::HighLevel, Target::Object) => layout.object.var.clone(),
                (Scope::BaseLevel, Target::Register(r)) => layout.registers[r.0].name.clone(),
                _ => return None,
            };
            Some(OpRecord {
                id: o.id,
                proc: o.proc,
                var,
                kind: o.kind,
                arg: o.arg,
                ret: o.ret.clone(),
                start: o.start,
                end: o.end,
            })
        })
        .collect();
    History::new(vars, ops).expect("engine executions project to valid histories")
}

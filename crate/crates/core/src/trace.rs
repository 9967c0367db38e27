//! Trace events and replay.
//!
//! Every mutating operation appends one [`TraceEvent`]. Operations are
//! deterministic in their arguments and cluster ids are allocated from a
//! counter, so replaying a trace onto the graph it started from reproduces
//! the final graph exactly.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::graph::{ClusterGraph, ClusterId};
use crate::incremental;
use crate::network::VarId;
use crate::transforms;

/// The transformation catalog.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformKind {
    Merge,
    StealAnEdge,
    Slide,
    Drop,
    Collapse,
    Eliminate,
    DropSpurious,
    AddFillArc,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Operation {
    Merge { p: ClusterId, q: ClusterId },
    /// Merge of a cluster into an adjacent superset, without spurious cleanup.
    Absorb { p: ClusterId, q: ClusterId },
    StealAnEdge { p: ClusterId, q: ClusterId, via: ClusterId },
    Slide { p: ClusterId, q: ClusterId, via: ClusterId },
    Drop { p: ClusterId, q: ClusterId, via: ClusterId },
    Collapse { cycle: Vec<ClusterId>, victim: (ClusterId, ClusterId) },
    Eliminate { var: VarId, scope: Vec<ClusterId> },
    DropSpurious { seeds: Option<Vec<ClusterId>> },
    AddFillArc { x: VarId, y: VarId },
    NormalizeSeparators,
    AddVariable { name: String, cardinality: u32 },
    AddArc { parent: VarId, child: VarId },
    DeleteArc { parent: VarId, child: VarId, policy: incremental::RetractPolicy },
    RetractVariable { cluster: ClusterId, var: VarId, shape: incremental::RetractShape },
    DeleteVariable { var: VarId },
}

impl Operation {
    pub fn transform_kind(&self) -> Option<TransformKind> {
        Some(match self {
            Operation::Merge { .. } | Operation::Absorb { .. } => TransformKind::Merge,
            Operation::StealAnEdge { .. } => TransformKind::StealAnEdge,
            Operation::Slide { .. } => TransformKind::Slide,
            Operation::Drop { .. } => TransformKind::Drop,
            Operation::Collapse { .. } => TransformKind::Collapse,
            Operation::Eliminate { .. } => TransformKind::Eliminate,
            Operation::DropSpurious { .. } => TransformKind::DropSpurious,
            Operation::AddFillArc { .. } => TransformKind::AddFillArc,
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Operation::Merge { .. } => "merge",
            Operation::Absorb { .. } => "absorb",
            Operation::StealAnEdge { .. } => "steal_an_edge",
            Operation::Slide { .. } => "slide",
            Operation::Drop { .. } => "drop",
            Operation::Collapse { .. } => "collapse",
            Operation::Eliminate { .. } => "eliminate",
            Operation::DropSpurious { .. } => "drop_spurious",
            Operation::AddFillArc { .. } => "add_fill_arc",
            Operation::NormalizeSeparators => "normalize_separators",
            Operation::AddVariable { .. } => "add_variable",
            Operation::AddArc { .. } => "add_arc",
            Operation::DeleteArc { .. } => "delete_arc",
            Operation::RetractVariable { .. } => "retract_variable",
            Operation::DeleteVariable { .. } => "delete_variable",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub seq: u64,
    pub op: Operation,
    /// Change in total graph cost caused by this event.
    pub cost_delta: i128,
}

/// Applies one operation, recording it like a direct call would.
pub fn apply_operation(graph: &mut ClusterGraph, op: &Operation) -> Result<()> {
    match op {
        Operation::Merge { p, q } => transforms::merge(graph, *p, *q).map(drop),
        Operation::Absorb { p, q } => transforms::absorb(graph, *p, *q).map(drop),
        Operation::StealAnEdge { p, q, via } => transforms::steal_an_edge(graph, *p, *q, *via),
        Operation::Slide { p, q, via } => transforms::slide(graph, *p, *q, *via),
        Operation::Drop { p, q, via } => transforms::drop_edge(graph, *p, *q, Some(*via)).map(drop),
        Operation::Collapse { cycle, victim } => transforms::collapse(graph, cycle, *victim),
        Operation::Eliminate { var, scope } => {
            let scope = scope.iter().copied().collect();
            transforms::eliminate(graph, *var, &scope).map(drop)
        }
        Operation::DropSpurious { seeds } => {
            let seeds = seeds.as_ref().map(|s| s.iter().copied().collect());
            transforms::drop_spurious(graph, seeds.as_ref());
            Ok(())
        }
        Operation::AddFillArc { x, y } => transforms::add_fill_arc(graph, *x, *y).map(drop),
        Operation::NormalizeSeparators => {
            transforms::normalize_separators(graph);
            Ok(())
        }
        Operation::AddVariable { name, cardinality } => {
            incremental::add_variable(graph, name, *cardinality).map(drop)
        }
        Operation::AddArc { parent, child } => incremental::add_arc(graph, *parent, *child).map(drop),
        Operation::DeleteArc { parent, child, policy } => {
            incremental::delete_arc(graph, *parent, *child, *policy).map(drop)
        }
        Operation::RetractVariable { cluster, var, shape } => {
            incremental::retract_variable(graph, *cluster, *var, *shape).map(drop)
        }
        Operation::DeleteVariable { var } => incremental::delete_variable(graph, *var).map(drop),
    }
}

/// Replays `events` onto `start` and returns the resulting graph.
pub fn replay(mut start: ClusterGraph, events: &[TraceEvent]) -> Result<ClusterGraph> {
    for ev in events {
        apply_operation(&mut start, &ev.op)?;
    }
    Ok(start)
}

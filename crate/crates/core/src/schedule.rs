//! Operation durations and ASAP timing of shuttle/gate op lists.
//!
//! Durations are configured in microseconds and converted once to integer nanoseconds, so
//! every downstream sum is exact.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{GateId, Qudit};
use crate::graph::PositionId;

#[derive(Debug, Error, PartialEq)]
pub enum ScheduleError {
    #[error("duration for {0} must be positive and finite")]
    NonPositiveDuration(&'static str),
    #[error("op {index} ({kind:?}) is malformed: {reason}")]
    Malformed {
        index: usize,
        kind: OpKind,
        reason: &'static str,
    },
}

/// Per-kind durations in microseconds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperationDurations {
    #[serde(rename = "move")]
    pub moving: f64,
    pub split: f64,
    pub merge: f64,
    pub swap: f64,
    pub one_qudit_gate: f64,
    pub two_qudit_gate: f64,
}

impl Default for OperationDurations {
    fn default() -> Self {
        Self {
            moving: 5.0,
            split: 80.0,
            merge: 80.0,
            swap: 40.0,
            one_qudit_gate: 5.0,
            two_qudit_gate: 100.0,
        }
    }
}

fn to_ns(us: f64) -> u64 {
    (us * 1000.0).round() as u64
}

impl OperationDurations {
    pub fn validate(&self) -> Result<(), ScheduleError> {
        for (name, v) in [
            ("move", self.moving),
            ("split", self.split),
            ("merge", self.merge),
            ("swap", self.swap),
            ("one_qudit_gate", self.one_qudit_gate),
            ("two_qudit_gate", self.two_qudit_gate),
        ] {
            if !(v.is_finite() && v > 0.0 && to_ns(v) > 0) {
                return Err(ScheduleError::NonPositiveDuration(name));
            }
        }
        Ok(())
    }

    pub fn move_ns(&self) -> u64 {
        to_ns(self.moving)
    }

    pub fn split_ns(&self) -> u64 {
        to_ns(self.split)
    }

    pub fn merge_ns(&self) -> u64 {
        to_ns(self.merge)
    }

    pub fn swap_ns(&self) -> u64 {
        to_ns(self.swap)
    }

    pub fn gate_ns(&self, arity: usize) -> u64 {
        if arity <= 1 {
            to_ns(self.one_qudit_gate)
        } else {
            to_ns(self.two_qudit_gate)
        }
    }

    pub fn duration_ns(&self, op: &Op) -> u64 {
        match op.kind {
            OpKind::Move => self.move_ns(),
            OpKind::Split => self.split_ns(),
            OpKind::Merge => self.merge_ns(),
            OpKind::Swap => self.swap_ns(),
            OpKind::Gate => self.gate_ns(op.ions.len()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpKind {
    /// Segment to segment.
    Move,
    /// Trap slot to segment.
    Split,
    /// Segment to trap slot.
    Merge,
    /// Exchange of two positions along a swap edge; either may be empty.
    Swap,
    Gate,
}

/// An untimed operation. For movement ops `positions` is `[from, to]`; for a swap the
/// `ions` list holds the occupants of `[a, b]` that exist, in that order; for a gate
/// `positions[i]` holds `ions[i]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Op {
    pub kind: OpKind,
    pub positions: Vec<PositionId>,
    pub ions: Vec<Qudit>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gate: Option<GateId>,
}

impl Op {
    pub fn movement(kind: OpKind, ion: Qudit, from: PositionId, to: PositionId) -> Self {
        Self {
            kind,
            positions: vec![from, to],
            ions: vec![ion],
            gate: None,
        }
    }

    pub fn swap(a: PositionId, b: PositionId, ions: Vec<Qudit>) -> Self {
        Self {
            kind: OpKind::Swap,
            positions: vec![a, b],
            ions,
            gate: None,
        }
    }

    pub fn gate(gate: GateId, ions: Vec<Qudit>, positions: Vec<PositionId>) -> Self {
        Self {
            kind: OpKind::Gate,
            positions,
            ions,
            gate: Some(gate),
        }
    }

    fn check(&self, index: usize) -> Result<(), ScheduleError> {
        let bad = |reason| {
            Err(ScheduleError::Malformed {
                index,
                kind: self.kind,
                reason,
            })
        };
        match self.kind {
            OpKind::Move | OpKind::Split | OpKind::Merge => {
                if self.positions.len() != 2 || self.ions.len() != 1 {
                    return bad("movement needs two positions and one ion");
                }
            }
            OpKind::Swap => {
                if self.positions.len() != 2 || self.ions.len() > 2 {
                    return bad("swap needs two positions and at most two ions");
                }
            }
            OpKind::Gate => {
                if self.gate.is_none() || self.ions.is_empty() {
                    return bad("gate needs an id and at least one ion");
                }
                if self.positions.len() != self.ions.len() {
                    return bad("gate needs one position per ion");
                }
            }
        }
        if self.kind != OpKind::Gate && self.gate.is_some() {
            return bad("only gates carry a gate id");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimedOp {
    #[serde(flatten)]
    pub op: Op,
    pub start_ns: u64,
    pub duration_ns: u64,
}

impl TimedOp {
    pub fn end_ns(&self) -> u64 {
        self.start_ns + self.duration_ns
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub ops: Vec<TimedOp>,
    pub makespan_ns: u64,
    pub serial_ns: u64,
}

impl Schedule {
    /// Total operation time in microseconds (the makespan).
    pub fn total_operation_time(&self) -> f64 {
        self.makespan_ns as f64 / 1000.0
    }

    /// Sum of every op's duration in microseconds.
    pub fn serial_operation_time(&self) -> f64 {
        self.serial_ns as f64 / 1000.0
    }

    pub fn count(&self, kind: OpKind) -> usize {
        self.ops.iter().filter(|t| t.op.kind == kind).count()
    }

    pub fn untimed(&self) -> Vec<Op> {
        self.ops.iter().map(|t| t.op.clone()).collect()
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
enum Resource {
    Ion(Qudit),
    Position(PositionId),
}

/// ASAP timing: each op starts once every ion and position it touches is released by the
/// ops before it in sequence order.
pub fn assign_times(ops: &[Op], durations: &OperationDurations) -> Result<Schedule, ScheduleError> {
    durations.validate()?;
    let mut ready: HashMap<Resource, u64> = HashMap::new();
    let mut timed = Vec::with_capacity(ops.len());
    let mut makespan = 0;
    let mut serial = 0;
    for (index, op) in ops.iter().enumerate() {
        op.check(index)?;
        let resources = op
            .ions
            .iter()
            .map(|&q| Resource::Ion(q))
            .chain(op.positions.iter().map(|&p| Resource::Position(p)));
        let start = resources
            .clone()
            .map(|r| ready.get(&r).copied().unwrap_or(0))
            .max()
            .unwrap_or(0);
        let duration = durations.duration_ns(op);
        let end = start + duration;
        for r in resources {
            ready.insert(r, end);
        }
        makespan = makespan.max(end);
        serial += duration;
        timed.push(TimedOp {
            op: op.clone(),
            start_ns: start,
            duration_ns: duration,
        });
    }
    Ok(Schedule {
        ops: timed,
        makespan_ns: makespan,
        serial_ns: serial,
    })
}

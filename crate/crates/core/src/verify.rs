//! Replay checkers for compiled artifacts. Each re-simulates the op list from the initial
//! placement and reports the first op that breaks a rule.

use std::collections::HashMap;
use std::fmt;

use crate::circuit::{CircuitDag, GateId, Qudit};
use crate::graph::{Capabilities, EdgeCapability, Placement, PositionGraph, PositionId, Region};
use crate::sabre::{CompiledCircuit, SabreOp};
use crate::schedule::{Op, OpKind, OperationDurations, Schedule};
use crate::shaw::{induced_exec_connected, ShuttleCircuit};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    /// Index of the offending op; the op count for end-of-run checks.
    pub index: usize,
    pub reason: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "op {}: {}", self.index, self.reason)
    }
}

impl std::error::Error for Violation {}

fn fail<T>(index: usize, reason: impl Into<String>) -> Result<T, Violation> {
    Err(Violation {
        index,
        reason: reason.into(),
    })
}

struct GateTracker<'a> {
    dag: &'a CircuitDag,
    done: Vec<bool>,
}

impl<'a> GateTracker<'a> {
    fn new(dag: &'a CircuitDag) -> Self {
        Self {
            dag,
            done: vec![false; dag.len()],
        }
    }

    /// Check operands, locations and dependencies of a gate firing at `positions`.
    fn fire(
        &mut self,
        graph: &PositionGraph,
        placement: &Placement,
        index: usize,
        gate: GateId,
        ions: Option<&[Qudit]>,
        positions: &[PositionId],
    ) -> Result<(), Violation> {
        if gate >= self.dag.len() {
            return fail(index, format!("unknown gate {gate}"));
        }
        if self.done[gate] {
            return fail(index, format!("gate {gate} executed twice"));
        }
        if let Some(p) = self.dag.preds(gate).iter().find(|&&p| !self.done[p]) {
            return fail(index, format!("gate {gate} fires before its predecessor {p}"));
        }
        let operands = &self.dag.gate(gate).operands;
        if ions.is_some_and(|ions| ions != operands.as_slice()) {
            return fail(index, format!("gate {gate} lists the wrong ions"));
        }
        if positions.len() != operands.len() {
            return fail(index, format!("gate {gate} lists the wrong number of positions"));
        }
        for (&q, &p) in operands.iter().zip(positions) {
            if placement.position_of(q) != Some(p) {
                return fail(index, format!("gate {gate}: qudit {q} is not at {p}"));
            }
        }
        if operands.len() >= 2 && !induced_exec_connected(graph, positions) {
            return fail(
                index,
                format!("gate {gate}: operands are not connected by execute edges"),
            );
        }
        self.done[gate] = true;
        Ok(())
    }

    fn finish(&self, index: usize) -> Result<(), Violation> {
        match self.done.iter().position(|d| !d) {
            Some(g) => fail(index, format!("gate {g} never executed")),
            None => Ok(()),
        }
    }
}

fn check_placement(
    graph: &PositionGraph,
    dag: &CircuitDag,
    placement: &Placement,
) -> Result<(), Violation> {
    if placement.num_positions() != graph.num_positions() {
        return fail(0, "initial placement is for a different architecture");
    }
    if placement.num_qudits() != dag.num_qudits() || !placement.is_consistent() {
        return fail(0, "initial placement does not place every qudit once");
    }
    if (0..dag.num_qudits()).any(|q| placement.position_of(q).is_none()) {
        return fail(0, "initial placement leaves a qudit unplaced");
    }
    Ok(())
}

fn edge(
    graph: &PositionGraph,
    index: usize,
    a: PositionId,
    b: PositionId,
) -> Result<Capabilities, Violation> {
    if a.index() >= graph.num_positions() || b.index() >= graph.num_positions() {
        return fail(index, format!("position out of range in {a}-{b}"));
    }
    match graph.edge_caps(a, b) {
        Some(c) => Ok(c),
        None => fail(index, format!("{a} and {b} are not adjacent")),
    }
}

/// Replay a swap-routed circuit.
pub fn replay_sabre(
    graph: &PositionGraph,
    dag: &CircuitDag,
    circuit: &CompiledCircuit,
) -> Result<(), Violation> {
    check_placement(graph, dag, &circuit.initial_placement)?;
    let mut placement = circuit.initial_placement.clone();
    let mut gates = GateTracker::new(dag);
    for (index, op) in circuit.ops.iter().enumerate() {
        match op {
            SabreOp::Swap { a, b } => {
                if !edge(graph, index, *a, *b)?.contains(EdgeCapability::Swap) {
                    return fail(index, format!("{a}-{b} has no swap capability"));
                }
                placement.swap_unchecked(*a, *b);
            }
            SabreOp::Gate { gate, positions } => {
                gates.fire(graph, &placement, index, *gate, None, positions)?;
            }
        }
    }
    gates.finish(circuit.ops.len())?;
    if placement != circuit.final_placement {
        return fail(circuit.ops.len(), "final placement does not match the replay");
    }
    Ok(())
}

fn replay_op(
    graph: &PositionGraph,
    placement: &mut Placement,
    gates: &mut GateTracker,
    index: usize,
    op: &Op,
) -> Result<(), Violation> {
    let check_len = |n: usize| {
        if op.positions.len() == n {
            Ok(())
        } else {
            fail(index, format!("{:?} needs {n} positions", op.kind))
        }
    };
    match op.kind {
        OpKind::Move | OpKind::Split | OpKind::Merge => {
            check_len(2)?;
            let (from, to) = (op.positions[0], op.positions[1]);
            let caps = edge(graph, index, from, to)?;
            if !(caps.contains(EdgeCapability::MergeSplit) || caps.contains(EdgeCapability::Move))
            {
                return fail(index, format!("{from}-{to} carries no shuttling capability"));
            }
            let expected = match (graph.region(from), graph.region(to)) {
                (Region::Slot { .. }, Region::Transport) => OpKind::Split,
                (Region::Transport, Region::Slot { .. }) => OpKind::Merge,
                _ => OpKind::Move,
            };
            if op.kind != expected {
                return fail(index, format!("{from}-{to} is a {expected:?}, not a {:?}", op.kind));
            }
            let [ion] = op.ions[..] else {
                return fail(index, "movement carries exactly one ion");
            };
            if placement.occupant(from) != Some(ion) {
                return fail(index, format!("ion {ion} is not at {from}"));
            }
            if let Some(other) = placement.occupant(to) {
                return fail(index, format!("{to} already holds ion {other}"));
            }
            placement
                .apply_move(graph, ion, to)
                .map_err(|e| Violation {
                    index,
                    reason: e.to_string(),
                })?;
        }
        OpKind::Swap => {
            check_len(2)?;
            let (a, b) = (op.positions[0], op.positions[1]);
            if !edge(graph, index, a, b)?.contains(EdgeCapability::Swap) {
                return fail(index, format!("{a}-{b} has no swap capability"));
            }
            let present: Vec<Qudit> = [placement.occupant(a), placement.occupant(b)]
                .into_iter()
                .flatten()
                .collect();
            if present != op.ions {
                return fail(index, format!("swap {a}-{b} lists ions {:?}, found {present:?}", op.ions));
            }
            placement.swap_unchecked(a, b);
        }
        OpKind::Gate => {
            let Some(gate) = op.gate else {
                return fail(index, "gate op without a gate id");
            };
            for &p in &op.positions {
                if p.index() >= graph.num_positions()
                    || !matches!(graph.region(p), Region::Slot { .. })
                {
                    return fail(index, format!("gate {gate} fires outside a trap at {p}"));
                }
            }
            gates.fire(graph, placement, index, gate, Some(&op.ions), &op.positions)?;
        }
    }
    if op.kind != OpKind::Gate && op.gate.is_some() {
        return fail(index, "only gates carry a gate id");
    }
    Ok(())
}

/// Replay an untimed shuttle op list.
pub fn replay_ops(
    graph: &PositionGraph,
    dag: &CircuitDag,
    initial: &Placement,
    ops: &[Op],
    final_placement: &Placement,
) -> Result<(), Violation> {
    check_placement(graph, dag, initial)?;
    let mut placement = initial.clone();
    let mut gates = GateTracker::new(dag);
    for (index, op) in ops.iter().enumerate() {
        replay_op(graph, &mut placement, &mut gates, index, op)?;
    }
    gates.finish(ops.len())?;
    if &placement != final_placement {
        return fail(ops.len(), "final placement does not match the replay");
    }
    Ok(())
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
enum Resource {
    Ion(Qudit),
    Position(PositionId),
}

/// Check durations, totals, and that no ion or position is used by two ops at once.
pub fn check_timing(
    schedule: &Schedule,
    durations: Option<&OperationDurations>,
) -> Result<(), Violation> {
    let mut busy_until: HashMap<Resource, u64> = HashMap::new();
    let mut makespan = 0;
    let mut serial = 0;
    for (index, t) in schedule.ops.iter().enumerate() {
        if let Some(d) = durations {
            let want = d.duration_ns(&t.op);
            if t.duration_ns != want {
                return fail(index, format!("duration {} ns, expected {want} ns", t.duration_ns));
            }
        }
        let resources = t
            .op
            .ions
            .iter()
            .map(|&q| Resource::Ion(q))
            .chain(t.op.positions.iter().map(|&p| Resource::Position(p)));
        for r in resources {
            let free_at = busy_until.get(&r).copied().unwrap_or(0);
            if t.start_ns < free_at {
                return fail(index, "starts before an earlier op releases its ion or position");
            }
            busy_until.insert(r, t.end_ns());
        }
        makespan = makespan.max(t.end_ns());
        serial += t.duration_ns;
    }
    let n = schedule.ops.len();
    if schedule.makespan_ns != makespan {
        return fail(n, format!("makespan {} ns, ops end at {makespan} ns", schedule.makespan_ns));
    }
    if schedule.serial_ns != serial {
        return fail(n, format!("serial time {} ns, ops sum to {serial} ns", schedule.serial_ns));
    }
    Ok(())
}

/// Full replay of a timed shuttle artifact.
pub fn replay_shuttle(
    graph: &PositionGraph,
    dag: &CircuitDag,
    circuit: &ShuttleCircuit,
    durations: Option<&OperationDurations>,
) -> Result<(), Violation> {
    let ops = circuit.schedule.untimed();
    replay_ops(
        graph,
        dag,
        &circuit.initial_placement,
        &ops,
        &circuit.final_placement,
    )?;
    check_timing(&circuit.schedule, durations)
}

//! Gate lists, the dependency DAG and the frontier queries shared by every router.

mod qasm;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use qasm::{parse_qasm, to_qasm, QasmError};

/// Index of a logical qudit in a circuit.
pub type Qudit = usize;

/// Identifier of a gate; equal to its position in [`CircuitDag::gates`].
pub type GateId = usize;

#[derive(Debug, Error, PartialEq)]
pub enum CircuitError {
    #[error("gate {gate} has no operands")]
    NoOperands { gate: GateId },
    #[error("gate {gate} repeats operand {qudit}")]
    DuplicateOperand { gate: GateId, qudit: Qudit },
    #[error("gate {gate} addresses qudit {qudit} but the circuit has {num_qudits}")]
    OperandOutOfRange {
        gate: GateId,
        qudit: Qudit,
        num_qudits: usize,
    },
    #[error("gate {gate} is marked executed but its predecessor {pred} is not")]
    NotDownwardClosed { gate: GateId, pred: GateId },
    #[error("unknown gate id {0}")]
    UnknownGate(GateId),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub id: GateId,
    pub kind: String,
    pub operands: Vec<Qudit>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub params: Vec<f64>,
}

impl Gate {
    pub fn arity(&self) -> usize {
        self.operands.len()
    }

    pub fn is_multi_qudit(&self) -> bool {
        self.operands.len() >= 2
    }
}

/// An immutable circuit with last-writer-per-qudit dependency edges.
///
/// Gate `g` depends on the most recent earlier gate acting on each of its operands, so the
/// dependency relation is acyclic by construction and consistent with program order.
#[derive(Clone, Debug, PartialEq)]
pub struct CircuitDag {
    num_qudits: usize,
    gates: Vec<Gate>,
    preds: Vec<Vec<GateId>>,
    succs: Vec<Vec<GateId>>,
}

impl CircuitDag {
    /// Build a DAG from `(kind, operands, params)` triples given in program order.
    pub fn new<I, S>(num_qudits: usize, gates: I) -> Result<Self, CircuitError>
    where
        I: IntoIterator<Item = (S, Vec<Qudit>, Vec<f64>)>,
        S: Into<String>,
    {
        let gates = gates
            .into_iter()
            .enumerate()
            .map(|(id, (kind, operands, params))| Gate {
                id,
                kind: kind.into(),
                operands,
                params,
            })
            .collect();
        Self::from_gates(num_qudits, gates)
    }

    /// Build a DAG from gates whose ids must equal their index.
    pub fn from_gates(num_qudits: usize, mut gates: Vec<Gate>) -> Result<Self, CircuitError> {
        let mut last_on_qudit: Vec<Option<GateId>> = vec![None; num_qudits];
        let mut preds = Vec::with_capacity(gates.len());
        let mut succs: Vec<Vec<GateId>> = vec![Vec::new(); gates.len()];
        for (index, gate) in gates.iter_mut().enumerate() {
            gate.id = index;
            if gate.operands.is_empty() {
                return Err(CircuitError::NoOperands { gate: index });
            }
            for (i, &q) in gate.operands.iter().enumerate() {
                if q >= num_qudits {
                    return Err(CircuitError::OperandOutOfRange {
                        gate: index,
                        qudit: q,
                        num_qudits,
                    });
                }
                if gate.operands[..i].contains(&q) {
                    return Err(CircuitError::DuplicateOperand {
                        gate: index,
                        qudit: q,
                    });
                }
            }
            let mut mine: Vec<GateId> = gate
                .operands
                .iter()
                .filter_map(|&q| last_on_qudit[q])
                .collect();
            mine.sort_unstable();
            mine.dedup();
            for &p in &mine {
                succs[p].push(index);
            }
            preds.push(mine);
            for &q in &gate.operands {
                last_on_qudit[q] = Some(index);
            }
        }
        Ok(Self {
            num_qudits,
            gates,
            preds,
            succs,
        })
    }

    pub fn num_qudits(&self) -> usize {
        self.num_qudits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn gate(&self, id: GateId) -> &Gate {
        &self.gates[id]
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn preds(&self, id: GateId) -> &[GateId] {
        &self.preds[id]
    }

    pub fn succs(&self, id: GateId) -> &[GateId] {
        &self.succs[id]
    }

    pub fn max_arity(&self) -> usize {
        self.gates.iter().map(Gate::arity).max().unwrap_or(0)
    }

    /// Number of gates with two or more operands.
    pub fn multi_qudit_count(&self) -> usize {
        self.gates.iter().filter(|g| g.is_multi_qudit()).count()
    }

    /// The same circuit with program order reversed. Gate `i` of the result is gate
    /// `len - 1 - i` of `self`.
    pub fn reversed(&self) -> CircuitDag {
        let gates = self.gates.iter().rev().cloned().collect();
        Self::from_gates(self.num_qudits, gates).expect("reversing a valid circuit stays valid")
    }

    /// Gates that are not executed and whose predecessors all are.
    pub fn front_layer(
        &self,
        executed: &BTreeSet<GateId>,
    ) -> Result<BTreeSet<GateId>, CircuitError> {
        for &g in executed {
            if g >= self.gates.len() {
                return Err(CircuitError::UnknownGate(g));
            }
            if let Some(&pred) = self.preds[g].iter().find(|p| !executed.contains(p)) {
                return Err(CircuitError::NotDownwardClosed { gate: g, pred });
            }
        }
        Ok((0..self.gates.len())
            .filter(|g| !executed.contains(g))
            .filter(|&g| self.preds[g].iter().all(|p| executed.contains(p)))
            .collect())
    }

    /// Up to `size` unexecuted gates beyond `front`, ordered by dependency depth and then id.
    ///
    /// Depth is the layer a gate would occupy if the front layer and every following layer were
    /// peeled off in turn; `front` itself is depth zero and never part of the result.
    pub fn lookahead_set(
        &self,
        executed: &BTreeSet<GateId>,
        front: &BTreeSet<GateId>,
        size: usize,
    ) -> Vec<GateId> {
        let remaining: Vec<u32> = (0..self.gates.len())
            .map(|g| {
                self.preds[g]
                    .iter()
                    .filter(|p| !executed.contains(p))
                    .count() as u32
            })
            .collect();
        peel_layers(self, &remaining, front.iter().copied(), size, |_| true)
    }
}

/// Layer-by-layer expansion from `front`, yielding gates accepted by `keep` in (depth, id) order.
fn peel_layers(
    dag: &CircuitDag,
    remaining: &[u32],
    front: impl Iterator<Item = GateId>,
    size: usize,
    mut keep: impl FnMut(GateId) -> bool,
) -> Vec<GateId> {
    let mut out = Vec::new();
    if size == 0 {
        return out;
    }
    let mut released: BTreeMap<GateId, u32> = BTreeMap::new();
    let mut layer: Vec<GateId> = front.collect();
    layer.sort_unstable();
    while !layer.is_empty() {
        let mut next = BTreeSet::new();
        for &g in &layer {
            for &s in dag.succs(g) {
                let count = released.entry(s).or_insert(0);
                *count += 1;
                if *count == remaining[s] {
                    next.insert(s);
                }
            }
        }
        for &g in &next {
            if keep(g) {
                out.push(g);
                if out.len() == size {
                    return out;
                }
            }
        }
        layer = next.into_iter().collect();
    }
    out
}

/// Incremental execution state over a [`CircuitDag`].
#[derive(Clone, Debug)]
pub struct Frontier<'a> {
    dag: &'a CircuitDag,
    remaining: Vec<u32>,
    executed: Vec<bool>,
    front: BTreeSet<GateId>,
    executed_count: usize,
}

impl<'a> Frontier<'a> {
    pub fn new(dag: &'a CircuitDag) -> Self {
        let remaining: Vec<u32> = (0..dag.len()).map(|g| dag.preds(g).len() as u32).collect();
        let front = (0..dag.len()).filter(|&g| remaining[g] == 0).collect();
        Self {
            dag,
            remaining,
            executed: vec![false; dag.len()],
            front,
            executed_count: 0,
        }
    }

    pub fn dag(&self) -> &'a CircuitDag {
        self.dag
    }

    pub fn front(&self) -> &BTreeSet<GateId> {
        &self.front
    }

    pub fn is_done(&self) -> bool {
        self.executed_count == self.dag.len()
    }

    pub fn is_executed(&self, gate: GateId) -> bool {
        self.executed[gate]
    }

    pub fn executed_count(&self) -> usize {
        self.executed_count
    }

    /// Mark a front-layer gate executed and release its successors.
    ///
    /// # Panics
    ///
    /// If `gate` is not in the front layer.
    pub fn execute(&mut self, gate: GateId) {
        assert!(self.front.remove(&gate), "gate {gate} is not in the front layer");
        self.executed[gate] = true;
        self.executed_count += 1;
        for &s in self.dag.succs(gate) {
            self.remaining[s] -= 1;
            if self.remaining[s] == 0 {
                self.front.insert(s);
            }
        }
    }

    /// Lookahead gates accepted by `keep`, in (depth, id) order, at most `size` of them.
    pub fn lookahead(&self, size: usize, keep: impl FnMut(GateId) -> bool) -> Vec<GateId> {
        peel_layers(
            self.dag,
            &self.remaining,
            self.front.iter().copied(),
            size,
            keep,
        )
    }

    pub fn executed_set(&self) -> BTreeSet<GateId> {
        (0..self.dag.len()).filter(|&g| self.executed[g]).collect()
    }
}

//! SABRE layout and swap routing, generic over the architecture backend.

mod backend;
mod heuristic;

use std::collections::BTreeSet;

use log::debug;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use backend::{CouplingBackend, PositionBackend, SabreBackend};
pub use heuristic::{full_heuristic, HeuristicState, HeuristicTerms};

use crate::circuit::{CircuitDag, Frontier, GateId, Qudit};
use crate::graph::{Placement, PositionGraph, PositionId};
use backend::UNREACHABLE;

#[derive(Debug, Error, PartialEq)]
pub enum SabreError {
    #[error("circuit needs {needed} positions but the architecture has {available}")]
    InsufficientPositions { needed: usize, available: usize },
    #[error("gate {gate} acts on {arity} qudits; swap routing handles at most two")]
    UnsupportedArity { gate: GateId, arity: usize },
    #[error("architecture has movement edges without swap capability")]
    NotSwapOnly,
    #[error("gate {gate} has operands in disconnected components")]
    Unroutable { gate: GateId },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SabreConfig {
    /// Forward/backward pairs run to refine the initial placement.
    pub layout_passes: usize,
    pub lookahead_size: usize,
    pub extended_weight: f64,
    /// Added to a position's decay each time it takes part in a swap.
    pub decay_increment: f64,
    pub decay_reset_interval: usize,
    pub seed: u64,
    /// Swaps without progress before the lowest-id front gate is forced; `None` means
    /// five times the number of positions.
    pub deadlock_threshold: Option<usize>,
}

impl Default for SabreConfig {
    fn default() -> Self {
        Self {
            layout_passes: 2,
            lookahead_size: 20,
            extended_weight: 0.5,
            decay_increment: 0.001,
            decay_reset_interval: 5,
            seed: 0,
            deadlock_threshold: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum SabreOp {
    Gate {
        gate: GateId,
        positions: Vec<PositionId>,
    },
    Swap {
        a: PositionId,
        b: PositionId,
    },
}

/// The routed circuit. Contains no backend-specific data, so equal decisions serialize to
/// equal bytes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompiledCircuit {
    pub initial_placement: Placement,
    pub ops: Vec<SabreOp>,
    pub final_placement: Placement,
}

impl CompiledCircuit {
    pub fn swap_count(&self) -> usize {
        self.ops
            .iter()
            .filter(|op| matches!(op, SabreOp::Swap { .. }))
            .count()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SabreStats {
    pub swaps_inserted: u64,
    pub can_execute_calls: u64,
    pub heuristic_evaluations: u64,
    pub forced_routes: u64,
    pub routing_passes: u64,
    pub apsp_computations: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SabreResult {
    pub circuit: CompiledCircuit,
    pub stats: SabreStats,
}

/// Reject graphs whose movement edges are not all swaps.
pub fn check_architecture(graph: &PositionGraph) -> Result<(), SabreError> {
    if graph.is_swap_only() {
        Ok(())
    } else {
        Err(SabreError::NotSwapOnly)
    }
}

fn check_circuit(dag: &CircuitDag, available: usize) -> Result<(), SabreError> {
    if dag.num_qudits() > available {
        return Err(SabreError::InsufficientPositions {
            needed: dag.num_qudits(),
            available,
        });
    }
    if let Some(g) = dag.gates().iter().find(|g| g.arity() > 2) {
        return Err(SabreError::UnsupportedArity {
            gate: g.id,
            arity: g.arity(),
        });
    }
    Ok(())
}

/// Seeded uniform placement of the circuit's qudits onto distinct positions.
pub fn random_placement(num_qudits: usize, num_positions: usize, seed: u64) -> Placement {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut positions: Vec<PositionId> = (0..num_positions).map(PositionId::from).collect();
    positions.shuffle(&mut rng);
    Placement::from_positions(num_positions, &positions[..num_qudits])
        .expect("distinct positions")
}

struct Router<'a, B: SabreBackend> {
    dag: &'a CircuitDag,
    backend: &'a mut B,
    config: &'a SabreConfig,
    stats: &'a mut SabreStats,
}

impl<B: SabreBackend> Router<'_, B> {
    fn positions_of(&self, placement: &Placement, gate: GateId) -> Vec<PositionId> {
        self.dag
            .gate(gate)
            .operands
            .iter()
            .map(|&q| placement.position_of(q).expect("all qudits are placed"))
            .collect()
    }

    /// Execute every gate in `check` (and gates it releases) that can fire now.
    fn execute_ready(
        &mut self,
        frontier: &mut Frontier,
        placement: &Placement,
        mut check: BTreeSet<GateId>,
        ops: &mut Vec<SabreOp>,
    ) -> bool {
        let mut progressed = false;
        while let Some(g) = check.pop_first() {
            let positions = self.positions_of(placement, g);
            let ready = !self.dag.gate(g).is_multi_qudit() || self.backend.can_execute(&positions);
            if !ready {
                continue;
            }
            frontier.execute(g);
            progressed = true;
            ops.push(SabreOp::Gate { gate: g, positions });
            for &s in self.dag.succs(g) {
                if frontier.front().contains(&s) {
                    check.insert(s);
                }
            }
        }
        progressed
    }

    fn terms(&self, frontier: &Frontier) -> HeuristicTerms {
        let pair = |g: GateId| {
            let ops = &self.dag.gate(g).operands;
            (ops[0], ops[1])
        };
        let dag = self.dag;
        HeuristicTerms {
            front: frontier.front().iter().map(|&g| pair(g)).collect(),
            lookahead: frontier
                .lookahead(self.config.lookahead_size, |g| dag.gate(g).is_multi_qudit())
                .into_iter()
                .map(pair)
                .collect(),
            extended_weight: self.config.extended_weight,
        }
    }

    fn apply_swap(
        &mut self,
        placement: &mut Placement,
        a: PositionId,
        b: PositionId,
        ops: &mut Vec<SabreOp>,
    ) {
        placement.swap_unchecked(a, b);
        ops.push(SabreOp::Swap { a, b });
        self.stats.swaps_inserted += 1;
    }

    /// Walk the lowest-id front gate's operands toward each other along its shortest path,
    /// half the swaps from each end.
    fn force_route(
        &mut self,
        frontier: &Frontier,
        placement: &mut Placement,
        ops: &mut Vec<SabreOp>,
    ) -> Result<(), SabreError> {
        let g = *frontier.front().first().expect("non-empty front");
        let pos = self.positions_of(placement, g);
        let path = self
            .backend
            .path(pos[0], pos[1])
            .ok_or(SabreError::Unroutable { gate: g })?;
        let k = path.len() - 1;
        let forward = k / 2;
        for i in 0..forward {
            self.apply_swap(placement, path[i], path[i + 1], ops);
        }
        for j in (forward + 2..=k).rev() {
            self.apply_swap(placement, path[j], path[j - 1], ops);
        }
        self.stats.forced_routes += 1;
        debug!("forced gate {g} along {} positions", path.len());
        Ok(())
    }

    fn run(&mut self, placement: &mut Placement) -> Result<Vec<SabreOp>, SabreError> {
        self.backend.begin_pass();
        self.stats.routing_passes += 1;
        let n = self.backend.num_positions();
        let threshold = self.config.deadlock_threshold.unwrap_or(5 * n);
        let mut frontier = Frontier::new(self.dag);
        let mut ops = Vec::new();
        let mut decay = vec![1.0f64; n];
        let mut since_reset = 0usize;
        let mut since_progress = 0usize;
        let mut check: BTreeSet<GateId> = frontier.front().clone();
        let mut state: Option<HeuristicState> = None;

        loop {
            if self.execute_ready(&mut frontier, placement, check, &mut ops) {
                state = None;
                decay.fill(1.0);
                since_reset = 0;
                since_progress = 0;
            }
            if frontier.is_done() {
                break;
            }
            for &g in frontier.front() {
                let pos = self.positions_of(placement, g);
                if self.backend.dist(pos[0], pos[1]) == UNREACHABLE {
                    return Err(SabreError::Unroutable { gate: g });
                }
            }
            if since_progress >= threshold {
                self.force_route(&frontier, placement, &mut ops)?;
                state = None;
                since_progress = 0;
                check = frontier.front().clone();
                continue;
            }
            let st = match state.take() {
                Some(st) => st,
                None => {
                    let backend = &*self.backend;
                    HeuristicState::new(
                        self.terms(&frontier),
                        self.dag.num_qudits(),
                        |a, b| backend.dist(a, b),
                        placement,
                    )
                }
            };

            let mut candidates = BTreeSet::new();
            for &g in frontier.front() {
                for p in self.positions_of(placement, g) {
                    for &nb in self.backend.swap_neighbors(p) {
                        candidates.insert((p.min(nb), p.max(nb)));
                    }
                }
            }
            let mut best: Option<(f64, PositionId, PositionId, (u64, u64))> = None;
            for (a, b) in candidates {
                let backend = &*self.backend;
                let sums = st.sums_after_swap(|x, y| backend.dist(x, y), placement, a, b);
                let score = st.terms.value(sums.0, sums.1) * decay[a.index()].max(decay[b.index()]);
                self.stats.heuristic_evaluations += 1;
                if best.as_ref().is_none_or(|(s, ..)| score < *s) {
                    best = Some((score, a, b, sums));
                }
            }
            let (_, a, b, sums) = best.ok_or_else(|| SabreError::Unroutable {
                gate: *frontier.front().first().unwrap(),
            })?;
            self.apply_swap(placement, a, b, &mut ops);
            let mut st = st;
            st.set_sums(sums);
            state = Some(st);

            decay[a.index()] += self.config.decay_increment;
            decay[b.index()] += self.config.decay_increment;
            since_reset += 1;
            if since_reset >= self.config.decay_reset_interval {
                decay.fill(1.0);
                since_reset = 0;
            }
            since_progress += 1;

            let moved: Vec<Qudit> = [placement.occupant(a), placement.occupant(b)]
                .into_iter()
                .flatten()
                .collect();
            check = frontier
                .front()
                .iter()
                .copied()
                .filter(|&g| self.dag.gate(g).operands.iter().any(|q| moved.contains(q)))
                .collect();
        }
        self.stats.can_execute_calls = self.backend.can_execute_calls();
        self.stats.apsp_computations = self.backend.apsp_computations();
        Ok(ops)
    }
}

fn route_pass<B: SabreBackend>(
    dag: &CircuitDag,
    backend: &mut B,
    placement: &mut Placement,
    config: &SabreConfig,
    stats: &mut SabreStats,
) -> Result<Vec<SabreOp>, SabreError> {
    Router {
        dag,
        backend,
        config,
        stats,
    }
    .run(placement)
}

/// Seeded placement refined by `layout_passes` forward/backward passes; the placement left by
/// the last backward pass is returned.
pub fn initial_layout<B: SabreBackend>(
    dag: &CircuitDag,
    backend: &mut B,
    config: &SabreConfig,
    stats: &mut SabreStats,
) -> Result<Placement, SabreError> {
    check_circuit(dag, backend.num_positions())?;
    let mut placement = random_placement(dag.num_qudits(), backend.num_positions(), config.seed);
    if config.layout_passes == 0 {
        return Ok(placement);
    }
    let reversed = dag.reversed();
    for _ in 0..config.layout_passes {
        route_pass(dag, backend, &mut placement, config, stats)?;
        route_pass(&reversed, backend, &mut placement, config, stats)?;
    }
    Ok(placement)
}

/// Route `dag` from `placement`, inserting swaps.
pub fn route<B: SabreBackend>(
    dag: &CircuitDag,
    backend: &mut B,
    placement: Placement,
    config: &SabreConfig,
    stats: &mut SabreStats,
) -> Result<CompiledCircuit, SabreError> {
    check_circuit(dag, backend.num_positions())?;
    let mut current = placement.clone();
    let ops = route_pass(dag, backend, &mut current, config, stats)?;
    Ok(CompiledCircuit {
        initial_placement: placement,
        ops,
        final_placement: current,
    })
}

/// Layout followed by the final routing pass.
pub fn compile<B: SabreBackend>(
    dag: &CircuitDag,
    backend: &mut B,
    config: &SabreConfig,
) -> Result<SabreResult, SabreError> {
    let mut stats = SabreStats::default();
    let placement = initial_layout(dag, backend, config, &mut stats)?;
    let circuit = route(dag, backend, placement, config, &mut stats)?;
    stats.can_execute_calls = backend.can_execute_calls();
    stats.apsp_computations = backend.apsp_computations();
    Ok(SabreResult { circuit, stats })
}

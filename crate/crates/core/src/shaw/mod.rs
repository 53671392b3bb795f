//! Shuttle routing on position graphs.
//!
//! One router serves both the baseline (distances and paths recomputed per query, every trap
//! scored, no memo) and the cached variant. The caches change only how answers are obtained,
//! never which answer is returned, so both variants emit the same operation sequence.

mod congestion;
mod geometry;
mod trap_select;

use std::collections::VecDeque;
use std::sync::Arc;

use log::debug;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use congestion::{
    local_scoring_set, scan_congestion, CongestionCounters, CongestionScore, CongestionScorer,
    LocalScoringSet, OccupancySignature, ScoringKey,
};
pub use geometry::{induced_exec_connected, Geometry, Profiles};
pub use trap_select::{
    exact_trap_score, occupancy_bonus, select_target_trap, trap_lower_bound, TrapChoice,
    TrapScore, TrapSelection,
};

use crate::circuit::{CircuitDag, Frontier, GateId, Qudit};
use crate::graph::{
    ArchCaches, CacheError, EdgeCapability, Placement, PositionGraph, PositionId, Region, TrapId,
    TravelCosts,
};
use crate::sabre::{HeuristicState, HeuristicTerms};
use crate::schedule::{assign_times, Op, OpKind, OperationDurations, Schedule, ScheduleError};

#[derive(Debug, Error, PartialEq)]
pub enum ShawError {
    #[error("infeasible: no multi-slot executable trap holds a {arity}-qudit gate")]
    NoMultiSlotTrap { arity: usize },
    #[error("infeasible: {qudits} qudits but only {slots} trap slots")]
    TooManyQudits { qudits: usize, slots: usize },
    #[error("no executable trap is reachable by every operand")]
    Unreachable,
    #[error("routing made no progress on gate {gate}")]
    Stuck { gate: GateId },
    #[error(transparent)]
    Costs(#[from] CacheError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
}

impl ShawError {
    /// True for errors that no routing decision could avoid.
    pub fn is_infeasible(&self) -> bool {
        matches!(
            self,
            ShawError::NoMultiSlotTrap { .. } | ShawError::TooManyQudits { .. }
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShawMode {
    Shaw,
    LightShaw,
}

/// Memo switches, besides the geometry source. None of them changes a routing decision.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheToggles {
    pub profiles: bool,
    pub scoring_sets: bool,
    pub scores: bool,
    pub prune_traps: bool,
}

impl CacheToggles {
    pub fn all(on: bool) -> Self {
        Self {
            profiles: on,
            scoring_sets: on,
            scores: on,
            prune_traps: on,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShawConfig {
    pub lookahead_size: usize,
    pub extended_weight: f64,
    pub seed: u64,
    /// Shuttles without an executed gate before the lowest-id front gate is forced.
    pub stall_limit: usize,
    /// Clearing recursion starts at this depth; `None` uses the largest trap capacity minus
    /// one. Each level adds one, up to the movement hop diameter.
    pub initial_depth: Option<u32>,
    pub toggles: CacheToggles,
}

impl ShawConfig {
    pub fn for_mode(mode: ShawMode) -> Self {
        Self {
            lookahead_size: 8,
            extended_weight: 0.5,
            seed: 0,
            stall_limit: 16,
            initial_depth: None,
            toggles: CacheToggles::all(mode == ShawMode::LightShaw),
        }
    }
}

impl Default for ShawConfig {
    fn default() -> Self {
        Self::for_mode(ShawMode::LightShaw)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShawStats {
    pub shuttles: u64,
    pub failed_shuttles: u64,
    pub walk_steps: u64,
    pub clearing_moves: u64,
    pub vacate_chains: u64,
    pub escapes: u64,
    pub forced_routes: u64,
    pub move_evaluations: u64,
    pub trap_selections: u64,
    pub traps_scored: u64,
    pub traps_pruned: u64,
    pub profile_hits: u64,
    pub profile_builds: u64,
    pub congestion: CongestionCounters,
}

/// Untimed routing output.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShuttleRoute {
    pub initial_placement: Placement,
    pub ops: Vec<Op>,
    pub final_placement: Placement,
}

/// The timed artifact. Holds no cache or counter data.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShuttleCircuit {
    pub initial_placement: Placement,
    pub schedule: Schedule,
    pub final_placement: Placement,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ShawResult {
    pub circuit: ShuttleCircuit,
    pub stats: ShawStats,
}

/// Reject circuits that no routing can serve on `graph`.
pub fn check_feasible(dag: &CircuitDag, graph: &PositionGraph) -> Result<(), ShawError> {
    if dag.num_qudits() > graph.num_slots() {
        return Err(ShawError::TooManyQudits {
            qudits: dag.num_qudits(),
            slots: graph.num_slots(),
        });
    }
    let arity = dag.max_arity();
    if arity >= 2 && graph.max_executable_capacity() < arity {
        return Err(ShawError::NoMultiSlotTrap { arity });
    }
    Ok(())
}

/// Fill traps round-robin (slot 0 of every trap, then slot 1, ...), then shuffle which qudit
/// lands where with the seed.
pub fn initial_placement(graph: &PositionGraph, num_qudits: usize, seed: u64) -> Placement {
    let max_cap = graph.traps().iter().map(|t| t.capacity()).max().unwrap_or(0);
    let mut order = Vec::with_capacity(graph.num_slots());
    for r in 0..max_cap {
        for t in graph.traps() {
            if let Some(&s) = t.slots.get(r) {
                order.push(s);
            }
        }
    }
    let mut labels: Vec<Qudit> = (0..num_qudits).collect();
    labels.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut placement = Placement::new(num_qudits, graph.num_positions());
    for (&q, &p) in labels.iter().zip(&order) {
        placement.place(q, p).expect("distinct free slots");
    }
    placement
}

/// Change in `H` from relocating `q` to `dst`, plus the penalties of occupied positions
/// strictly between them on the shortest path.
pub fn score_move(
    geometry: &Geometry,
    profiles: &mut Profiles,
    state: &HeuristicState,
    placement: &Placement,
    q: Qudit,
    dst: PositionId,
) -> f64 {
    let sums = state.sums_after_relocate(|a, b| geometry.dist(a, b), placement, q, dst);
    let delta = state.terms.value(sums.0, sums.1) - state.value();
    let src = placement.position_of(q).expect("scored qudits are placed");
    let blocked = profiles
        .get(geometry, src, dst)
        .map_or(0, |p| p.occupied_penalty(placement));
    delta + blocked as f64
}

/// Move `q` one edge to `to`, swapping along swap edges.
fn step(placement: &mut Placement, graph: &PositionGraph, q: Qudit, to: PositionId) {
    let from = placement.position_of(q).expect("placed");
    if graph
        .edge_caps(from, to)
        .is_some_and(|c| c.contains(EdgeCapability::Swap))
    {
        placement.swap_unchecked(from, to);
    } else {
        placement
            .apply_move(graph, q, to)
            .expect("movement into a free neighbor");
    }
}

enum Resolution {
    Cleared,
    Escaped,
    Failed,
}

struct Router<'a> {
    dag: &'a CircuitDag,
    geometry: Geometry<'a>,
    graph: &'a PositionGraph,
    config: &'a ShawConfig,
    placement: Placement,
    profiles: Profiles,
    scorer: CongestionScorer,
    ops: Vec<Op>,
    stats: ShawStats,
    hop_limit: u32,
    base_depth: u32,
    pin_trap: Option<TrapId>,
    pins: Vec<Qudit>,
}

impl<'a> Router<'a> {
    fn new(
        dag: &'a CircuitDag,
        geometry: Geometry<'a>,
        config: &'a ShawConfig,
        placement: Placement,
    ) -> Self {
        let graph = geometry.graph();
        let max_cap = graph.traps().iter().map(|t| t.capacity()).max().unwrap_or(1);
        let base_depth = config
            .initial_depth
            .unwrap_or((max_cap as u32).saturating_sub(1))
            .max(1);
        let hop_limit = geometry.hop_diameter().max(base_depth);
        let t = config.toggles;
        Self {
            dag,
            profiles: Profiles::new(t.profiles),
            scorer: CongestionScorer::new(t.scoring_sets, t.scores),
            graph,
            geometry,
            config,
            placement,
            ops: Vec::new(),
            stats: ShawStats::default(),
            hop_limit,
            base_depth,
            pin_trap: None,
            pins: Vec::new(),
        }
    }

    fn pos(&self, q: Qudit) -> PositionId {
        self.placement.position_of(q).expect("every qudit is placed")
    }

    fn positions_of(&self, g: GateId) -> Vec<PositionId> {
        self.dag.gate(g).operands.iter().map(|&q| self.pos(q)).collect()
    }

    fn executable(&self, g: GateId) -> bool {
        !self.dag.gate(g).is_multi_qudit() || self.geometry.exec_connected(&self.positions_of(g))
    }

    /// Whether `ion` may be moved to `to` without leaving its pinned trap.
    fn allowed(&self, ion: Qudit, to: PositionId) -> bool {
        match self.pin_trap {
            Some(t) if self.pins.contains(&ion) => self.graph.trap_of(to) == Some(t),
            _ => true,
        }
    }

    /// Move `q` one edge to `to`. Along a swap edge the occupant of `to`, if any, takes `q`'s
    /// old position; along any other edge `to` must be free.
    fn move_ion(&mut self, q: Qudit, to: PositionId) {
        let from = self.pos(q);
        let caps = self.graph.edge_caps(from, to).expect("adjacent positions");
        let op = if caps.contains(EdgeCapability::Swap) {
            let ions = [Some(q), self.placement.occupant(to)]
                .into_iter()
                .flatten()
                .collect();
            Op::swap(from, to, ions)
        } else {
            let kind = match (self.graph.region(from), self.graph.region(to)) {
                (Region::Slot { .. }, Region::Transport) => OpKind::Split,
                (Region::Transport, Region::Slot { .. }) => OpKind::Merge,
                _ => OpKind::Move,
            };
            Op::movement(kind, q, from, to)
        };
        step(&mut self.placement, self.graph, q, to);
        self.ops.push(op);
    }

    fn execute_ready(&mut self, frontier: &mut Frontier) -> bool {
        let mut progressed = false;
        loop {
            let ready: Vec<GateId> = frontier
                .front()
                .iter()
                .copied()
                .filter(|&g| self.executable(g))
                .collect();
            if ready.is_empty() {
                return progressed;
            }
            for g in ready {
                let positions = self.positions_of(g);
                frontier.execute(g);
                self.ops
                    .push(Op::gate(g, self.dag.gate(g).operands.clone(), positions));
            }
            progressed = true;
        }
    }

    fn select(&mut self, operands: &[Qudit]) -> Result<TrapSelection, ShawError> {
        let sel = select_target_trap(
            &self.geometry,
            &mut self.profiles,
            &self.placement,
            operands,
            self.config.toggles.prune_traps,
        )?;
        self.stats.trap_selections += 1;
        self.stats.traps_scored += sel.scores.iter().filter(|s| s.exact.is_some()).count() as u64;
        self.stats.traps_pruned += sel.pruned as u64;
        Ok(sel)
    }

    fn terms(&self, frontier: &Frontier) -> HeuristicTerms {
        let dag = self.dag;
        let pairs = |g: GateId| {
            let ops = &dag.gate(g).operands;
            let mut v = Vec::new();
            for i in 0..ops.len() {
                for j in i + 1..ops.len() {
                    v.push((ops[i], ops[j]));
                }
            }
            v
        };
        HeuristicTerms {
            front: frontier.front().iter().flat_map(|&g| pairs(g)).collect(),
            lookahead: frontier
                .lookahead(self.config.lookahead_size, |g| dag.gate(g).is_multi_qudit())
                .into_iter()
                .flat_map(pairs)
                .collect(),
            extended_weight: self.config.extended_weight,
        }
    }

    fn score_move(&mut self, state: &HeuristicState, q: Qudit, dst: PositionId) -> f64 {
        self.stats.move_evaluations += 1;
        score_move(
            &self.geometry,
            &mut self.profiles,
            state,
            &self.placement,
            q,
            dst,
        )
    }

    /// Walk `q` along the shortest path to `slot`, stopping as soon as it is inside `trap`.
    /// Operands in `pins` stay inside `trap` while their neighbors are cleared.
    fn shuttle(
        &mut self,
        q: Qudit,
        trap: TrapId,
        slot: PositionId,
        pins: Vec<Qudit>,
    ) -> Result<bool, ShawError> {
        self.pin_trap = Some(trap);
        self.pins = pins;
        self.stats.shuttles += 1;
        let entered = self.walk(q, trap, slot);
        self.pin_trap = None;
        self.pins.clear();
        if entered == Ok(false) {
            self.stats.failed_shuttles += 1;
        }
        entered
    }

    fn walk(&mut self, q: Qudit, trap: TrapId, slot: PositionId) -> Result<bool, ShawError> {
        let n = self.graph.num_positions();
        let max_steps = 8 * n;
        let mut steps = 0;
        loop {
            let cur = self.pos(q);
            if self.graph.trap_of(cur) == Some(trap) {
                return Ok(true);
            }
            let mut path = self.geometry.path(cur, slot).ok_or(ShawError::Unreachable)?;
            if let Some(i) = path.iter().position(|&p| self.graph.trap_of(p) == Some(trap)) {
                path.truncate(i + 1);
            }
            let mut on_path = vec![false; n];
            for p in &path {
                on_path[p.index()] = true;
            }
            for i in 1..path.len() {
                steps += 1;
                if steps > max_steps {
                    return Ok(false);
                }
                let next = path[i];
                let caps = self
                    .graph
                    .edge_caps(path[i - 1], next)
                    .expect("path edges exist");
                if self.placement.is_occupied(next) && !caps.contains(EdgeCapability::Swap) {
                    match self.resolve_congestion(q, &path, &on_path, next) {
                        Resolution::Cleared => {}
                        Resolution::Escaped => break,
                        Resolution::Failed => return Ok(false),
                    }
                }
                self.move_ion(q, next);
                self.stats.walk_steps += 1;
            }
        }
    }

    /// Free the blocked position `b` on the walker's path. One memo episode per call.
    fn resolve_congestion(
        &mut self,
        walker: Qudit,
        path: &[PositionId],
        on_path: &[bool],
        b: PositionId,
    ) -> Resolution {
        self.scorer.begin_episode();
        let t = *path.last().expect("non-empty path");
        let mut visited = vec![false; self.graph.num_positions()];
        let w = self.pos(walker);
        visited[w.index()] = true;
        self.unpin(b);
        let outcome = if !self.placement.is_occupied(b)
            || self.clear(b, on_path, t, self.base_depth, &mut visited)
            || self.vacate(b, on_path, w)
        {
            Resolution::Cleared
        } else if self.escape(walker, b, on_path) {
            Resolution::Escaped
        } else {
            Resolution::Failed
        };
        self.scorer.end_episode();
        outcome
    }

    /// If `b` holds a pinned ion, bubble the nearest unpinned ion (or gap) of the same trap
    /// into `b` along swap edges; pinned ions shift within the trap.
    fn unpin(&mut self, b: PositionId) {
        let Some(trap) = self.pin_trap else { return };
        if !self
            .placement
            .occupant(b)
            .is_some_and(|y| self.pins.contains(&y))
        {
            return;
        }
        let n = self.graph.num_positions();
        let mut parent: Vec<Option<PositionId>> = vec![None; n];
        let mut seen = vec![false; n];
        seen[b.index()] = true;
        let mut queue = VecDeque::from([b]);
        while let Some(u) = queue.pop_front() {
            for &(v, caps) in self.graph.neighbors(u) {
                if seen[v.index()]
                    || !caps.contains(EdgeCapability::Swap)
                    || self.graph.trap_of(v) != Some(trap)
                {
                    continue;
                }
                seen[v.index()] = true;
                parent[v.index()] = Some(u);
                if self
                    .placement
                    .occupant(v)
                    .is_some_and(|o| self.pins.contains(&o))
                {
                    queue.push_back(v);
                    continue;
                }
                let mut cur = v;
                while let Some(p) = parent[cur.index()] {
                    let a = self.placement.occupant(p).expect("pinned ion");
                    self.move_ion(a, cur);
                    self.stats.clearing_moves += 1;
                    cur = p;
                }
                return;
            }
        }
    }

    /// Move the occupant of `b` to the least congested off-path neighbor, recursively
    /// clearing that neighbor first when every candidate is occupied. Makes no move on
    /// failure.
    fn clear(
        &mut self,
        b: PositionId,
        on_path: &[bool],
        t: PositionId,
        depth: u32,
        visited: &mut [bool],
    ) -> bool {
        let y = self.placement.occupant(b).expect("blocked position is occupied");
        visited[b.index()] = true;
        let graph = self.graph;
        let mut candidates: Vec<(bool, CongestionScore, PositionId)> = Vec::new();
        for c in graph.movement_neighbors(b) {
            if on_path[c.index()] || visited[c.index()] || !self.allowed(y, c) {
                continue;
            }
            let score = self.scorer.score(graph, (c, t, b, depth), &self.placement);
            candidates.push((self.placement.is_occupied(c), score, c));
        }
        candidates.sort_by(|x, y| {
            x.0.cmp(&y.0)
                .then(x.1.fraction.total_cmp(&y.1.fraction))
                .then(x.1.weighted.total_cmp(&y.1.weighted))
                .then(x.2.cmp(&y.2))
        });
        if let Some(&(false, _, c)) = candidates.first() {
            self.move_ion(y, c);
            self.stats.clearing_moves += 1;
            return true;
        }
        if depth >= self.hop_limit {
            return false;
        }
        for (_, _, c) in candidates {
            if visited[c.index()] {
                continue;
            }
            if self.clear(c, on_path, t, depth + 1, visited) {
                self.move_ion(y, c);
                self.stats.clearing_moves += 1;
                return true;
            }
        }
        false
    }

    /// Breadth-first route from `b` to a free position off the path, avoiding `walker_at`.
    /// `cross_path` lets the route pass through path positions. Pinned ions are crossed only
    /// along swap edges of their trap: on the stretch starting at `b`, or anywhere with
    /// `cross_pinned`. When `b` itself holds a pinned ion the route stays inside that trap.
    fn evacuation_route(
        &self,
        b: PositionId,
        walker_at: PositionId,
        on_path: &[bool],
        cross_path: bool,
        cross_pinned: bool,
    ) -> Option<Vec<PositionId>> {
        let n = self.graph.num_positions();
        let y = self.placement.occupant(b)?;
        let confine = self.pin_trap.filter(|_| self.pins.contains(&y));
        let mut parent: Vec<Option<PositionId>> = vec![None; n];
        let mut seen = vec![false; n];
        seen[b.index()] = true;
        seen[walker_at.index()] = true;
        // Pinned ions drift back as others pass them, so without `cross_pinned` they may only
        // be crossed on a run of swap edges inside their trap that starts at `b`.
        let mut in_prefix = vec![false; n];
        in_prefix[b.index()] = self.pin_trap.is_some() && self.graph.trap_of(b) == self.pin_trap;
        let mut queue = VecDeque::from([b]);
        while let Some(u) = queue.pop_front() {
            for v in self.graph.movement_neighbors(u) {
                if seen[v.index()] {
                    continue;
                }
                if confine.is_some_and(|t| self.graph.trap_of(v) != Some(t)) {
                    continue;
                }
                let v_free = !self.placement.is_occupied(v);
                let inside = self.swap_inside_pin_trap(u, v);
                let v_prefix = in_prefix[u.index()] && inside;
                if !v_free && self.is_pinned_at(v) && !(v_prefix || (cross_pinned && inside)) {
                    continue;
                }
                seen[v.index()] = true;
                parent[v.index()] = Some(u);
                in_prefix[v.index()] = v_prefix;
                if v_free && !on_path[v.index()] {
                    let mut route = vec![v];
                    let mut cur = v;
                    while let Some(p) = parent[cur.index()] {
                        route.push(p);
                        cur = p;
                    }
                    route.reverse();
                    return Some(route);
                }
                if cross_path || !on_path[v.index()] {
                    queue.push_back(v);
                }
            }
        }
        None
    }

    fn is_pinned_at(&self, p: PositionId) -> bool {
        self.pin_trap.is_some()
            && self
                .placement
                .occupant(p)
                .is_some_and(|o| self.pins.contains(&o))
    }

    fn swap_inside_pin_trap(&self, u: PositionId, v: PositionId) -> bool {
        let t = self.pin_trap;
        t.is_some()
            && self.graph.trap_of(u) == t
            && self.graph.trap_of(v) == t
            && self
                .graph
                .edge_caps(u, v)
                .is_some_and(|c| c.contains(EdgeCapability::Swap))
    }

    /// Empty `route[0]` by pushing every unpinned ion on the route forward into the gap ahead
    /// of it, starting from the far end. Pinned ions are swapped past and drift back; if one
    /// ends on `route[0]`, a gap of its trap is bubbled in. On failure nothing is changed.
    fn evacuate(&mut self, route: &[PositionId]) -> bool {
        let saved = (self.placement.clone(), self.ops.len(), self.stats.clone());
        if self.push_along(route) {
            self.stats.vacate_chains += 1;
            return true;
        }
        self.placement = saved.0;
        self.ops.truncate(saved.1);
        self.stats = saved.2;
        false
    }

    fn push_along(&mut self, route: &[PositionId]) -> bool {
        let mut gap = route.len() - 1;
        for i in (0..gap).rev() {
            if self.is_pinned_at(route[i]) {
                continue;
            }
            let Some(ion) = self.placement.occupant(route[i]) else {
                continue;
            };
            for j in i + 1..=gap {
                let swap = self
                    .graph
                    .edge_caps(route[j - 1], route[j])
                    .is_some_and(|c| c.contains(EdgeCapability::Swap));
                if !swap && self.placement.is_occupied(route[j]) {
                    // A pinned ion drifted onto the trap entry; shift it inward.
                    self.bubble_gap(route[j]);
                    if self.placement.is_occupied(route[j]) {
                        return false;
                    }
                }
                self.move_ion(ion, route[j]);
                self.stats.clearing_moves += 1;
            }
            match (i..gap)
                .rev()
                .find(|&j| !self.placement.is_occupied(route[j]))
            {
                Some(j) => gap = j,
                None => return false,
            }
        }
        if self.placement.is_occupied(route[0]) {
            self.bubble_gap(route[0]);
        }
        !self.placement.is_occupied(route[0])
    }

    /// Move the nearest free slot of `b`'s trap into `b` along swap edges.
    fn bubble_gap(&mut self, b: PositionId) {
        let Some(trap) = self.graph.trap_of(b) else {
            return;
        };
        let n = self.graph.num_positions();
        let mut parent: Vec<Option<PositionId>> = vec![None; n];
        let mut seen = vec![false; n];
        seen[b.index()] = true;
        let mut queue = VecDeque::from([b]);
        while let Some(u) = queue.pop_front() {
            for &(v, caps) in self.graph.neighbors(u) {
                if seen[v.index()]
                    || !caps.contains(EdgeCapability::Swap)
                    || self.graph.trap_of(v) != Some(trap)
                {
                    continue;
                }
                seen[v.index()] = true;
                parent[v.index()] = Some(u);
                if self.placement.is_occupied(v) {
                    queue.push_back(v);
                    continue;
                }
                let mut cur = v;
                while let Some(p) = parent[cur.index()] {
                    let ion = self.placement.occupant(p).expect("occupied chain");
                    self.move_ion(ion, cur);
                    self.stats.clearing_moves += 1;
                    cur = p;
                }
                return;
            }
        }
    }

    fn vacate(&mut self, b: PositionId, on_path: &[bool], walker_at: PositionId) -> bool {
        let route = self
            .evacuation_route(b, walker_at, on_path, false, false)
            .or_else(|| self.evacuation_route(b, walker_at, on_path, true, false));
        if route.is_some_and(|r| self.evacuate(&r)) {
            return true;
        }
        self.evacuation_route(b, walker_at, on_path, true, true)
            .is_some_and(|r| self.evacuate(&r))
    }

    /// Retreat the walker, through free positions or by swapping past ions, to the nearest
    /// spot from which `b` can be evacuated off the path.
    fn escape(&mut self, walker: Qudit, b: PositionId, on_path: &[bool]) -> bool {
        let n = self.graph.num_positions();
        let w = self.pos(walker);
        let mut parent: Vec<Option<PositionId>> = vec![None; n];
        let mut seen = vec![false; n];
        seen[w.index()] = true;
        seen[b.index()] = true;
        let mut queue = VecDeque::from([w]);
        while let Some(u) = queue.pop_front() {
            for &(e, caps) in self.graph.neighbors(u) {
                if seen[e.index()]
                    || !caps.is_movement()
                    || (self.placement.is_occupied(e) && !caps.contains(EdgeCapability::Swap))
                {
                    continue;
                }
                seen[e.index()] = true;
                parent[e.index()] = Some(u);
                queue.push_back(e);
                let mut steps = vec![e];
                let mut cur = e;
                while let Some(p) = parent[cur.index()] {
                    if p != w {
                        steps.push(p);
                    }
                    cur = p;
                }
                steps.reverse();
                let saved = self.placement.clone();
                for &s in &steps {
                    step(&mut self.placement, self.graph, walker, s);
                }
                let route = self
                    .evacuation_route(b, e, on_path, true, false)
                    .or_else(|| self.evacuation_route(b, e, on_path, true, true));
                self.placement = saved;
                let Some(route) = route else {
                    continue;
                };
                for s in steps {
                    self.move_ion(walker, s);
                }
                self.stats.escapes += 1;
                self.evacuate(&route);
                return true;
            }
        }
        // Boxed in: clear an occupied off-path neighbor first and step into it.
        let graph = self.graph;
        for e in graph.movement_neighbors(w) {
            if e == b || on_path[e.index()] {
                continue;
            }
            let Some(room) = self.evacuation_route(e, w, on_path, false, false) else {
                continue;
            };
            if !self.evacuate(&room) {
                continue;
            }
            self.move_ion(walker, e);
            self.stats.escapes += 1;
            self.vacate(b, on_path, e);
            return true;
        }
        false
    }

    /// Bring the lowest-id front gate together, one incoming operand at a time.
    fn force_route(&mut self, frontier: &Frontier) -> Result<bool, ShawError> {
        let g = *frontier.front().first().expect("non-empty front");
        self.stats.forced_routes += 1;
        let operands = self.dag.gate(g).operands.clone();
        for _ in 0..operands.len() + 2 {
            if self.executable(g) {
                return Ok(true);
            }
            let sel = self.select(&operands)?;
            let trap = sel.choice.trap;
            let Some(&(q, slot)) = sel.choice.assignment.first() else {
                return Ok(false);
            };
            let pins = self.operands_in(&operands, trap, q);
            self.shuttle(q, trap, slot, pins)?;
        }
        Ok(self.executable(g))
    }

    fn operands_in(&self, operands: &[Qudit], trap: TrapId, except: Qudit) -> Vec<Qudit> {
        operands
            .iter()
            .copied()
            .filter(|&o| o != except && self.graph.trap_of(self.pos(o)) == Some(trap))
            .collect()
    }

    fn run(&mut self) -> Result<(), ShawError> {
        let mut frontier = Frontier::new(self.dag);
        let mut since_progress = 0;
        let mut failed_forces = 0;
        loop {
            if self.execute_ready(&mut frontier) {
                since_progress = 0;
                failed_forces = 0;
            }
            if frontier.is_done() {
                return Ok(());
            }
            if since_progress >= self.config.stall_limit {
                let g = *frontier.front().first().unwrap();
                debug!("forcing gate {g} after {since_progress} shuttles");
                self.force_route(&frontier)?;
                since_progress = 0;
                failed_forces += 1;
                if failed_forces > 3 {
                    return Err(ShawError::Stuck { gate: g });
                }
                continue;
            }

            let geometry = &self.geometry;
            let state = HeuristicState::new(
                self.terms(&frontier),
                self.dag.num_qudits(),
                |a, b| geometry.dist(a, b),
                &self.placement,
            );
            let front: Vec<GateId> = frontier.front().iter().copied().collect();
            let mut best: Option<(f64, PositionId, PositionId, Qudit, TrapId, GateId)> = None;
            for g in front {
                let operands = self.dag.gate(g).operands.clone();
                let sel = self.select(&operands)?;
                for &(q, dst) in &sel.choice.assignment {
                    let src = self.pos(q);
                    let score = self.score_move(&state, q, dst);
                    let better = best.as_ref().is_none_or(|(s, bs, bd, ..)| {
                        score < *s || (score == *s && (src, dst) < (*bs, *bd))
                    });
                    if better {
                        best = Some((score, src, dst, q, sel.choice.trap, g));
                    }
                }
            }
            since_progress += 1;
            let Some((_, _, dst, q, trap, g)) = best else {
                // Every front gate sits in one trap without being executable there; only
                // forcing can change that.
                since_progress = self.config.stall_limit;
                continue;
            };
            let pins = self.operands_in(&self.dag.gate(g).operands, trap, q);
            self.shuttle(q, trap, dst, pins)?;
        }
    }
}

/// Route `dag` from `placement` and return the untimed op list.
pub fn route_shuttle(
    dag: &CircuitDag,
    geometry: Geometry,
    placement: Placement,
    config: &ShawConfig,
) -> Result<(ShuttleRoute, ShawStats), ShawError> {
    check_feasible(dag, geometry.graph())?;
    let mut router = Router::new(dag, geometry, config, placement.clone());
    router.run()?;
    let mut stats = router.stats;
    stats.profile_hits = router.profiles.hits();
    stats.profile_builds = router.profiles.builds();
    stats.congestion = router.scorer.counters;
    Ok((
        ShuttleRoute {
            initial_placement: placement,
            ops: router.ops,
            final_placement: router.placement,
        },
        stats,
    ))
}

/// Initial placement, routing and ASAP timing.
pub fn compile_shuttle(
    dag: &CircuitDag,
    geometry: Geometry,
    durations: &OperationDurations,
    config: &ShawConfig,
) -> Result<ShawResult, ShawError> {
    let graph = geometry.graph();
    check_feasible(dag, graph)?;
    let placement = initial_placement(graph, dag.num_qudits(), config.seed);
    let (route, stats) = route_shuttle(dag, geometry, placement, config)?;
    let schedule = assign_times(&route.ops, durations)?;
    Ok(ShawResult {
        circuit: ShuttleCircuit {
            initial_placement: route.initial_placement,
            schedule,
            final_placement: route.final_placement,
        },
        stats,
    })
}

/// Run one mode end to end. The cached mode builds its caches here, so their cost is part of
/// the call.
pub fn compile_mode(
    dag: &CircuitDag,
    graph: Arc<PositionGraph>,
    durations: &OperationDurations,
    mode: ShawMode,
    config: &ShawConfig,
) -> Result<ShawResult, ShawError> {
    let costs = TravelCosts::from_durations(durations)?;
    check_feasible(dag, &graph)?;
    match mode {
        ShawMode::Shaw => compile_shuttle(
            dag,
            Geometry::OnDemand {
                graph: &graph,
                costs,
            },
            durations,
            config,
        ),
        ShawMode::LightShaw => {
            let caches = ArchCaches::build(graph, costs)?;
            compile_shuttle(dag, Geometry::Cached(&caches), durations, config)
        }
    }
}

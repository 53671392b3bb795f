use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, VecDeque};
use std::sync::Arc;

use thiserror::Error;

use super::{Capabilities, EdgeCapability, Placement, PlacementError, PositionGraph, PositionId};
use crate::circuit::Gate;
use crate::schedule::OperationDurations;

const UNREACHABLE: u64 = u64::MAX;
const NO_HOP: u32 = u32::MAX;

#[derive(Debug, Error, PartialEq)]
pub enum CacheError {
    #[error("edge cost for {0} must be positive")]
    NonPositiveCost(&'static str),
    #[error("{target} is unreachable from {from}")]
    Unreachable {
        from: PositionId,
        target: PositionId,
    },
}

/// Integer travel times, in nanoseconds, per movement label.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TravelCosts {
    pub swap: u64,
    pub merge_split: u64,
    pub moving: u64,
}

impl TravelCosts {
    /// Every movement edge costs 1.
    pub const UNIT: TravelCosts = TravelCosts {
        swap: 1,
        merge_split: 1,
        moving: 1,
    };

    /// A merge/split edge is crossed by a split in one direction and a merge in the other, so
    /// it is weighted by their mean.
    pub fn from_durations(d: &OperationDurations) -> Result<Self, CacheError> {
        let costs = TravelCosts {
            swap: d.swap_ns(),
            merge_split: (d.split_ns() + d.merge_ns()) / 2,
            moving: d.move_ns(),
        };
        costs.validate()?;
        Ok(costs)
    }

    pub fn validate(&self) -> Result<(), CacheError> {
        for (name, v) in [
            ("swap", self.swap),
            ("merge_split", self.merge_split),
            ("move", self.moving),
        ] {
            if v == 0 {
                return Err(CacheError::NonPositiveCost(name));
            }
        }
        Ok(())
    }

    /// Weight of an edge, or `None` when it carries no movement label.
    #[inline]
    pub fn weight(&self, caps: Capabilities) -> Option<u64> {
        caps.movement().map(|m| match m {
            EdgeCapability::Swap => self.swap,
            EdgeCapability::MergeSplit => self.merge_split,
            EdgeCapability::Move => self.moving,
            EdgeCapability::Execute => unreachable!(),
        })
    }
}

/// Travel times from `source` to every position (Dijkstra over movement edges).
pub fn single_source(
    graph: &PositionGraph,
    costs: &TravelCosts,
    source: PositionId,
) -> Vec<Option<u64>> {
    dijkstra(graph, costs, source)
        .into_iter()
        .map(|d| (d != UNREACHABLE).then_some(d))
        .collect()
}

fn dijkstra(graph: &PositionGraph, costs: &TravelCosts, source: PositionId) -> Vec<u64> {
    let mut dist = vec![UNREACHABLE; graph.num_positions()];
    let mut heap = BinaryHeap::new();
    dist[source.index()] = 0;
    heap.push(Reverse((0u64, source.0)));
    while let Some(Reverse((d, u))) = heap.pop() {
        if d > dist[u as usize] {
            continue;
        }
        for &(v, caps) in graph.neighbors(PositionId(u)) {
            if let Some(w) = costs.weight(caps) {
                let nd = d + w;
                if nd < dist[v.index()] {
                    dist[v.index()] = nd;
                    heap.push(Reverse((nd, v.0)));
                }
            }
        }
    }
    dist
}

/// Smallest movement neighbor of `s` that starts a shortest path to the position whose
/// distance column is `to_target`. Repeating this walk yields the lexicographically smallest
/// shortest path.
pub(crate) fn lex_next_hop(
    graph: &PositionGraph,
    costs: &TravelCosts,
    s: PositionId,
    to_target: impl Fn(PositionId) -> u64,
) -> Option<PositionId> {
    let ds = to_target(s);
    if ds == UNREACHABLE || ds == 0 {
        return None;
    }
    graph.neighbors(s).iter().find_map(|&(n, caps)| {
        let w = costs.weight(caps)?;
        let dn = to_target(n);
        (dn != UNREACHABLE && w + dn == ds).then_some(n)
    })
}

/// Walk a shortest path from `s` to `t` given distances *to* `t`. Uses the on-demand
/// single-source distances, so no cached table is required.
pub(crate) fn walk_path(
    graph: &PositionGraph,
    costs: &TravelCosts,
    s: PositionId,
    t: PositionId,
    to_target: &[u64],
) -> Option<Vec<PositionId>> {
    if to_target[s.index()] == UNREACHABLE {
        return None;
    }
    let mut path = vec![s];
    let mut cur = s;
    while cur != t {
        cur = lex_next_hop(graph, costs, cur, |p| to_target[p.index()])?;
        path.push(cur);
    }
    Some(path)
}

/// Distances to `t` from every position, as used by [`walk_path`].
pub(crate) fn distances_to(graph: &PositionGraph, costs: &TravelCosts, t: PositionId) -> Vec<u64> {
    // Edges are undirected, so distances to t equal distances from t.
    dijkstra(graph, costs, t)
}

/// Movement-hop distances from `source`.
pub(crate) fn bfs_hops(graph: &PositionGraph, source: PositionId) -> Vec<u32> {
    let mut hops = vec![NO_HOP; graph.num_positions()];
    let mut queue = VecDeque::new();
    hops[source.index()] = 0;
    queue.push_back(source);
    while let Some(u) = queue.pop_front() {
        let h = hops[u.index()] + 1;
        for v in graph.movement_neighbors(u) {
            if hops[v.index()] == NO_HOP {
                hops[v.index()] = h;
                queue.push_back(v);
            }
        }
    }
    hops
}

/// Fixed cost charged for clearing an occupied intermediate: a round trip over the cheapest
/// movement edge leaving the position.
pub(crate) fn clearing_penalty(graph: &PositionGraph, costs: &TravelCosts, p: PositionId) -> u64 {
    graph
        .neighbors(p)
        .iter()
        .filter_map(|&(_, caps)| costs.weight(caps))
        .min()
        .map_or(0, |w| 2 * w)
}

/// Intermediate positions of a source-target path with their fixed clearing penalties.
/// Independent of any placement.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockageProfile {
    pub source: PositionId,
    pub target: PositionId,
    pub intermediates: Vec<PositionId>,
    pub penalties: Vec<u64>,
}

impl BlockageProfile {
    pub(crate) fn from_path(path: &[PositionId], penalty: impl Fn(PositionId) -> u64) -> Self {
        let source = path[0];
        let target = *path.last().expect("non-empty path");
        let intermediates: Vec<PositionId> = if path.len() > 2 {
            path[1..path.len() - 1].to_vec()
        } else {
            Vec::new()
        };
        let penalties = intermediates.iter().map(|&p| penalty(p)).collect();
        Self {
            source,
            target,
            intermediates,
            penalties,
        }
    }

    /// Sum of penalties over intermediates that are currently occupied.
    pub fn occupied_penalty(&self, placement: &Placement) -> u64 {
        self.intermediates
            .iter()
            .zip(&self.penalties)
            .filter(|(p, _)| placement.is_occupied(**p))
            .map(|(_, w)| *w)
            .sum()
    }
}

/// Compilation-scoped memo of blockage profiles.
#[derive(Debug, Default)]
pub struct BlockageProfileStore {
    profiles: HashMap<(PositionId, PositionId), Arc<BlockageProfile>>,
    hits: u64,
    misses: u64,
}

impl BlockageProfileStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(
        &mut self,
        caches: &ArchCaches,
        source: PositionId,
        target: PositionId,
    ) -> Result<Arc<BlockageProfile>, CacheError> {
        if let Some(p) = self.profiles.get(&(source, target)) {
            self.hits += 1;
            return Ok(Arc::clone(p));
        }
        self.misses += 1;
        let profile = Arc::new(caches.blockage_profile(source, target)?);
        self.profiles.insert((source, target), Arc::clone(&profile));
        Ok(profile)
    }

    pub fn hits(&self) -> u64 {
        self.hits
    }

    /// Number of path reconstructions performed.
    pub fn misses(&self) -> u64 {
        self.misses
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }
}

/// Per-architecture tables computed once and shared by every pass and every compilation.
#[derive(Debug)]
pub struct ArchCaches {
    graph: Arc<PositionGraph>,
    costs: TravelCosts,
    n: usize,
    dist: Vec<u64>,
    next: Vec<u32>,
    hops: Vec<u32>,
    hop_diameter: u32,
    exec_adj: Vec<Vec<PositionId>>,
    nearest_trap: Vec<u64>,
    penalty: Vec<u64>,
}

impl ArchCaches {
    pub fn build(
        graph: impl Into<Arc<PositionGraph>>,
        costs: TravelCosts,
    ) -> Result<Self, CacheError> {
        costs.validate()?;
        let graph: Arc<PositionGraph> = graph.into();
        let n = graph.num_positions();

        let mut dist = Vec::with_capacity(n * n);
        for s in graph.positions() {
            dist.extend(dijkstra(&graph, &costs, s));
        }

        let mut next = vec![NO_HOP; n * n];
        for s in graph.positions() {
            for t in graph.positions() {
                let hop = lex_next_hop(&graph, &costs, s, |p| dist[p.index() * n + t.index()]);
                if let Some(h) = hop {
                    next[s.index() * n + t.index()] = h.0;
                }
            }
        }

        let mut hops = Vec::with_capacity(n * n);
        for s in graph.positions() {
            hops.extend(bfs_hops(&graph, s));
        }
        let hop_diameter = hops.iter().copied().filter(|&h| h != NO_HOP).max().unwrap_or(0);

        let exec_adj = graph
            .positions()
            .map(|p| {
                graph
                    .neighbors(p)
                    .iter()
                    .filter(|(_, c)| c.is_executable())
                    .map(|(q, _)| *q)
                    .collect()
            })
            .collect();

        let num_traps = graph.traps().len();
        let mut nearest_trap = vec![UNREACHABLE; n * num_traps];
        for v in 0..n {
            for trap in graph.traps() {
                let best = trap
                    .slots
                    .iter()
                    .map(|u| dist[v * n + u.index()])
                    .min()
                    .unwrap_or(UNREACHABLE);
                nearest_trap[v * num_traps + trap.id.index()] = best;
            }
        }

        let penalty = graph
            .positions()
            .map(|p| clearing_penalty(&graph, &costs, p))
            .collect();

        Ok(Self {
            graph,
            costs,
            n,
            dist,
            next,
            hops,
            hop_diameter,
            exec_adj,
            nearest_trap,
            penalty,
        })
    }

    pub fn graph(&self) -> &PositionGraph {
        &self.graph
    }

    pub fn shared_graph(&self) -> Arc<PositionGraph> {
        Arc::clone(&self.graph)
    }

    pub fn costs(&self) -> &TravelCosts {
        &self.costs
    }

    #[inline]
    pub fn dist(&self, s: PositionId, t: PositionId) -> Option<u64> {
        let d = self.dist[s.index() * self.n + t.index()];
        (d != UNREACHABLE).then_some(d)
    }

    /// Raw distance with `u64::MAX` for unreachable pairs; for hot loops inside the crate.
    #[inline]
    pub(crate) fn dist_raw(&self, s: PositionId, t: PositionId) -> u64 {
        self.dist[s.index() * self.n + t.index()]
    }

    #[inline]
    pub fn next_hop(&self, s: PositionId, t: PositionId) -> Option<PositionId> {
        let h = self.next[s.index() * self.n + t.index()];
        (h != NO_HOP).then_some(PositionId(h))
    }

    /// Lexicographically smallest shortest path from `s` to `t`, both endpoints included.
    pub fn path(&self, s: PositionId, t: PositionId) -> Option<Vec<PositionId>> {
        self.dist(s, t)?;
        let mut path = vec![s];
        let mut cur = s;
        while cur != t {
            cur = self.next_hop(cur, t)?;
            path.push(cur);
        }
        Some(path)
    }

    #[inline]
    pub fn hops(&self, s: PositionId, t: PositionId) -> Option<u32> {
        let h = self.hops[s.index() * self.n + t.index()];
        (h != NO_HOP).then_some(h)
    }

    /// Largest finite movement-hop distance.
    pub fn hop_diameter(&self) -> u32 {
        self.hop_diameter
    }

    pub fn exec_neighbors(&self, p: PositionId) -> &[PositionId] {
        &self.exec_adj[p.index()]
    }

    #[inline]
    pub fn exec_adjacent(&self, a: PositionId, b: PositionId) -> bool {
        self.exec_adj[a.index()].binary_search(&b).is_ok()
    }

    /// Minimal travel time from `v` to any slot of trap `t`.
    #[inline]
    pub fn nearest_trap(&self, v: PositionId, t: super::TrapId) -> Option<u64> {
        let d = self.nearest_trap[v.index() * self.graph.traps().len() + t.index()];
        (d != UNREACHABLE).then_some(d)
    }

    #[inline]
    pub fn penalty(&self, p: PositionId) -> u64 {
        self.penalty[p.index()]
    }

    /// Build a profile from the cached path. Callers that want memoization go through a
    /// [`BlockageProfileStore`].
    pub fn blockage_profile(
        &self,
        source: PositionId,
        target: PositionId,
    ) -> Result<BlockageProfile, CacheError> {
        let path = self
            .path(source, target)
            .ok_or(CacheError::Unreachable { from: source, target })?;
        Ok(BlockageProfile::from_path(&path, |p| self.penalty(p)))
    }

    /// True when `positions` induce a connected subgraph of the execute adjacency.
    pub fn exec_connected(&self, positions: &[PositionId]) -> bool {
        match positions {
            [] | [_] => true,
            [a, b] => self.exec_adjacent(*a, *b),
            _ => {
                let mut seen = vec![false; positions.len()];
                let mut stack = vec![0usize];
                seen[0] = true;
                let mut count = 1;
                while let Some(i) = stack.pop() {
                    for (j, &q) in positions.iter().enumerate() {
                        if !seen[j] && self.exec_adjacent(positions[i], q) {
                            seen[j] = true;
                            count += 1;
                            stack.push(j);
                        }
                    }
                }
                count == positions.len()
            }
        }
    }
}

/// Whether `gate` can fire under `placement`: its operand positions are connected through
/// execute edges.
pub fn can_execute(
    caches: &ArchCaches,
    gate: &Gate,
    placement: &Placement,
) -> Result<bool, PlacementError> {
    if gate.operands.len() <= 1 {
        return Ok(true);
    }
    let positions = gate
        .operands
        .iter()
        .map(|&q| placement.require(q))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(caches.exec_connected(&positions))
}

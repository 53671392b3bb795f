//! Distance, path and executability queries, answered either from [`ArchCaches`] or by
//! recomputing on every call. Both routes return identical values.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::sync::Arc;

use crate::graph::{
    caches, ArchCaches, BlockageProfile, BlockageProfileStore, PositionGraph, PositionId, TrapId,
    TravelCosts,
};

const UNREACHABLE: u64 = u64::MAX;

/// Source of geometric answers for the shuttle router.
pub enum Geometry<'a> {
    Cached(&'a ArchCaches),
    OnDemand {
        graph: &'a PositionGraph,
        costs: TravelCosts,
    },
}

impl<'a> Geometry<'a> {
    pub fn graph(&self) -> &'a PositionGraph {
        match self {
            Geometry::Cached(c) => c.graph(),
            Geometry::OnDemand { graph, .. } => graph,
        }
    }

    pub fn costs(&self) -> TravelCosts {
        match self {
            Geometry::Cached(c) => *c.costs(),
            Geometry::OnDemand { costs, .. } => *costs,
        }
    }

    pub fn is_cached(&self) -> bool {
        matches!(self, Geometry::Cached(_))
    }

    /// Travel time, `u64::MAX` when unreachable.
    pub fn dist(&self, a: PositionId, b: PositionId) -> u64 {
        match self {
            Geometry::Cached(c) => c.dist_raw(a, b),
            Geometry::OnDemand { graph, costs } => point_to_point(graph, costs, a, b),
        }
    }

    pub fn path(&self, a: PositionId, b: PositionId) -> Option<Vec<PositionId>> {
        match self {
            Geometry::Cached(c) => c.path(a, b),
            Geometry::OnDemand { graph, costs } => {
                let to_b = caches::distances_to(graph, costs, b);
                caches::walk_path(graph, costs, a, b, &to_b)
            }
        }
    }

    pub fn penalty(&self, p: PositionId) -> u64 {
        match self {
            Geometry::Cached(c) => c.penalty(p),
            Geometry::OnDemand { graph, costs } => caches::clearing_penalty(graph, costs, p),
        }
    }

    /// Uncached profile construction.
    pub fn profile(&self, a: PositionId, b: PositionId) -> Option<BlockageProfile> {
        let path = self.path(a, b)?;
        Some(BlockageProfile::from_path(&path, |p| self.penalty(p)))
    }

    /// Minimal travel time from `v` to any slot of `t`.
    pub fn nearest_trap(&self, v: PositionId, t: TrapId) -> u64 {
        match self {
            Geometry::Cached(c) => c.nearest_trap(v, t).unwrap_or(UNREACHABLE),
            Geometry::OnDemand { graph, costs } => {
                let from_v = caches::distances_to(graph, costs, v);
                graph
                    .trap(t)
                    .slots
                    .iter()
                    .map(|s| from_v[s.index()])
                    .min()
                    .unwrap_or(UNREACHABLE)
            }
        }
    }

    /// Connectivity of `positions` under execute edges.
    pub fn exec_connected(&self, positions: &[PositionId]) -> bool {
        match self {
            Geometry::Cached(c) => c.exec_connected(positions),
            Geometry::OnDemand { graph, .. } => induced_exec_connected(graph, positions),
        }
    }

    /// Largest finite movement-hop distance; bounds the clearing recursion.
    pub fn hop_diameter(&self) -> u32 {
        match self {
            Geometry::Cached(c) => c.hop_diameter(),
            Geometry::OnDemand { graph, .. } => graph
                .positions()
                .flat_map(|s| caches::bfs_hops(graph, s))
                .filter(|&h| h != u32::MAX)
                .max()
                .unwrap_or(0),
        }
    }
}

/// Dijkstra from `a`, stopping once `b` is settled.
fn point_to_point(graph: &PositionGraph, costs: &TravelCosts, a: PositionId, b: PositionId) -> u64 {
    if a == b {
        return 0;
    }
    let mut dist = vec![UNREACHABLE; graph.num_positions()];
    let mut heap = BinaryHeap::new();
    dist[a.index()] = 0;
    heap.push(Reverse((0u64, a.0)));
    while let Some(Reverse((d, u))) = heap.pop() {
        if u == b.0 {
            return d;
        }
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
    UNREACHABLE
}

/// Build the subgraph induced by `positions` under execute edges and test connectivity.
pub fn induced_exec_connected(graph: &PositionGraph, positions: &[PositionId]) -> bool {
    let k = positions.len();
    if k <= 1 {
        return true;
    }
    let mut seen = vec![false; k];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(i) = stack.pop() {
        for j in 0..k {
            if !seen[j]
                && graph
                    .edge_caps(positions[i], positions[j])
                    .is_some_and(|c| c.is_executable())
            {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// Blockage profiles, either memoized in a store or rebuilt on every request.
pub struct Profiles {
    store: Option<BlockageProfileStore>,
    rebuilt: u64,
}

impl Profiles {
    pub fn new(cached: bool) -> Self {
        Self {
            store: cached.then(BlockageProfileStore::new),
            rebuilt: 0,
        }
    }

    pub fn get(
        &mut self,
        geometry: &Geometry,
        a: PositionId,
        b: PositionId,
    ) -> Option<Arc<BlockageProfile>> {
        match (&mut self.store, geometry) {
            (Some(store), Geometry::Cached(c)) => store.get(c, a, b).ok(),
            _ => {
                self.rebuilt += 1;
                geometry.profile(a, b).map(Arc::new)
            }
        }
    }

    pub fn hits(&self) -> u64 {
        self.store.as_ref().map_or(0, BlockageProfileStore::hits)
    }

    pub fn builds(&self) -> u64 {
        self.rebuilt + self.store.as_ref().map_or(0, BlockageProfileStore::misses)
    }
}

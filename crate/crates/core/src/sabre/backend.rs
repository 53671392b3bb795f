//! Architecture backends for swap routing.
//!
//! [`CouplingBackend`] is the plain coupling-graph route: hop-count BFS distances and
//! induced-subgraph connectivity for executability. [`PositionBackend`] reads the shared
//! [`ArchCaches`]. On a swap-only graph the two agree on every query.

use std::collections::VecDeque;

use crate::graph::{ArchCaches, EdgeCapability, PositionGraph, PositionId};

pub(crate) const UNREACHABLE: u64 = u64::MAX;

pub trait SabreBackend {
    fn num_positions(&self) -> usize;

    /// Travel time between two positions, `u64::MAX` when disconnected.
    fn dist(&self, a: PositionId, b: PositionId) -> u64;

    /// Swap-capable neighbors, ascending.
    fn swap_neighbors(&self, p: PositionId) -> &[PositionId];

    /// Lexicographically smallest shortest path, endpoints included.
    fn path(&self, a: PositionId, b: PositionId) -> Option<Vec<PositionId>>;

    /// Whether the positions induce a connected execute subgraph.
    fn can_execute(&mut self, positions: &[PositionId]) -> bool;

    /// Hook called at the start of every routing pass.
    fn begin_pass(&mut self) {}

    fn can_execute_calls(&self) -> u64;

    fn apsp_computations(&self) -> u64;
}

fn swap_lists(graph: &PositionGraph) -> Vec<Vec<PositionId>> {
    graph
        .positions()
        .map(|p| {
            graph
                .neighbors(p)
                .iter()
                .filter(|(_, c)| c.contains(EdgeCapability::Swap))
                .map(|(q, _)| *q)
                .collect()
        })
        .collect()
}

fn lex_path(
    neighbors: &[Vec<PositionId>],
    weight: u64,
    dist: impl Fn(PositionId, PositionId) -> u64,
    a: PositionId,
    b: PositionId,
) -> Option<Vec<PositionId>> {
    if dist(a, b) == UNREACHABLE {
        return None;
    }
    let mut path = vec![a];
    let mut cur = a;
    while cur != b {
        let d = dist(cur, b);
        cur = *neighbors[cur.index()]
            .iter()
            .find(|&&n| dist(n, b) != UNREACHABLE && dist(n, b) + weight == d)?;
        path.push(cur);
    }
    Some(path)
}

/// Coupling-graph backend: hop distances scaled by the swap duration.
pub struct CouplingBackend {
    neighbors: Vec<Vec<PositionId>>,
    exec: Vec<Vec<PositionId>>,
    swap_ns: u64,
    hops: Vec<u32>,
    n: usize,
    recompute_each_pass: bool,
    apsp_computations: u64,
    can_execute_calls: u64,
}

impl CouplingBackend {
    pub fn new(graph: &PositionGraph, swap_ns: u64) -> Self {
        let exec = graph
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
        let mut backend = Self {
            neighbors: swap_lists(graph),
            exec,
            swap_ns,
            hops: Vec::new(),
            n: graph.num_positions(),
            recompute_each_pass: false,
            apsp_computations: 0,
            can_execute_calls: 0,
        };
        backend.compute_apsp();
        backend
    }

    /// Recompute all-pairs distances at the start of every pass, as an uncached baseline
    /// does. Routing decisions are unaffected; [`SabreBackend::apsp_computations`] then counts
    /// one computation per pass.
    pub fn with_per_pass_apsp(mut self) -> Self {
        self.recompute_each_pass = true;
        self.apsp_computations = 0;
        self
    }

    fn compute_apsp(&mut self) {
        let n = self.n;
        let mut hops = vec![u32::MAX; n * n];
        let mut queue = VecDeque::new();
        for s in 0..n {
            let row = &mut hops[s * n..(s + 1) * n];
            row[s] = 0;
            queue.push_back(s);
            while let Some(u) = queue.pop_front() {
                for v in &self.neighbors[u] {
                    if row[v.index()] == u32::MAX {
                        row[v.index()] = row[u] + 1;
                        queue.push_back(v.index());
                    }
                }
            }
        }
        self.hops = hops;
        self.apsp_computations += 1;
    }
}

impl SabreBackend for CouplingBackend {
    fn num_positions(&self) -> usize {
        self.n
    }

    #[inline]
    fn dist(&self, a: PositionId, b: PositionId) -> u64 {
        match self.hops[a.index() * self.n + b.index()] {
            u32::MAX => UNREACHABLE,
            h => h as u64 * self.swap_ns,
        }
    }

    fn swap_neighbors(&self, p: PositionId) -> &[PositionId] {
        &self.neighbors[p.index()]
    }

    fn path(&self, a: PositionId, b: PositionId) -> Option<Vec<PositionId>> {
        lex_path(&self.neighbors, self.swap_ns, |x, y| self.dist(x, y), a, b)
    }

    /// Builds the subgraph induced by `positions` and checks it is connected.
    fn can_execute(&mut self, positions: &[PositionId]) -> bool {
        self.can_execute_calls += 1;
        let k = positions.len();
        if k <= 1 {
            return true;
        }
        let mut induced: Vec<Vec<usize>> = vec![Vec::new(); k];
        for i in 0..k {
            for j in 0..k {
                if i != j && self.exec[positions[i].index()].contains(&positions[j]) {
                    induced[i].push(j);
                }
            }
        }
        let mut seen = vec![false; k];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        while let Some(u) = queue.pop_front() {
            for &v in &induced[u] {
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    fn begin_pass(&mut self) {
        if self.recompute_each_pass {
            self.compute_apsp();
        }
    }

    fn can_execute_calls(&self) -> u64 {
        self.can_execute_calls
    }

    fn apsp_computations(&self) -> u64 {
        self.apsp_computations
    }
}

/// Position-graph backend over the shared architecture caches.
pub struct PositionBackend<'a> {
    caches: &'a ArchCaches,
    neighbors: Vec<Vec<PositionId>>,
    can_execute_calls: u64,
}

impl<'a> PositionBackend<'a> {
    pub fn new(caches: &'a ArchCaches) -> Self {
        Self {
            caches,
            neighbors: swap_lists(caches.graph()),
            can_execute_calls: 0,
        }
    }
}

impl SabreBackend for PositionBackend<'_> {
    fn num_positions(&self) -> usize {
        self.neighbors.len()
    }

    #[inline]
    fn dist(&self, a: PositionId, b: PositionId) -> u64 {
        self.caches.dist_raw(a, b)
    }

    fn swap_neighbors(&self, p: PositionId) -> &[PositionId] {
        &self.neighbors[p.index()]
    }

    fn path(&self, a: PositionId, b: PositionId) -> Option<Vec<PositionId>> {
        self.caches.path(a, b)
    }

    fn can_execute(&mut self, positions: &[PositionId]) -> bool {
        self.can_execute_calls += 1;
        self.caches.exec_connected(positions)
    }

    fn can_execute_calls(&self) -> u64 {
        self.can_execute_calls
    }

    /// The caches are built once per architecture and shared by every pass.
    fn apsp_computations(&self) -> u64 {
        1
    }
}

//! The position graph: occupiable positions, labeled transitions between them and the trap
//! table, plus the placement that pairs it with a circuit and the per-architecture caches.

pub(crate) mod caches;
mod json;
mod placement;

use std::fmt;
use std::ops::BitOr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use caches::{
    can_execute, single_source, ArchCaches, BlockageProfile, BlockageProfileStore, CacheError,
    TravelCosts,
};
pub use json::GraphJsonError;
pub use placement::{Placement, PlacementError};

#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct PositionId(pub u32);

impl PositionId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<usize> for PositionId {
    fn from(value: usize) -> Self {
        PositionId(value as u32)
    }
}

impl fmt::Display for PositionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct TrapId(pub u32);

impl TrapId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for TrapId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t{}", self.0)
    }
}

/// A single edge label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeCapability {
    Swap,
    MergeSplit,
    Move,
    Execute,
}

impl EdgeCapability {
    pub const ALL: [EdgeCapability; 4] = [
        EdgeCapability::Swap,
        EdgeCapability::MergeSplit,
        EdgeCapability::Move,
        EdgeCapability::Execute,
    ];

    fn bit(self) -> u8 {
        match self {
            EdgeCapability::Swap => 1,
            EdgeCapability::MergeSplit => 2,
            EdgeCapability::Move => 4,
            EdgeCapability::Execute => 8,
        }
    }
}

/// Set of [`EdgeCapability`] labels carried by one edge.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct Capabilities(u8);

impl Capabilities {
    pub const NONE: Capabilities = Capabilities(0);
    pub const SWAP: Capabilities = Capabilities(1);
    pub const MERGE_SPLIT: Capabilities = Capabilities(2);
    pub const MOVE: Capabilities = Capabilities(4);
    pub const EXECUTE: Capabilities = Capabilities(8);
    const MOVEMENT_MASK: u8 = 1 | 2 | 4;

    pub fn contains(self, cap: EdgeCapability) -> bool {
        self.0 & cap.bit() != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn is_executable(self) -> bool {
        self.contains(EdgeCapability::Execute)
    }

    /// The movement label, if the edge carries exactly one.
    pub fn movement(self) -> Option<EdgeCapability> {
        match self.0 & Self::MOVEMENT_MASK {
            1 => Some(EdgeCapability::Swap),
            2 => Some(EdgeCapability::MergeSplit),
            4 => Some(EdgeCapability::Move),
            _ => None,
        }
    }

    pub fn is_movement(self) -> bool {
        self.0 & Self::MOVEMENT_MASK != 0
    }

    fn movement_label_count(self) -> u32 {
        (self.0 & Self::MOVEMENT_MASK).count_ones()
    }

    pub fn iter(self) -> impl Iterator<Item = EdgeCapability> {
        EdgeCapability::ALL
            .into_iter()
            .filter(move |c| self.contains(*c))
    }
}

impl From<EdgeCapability> for Capabilities {
    fn from(cap: EdgeCapability) -> Self {
        Capabilities(cap.bit())
    }
}

impl FromIterator<EdgeCapability> for Capabilities {
    fn from_iter<T: IntoIterator<Item = EdgeCapability>>(iter: T) -> Self {
        iter.into_iter()
            .fold(Capabilities::NONE, |acc, c| acc | c.into())
    }
}

impl BitOr for Capabilities {
    type Output = Capabilities;

    fn bitor(self, rhs: Self) -> Self {
        Capabilities(self.0 | rhs.0)
    }
}

/// Where a position lives.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Region {
    Slot { trap: TrapId, slot: u32 },
    Transport,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Edge {
    pub a: PositionId,
    pub b: PositionId,
    pub caps: Capabilities,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trap {
    pub id: TrapId,
    pub slots: Vec<PositionId>,
    pub executable: bool,
}

impl Trap {
    pub fn capacity(&self) -> usize {
        self.slots.len()
    }
}

/// Construction metadata for a junction: the transport positions whose pairwise move edges
/// realize it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Junction {
    pub id: u32,
    pub segments: Vec<PositionId>,
}

impl Junction {
    pub fn degree(&self) -> usize {
        self.segments.len()
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("edge {a}-{b} references a position outside the graph")]
    UnknownPosition { a: PositionId, b: PositionId },
    #[error("self-loop at {0}")]
    SelfLoop(PositionId),
    #[error("duplicate edge {a}-{b}")]
    DuplicateEdge { a: PositionId, b: PositionId },
    #[error("edge {a}-{b} carries no capability")]
    EmptyCapabilities { a: PositionId, b: PositionId },
    #[error("edge {a}-{b} carries more than one movement capability")]
    ConflictingMovement { a: PositionId, b: PositionId },
    #[error("trap table is inconsistent: {0}")]
    TrapTable(String),
    #[error("junction {0} references an unknown or non-transport position")]
    Junction(u32),
}

/// A labeled graph of positions with its trap table.
///
/// Immutable once built; shared freely between compilations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PositionGraph {
    regions: Vec<Region>,
    edges: Vec<Edge>,
    adjacency: Vec<Vec<(PositionId, Capabilities)>>,
    traps: Vec<Trap>,
    junctions: Vec<Junction>,
}

impl PositionGraph {
    /// Validate and assemble a graph. Edges keep their given order; adjacency lists are sorted.
    pub fn new(
        regions: Vec<Region>,
        edges: Vec<Edge>,
        traps: Vec<Trap>,
        junctions: Vec<Junction>,
    ) -> Result<Self, GraphError> {
        let n = regions.len();
        let mut adjacency: Vec<Vec<(PositionId, Capabilities)>> = vec![Vec::new(); n];
        for e in &edges {
            if e.a.index() >= n || e.b.index() >= n {
                return Err(GraphError::UnknownPosition { a: e.a, b: e.b });
            }
            if e.a == e.b {
                return Err(GraphError::SelfLoop(e.a));
            }
            if e.caps.is_empty() {
                return Err(GraphError::EmptyCapabilities { a: e.a, b: e.b });
            }
            if e.caps.movement_label_count() > 1 {
                return Err(GraphError::ConflictingMovement { a: e.a, b: e.b });
            }
            adjacency[e.a.index()].push((e.b, e.caps));
            adjacency[e.b.index()].push((e.a, e.caps));
        }
        for (p, list) in adjacency.iter_mut().enumerate() {
            list.sort_unstable_by_key(|(q, _)| *q);
            if let Some(w) = list.windows(2).find(|w| w[0].0 == w[1].0) {
                return Err(GraphError::DuplicateEdge {
                    a: PositionId::from(p),
                    b: w[0].0,
                });
            }
        }

        let mut seen = vec![false; n];
        for (i, trap) in traps.iter().enumerate() {
            if trap.id.index() != i {
                return Err(GraphError::TrapTable(format!(
                    "trap at index {i} has id {}",
                    trap.id
                )));
            }
            if trap.slots.is_empty() {
                return Err(GraphError::TrapTable(format!("{} has no slots", trap.id)));
            }
            for (slot, &p) in trap.slots.iter().enumerate() {
                let expected = Region::Slot {
                    trap: trap.id,
                    slot: slot as u32,
                };
                if p.index() >= n || regions[p.index()] != expected || seen[p.index()] {
                    return Err(GraphError::TrapTable(format!(
                        "{} slot {slot} maps to {p} inconsistently",
                        trap.id
                    )));
                }
                seen[p.index()] = true;
            }
        }
        for (p, region) in regions.iter().enumerate() {
            if matches!(region, Region::Slot { .. }) && !seen[p] {
                return Err(GraphError::TrapTable(format!(
                    "p{p} claims a trap slot that the trap table does not list"
                )));
            }
        }
        for j in &junctions {
            if j.segments
                .iter()
                .any(|s| s.index() >= n || regions[s.index()] != Region::Transport)
            {
                return Err(GraphError::Junction(j.id));
            }
        }
        Ok(Self {
            regions,
            edges,
            adjacency,
            traps,
            junctions,
        })
    }

    pub fn num_positions(&self) -> usize {
        self.regions.len()
    }

    pub fn positions(&self) -> impl Iterator<Item = PositionId> {
        (0..self.regions.len() as u32).map(PositionId)
    }

    pub fn region(&self, p: PositionId) -> Region {
        self.regions[p.index()]
    }

    pub fn trap_of(&self, p: PositionId) -> Option<TrapId> {
        match self.regions[p.index()] {
            Region::Slot { trap, .. } => Some(trap),
            Region::Transport => None,
        }
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Neighbors of `p` with the labels of the connecting edge, sorted by position.
    pub fn neighbors(&self, p: PositionId) -> &[(PositionId, Capabilities)] {
        &self.adjacency[p.index()]
    }

    pub fn movement_neighbors(&self, p: PositionId) -> impl Iterator<Item = PositionId> + '_ {
        self.adjacency[p.index()]
            .iter()
            .filter(|(_, c)| c.is_movement())
            .map(|(q, _)| *q)
    }

    pub fn edge_caps(&self, a: PositionId, b: PositionId) -> Option<Capabilities> {
        let list = self.adjacency.get(a.index())?;
        list.binary_search_by_key(&b, |(q, _)| *q)
            .ok()
            .map(|i| list[i].1)
    }

    pub fn traps(&self) -> &[Trap] {
        &self.traps
    }

    pub fn trap(&self, t: TrapId) -> &Trap {
        &self.traps[t.index()]
    }

    pub fn junctions(&self) -> &[Junction] {
        &self.junctions
    }

    pub fn num_slots(&self) -> usize {
        self.traps.iter().map(Trap::capacity).sum()
    }

    pub fn num_transport(&self) -> usize {
        self.regions
            .iter()
            .filter(|r| **r == Region::Transport)
            .count()
    }

    pub fn movement_edge_count(&self) -> usize {
        self.edges.iter().filter(|e| e.caps.is_movement()).count()
    }

    /// Total capacity of executable traps.
    pub fn executable_capacity(&self) -> usize {
        self.traps
            .iter()
            .filter(|t| t.executable)
            .map(Trap::capacity)
            .sum()
    }

    pub fn max_executable_capacity(&self) -> usize {
        self.traps
            .iter()
            .filter(|t| t.executable)
            .map(Trap::capacity)
            .max()
            .unwrap_or(0)
    }

    /// True when every movement edge is a swap edge, i.e. the graph is a coupling graph in
    /// disguise and swap routing applies.
    pub fn is_swap_only(&self) -> bool {
        self.edges
            .iter()
            .filter(|e| e.caps.is_movement())
            .all(|e| e.caps.contains(EdgeCapability::Swap))
    }

    /// Positions that belong to an executable trap.
    pub fn executable_positions(&self) -> Vec<PositionId> {
        self.traps
            .iter()
            .filter(|t| t.executable)
            .flat_map(|t| t.slots.iter().copied())
            .collect()
    }
}

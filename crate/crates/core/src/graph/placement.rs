use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{EdgeCapability, PositionGraph, PositionId};
use crate::circuit::Qudit;

#[derive(Debug, Error, PartialEq)]
pub enum PlacementError {
    #[error("qudit {0} is not placed")]
    Unplaced(Qudit),
    #[error("qudit {0} is already placed")]
    AlreadyPlaced(Qudit),
    #[error("qudit {0} is outside the placement")]
    UnknownQudit(Qudit),
    #[error("position {0} does not exist")]
    UnknownPosition(PositionId),
    #[error("position {0} is occupied")]
    Occupied(PositionId),
    #[error("{0} and {1} are not joined by an edge")]
    NotAnEdge(PositionId, PositionId),
    #[error("edge {a}-{b} does not carry {required:?}")]
    CapabilityMismatch {
        a: PositionId,
        b: PositionId,
        required: EdgeCapability,
    },
    #[error("edge {0}-{1} is not a movement edge")]
    NotMovement(PositionId, PositionId),
}

/// Partial bijection between logical qudits and positions.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "PlacementDoc", into = "PlacementDoc")]
pub struct Placement {
    forward: Vec<Option<PositionId>>,
    inverse: Vec<Option<Qudit>>,
}

#[derive(Serialize, Deserialize)]
struct PlacementDoc {
    num_positions: usize,
    positions: Vec<Option<PositionId>>,
}

impl From<Placement> for PlacementDoc {
    fn from(p: Placement) -> Self {
        PlacementDoc {
            num_positions: p.inverse.len(),
            positions: p.forward,
        }
    }
}

impl TryFrom<PlacementDoc> for Placement {
    type Error = PlacementError;

    fn try_from(doc: PlacementDoc) -> Result<Self, Self::Error> {
        let mut placement = Placement::new(doc.positions.len(), doc.num_positions);
        for (q, p) in doc.positions.into_iter().enumerate() {
            if let Some(p) = p {
                placement.place(q, p)?;
            }
        }
        Ok(placement)
    }
}

impl Placement {
    pub fn new(num_qudits: usize, num_positions: usize) -> Self {
        Self {
            forward: vec![None; num_qudits],
            inverse: vec![None; num_positions],
        }
    }

    /// Place qudit `i` at `positions[i]` for every `i`.
    pub fn from_positions(
        num_positions: usize,
        positions: &[PositionId],
    ) -> Result<Self, PlacementError> {
        let mut placement = Self::new(positions.len(), num_positions);
        for (q, &p) in positions.iter().enumerate() {
            placement.place(q, p)?;
        }
        Ok(placement)
    }

    pub fn num_qudits(&self) -> usize {
        self.forward.len()
    }

    pub fn num_positions(&self) -> usize {
        self.inverse.len()
    }

    #[inline]
    pub fn position_of(&self, q: Qudit) -> Option<PositionId> {
        self.forward.get(q).copied().flatten()
    }

    #[inline]
    pub fn occupant(&self, p: PositionId) -> Option<Qudit> {
        self.inverse.get(p.index()).copied().flatten()
    }

    #[inline]
    pub fn is_occupied(&self, p: PositionId) -> bool {
        self.occupant(p).is_some()
    }

    pub fn require(&self, q: Qudit) -> Result<PositionId, PlacementError> {
        self.position_of(q).ok_or(PlacementError::Unplaced(q))
    }

    /// Placed `(qudit, position)` pairs in qudit order.
    pub fn iter(&self) -> impl Iterator<Item = (Qudit, PositionId)> + '_ {
        self.forward
            .iter()
            .enumerate()
            .filter_map(|(q, p)| p.map(|p| (q, p)))
    }

    pub fn place(&mut self, q: Qudit, p: PositionId) -> Result<(), PlacementError> {
        if q >= self.forward.len() {
            return Err(PlacementError::UnknownQudit(q));
        }
        if p.index() >= self.inverse.len() {
            return Err(PlacementError::UnknownPosition(p));
        }
        if self.forward[q].is_some() {
            return Err(PlacementError::AlreadyPlaced(q));
        }
        if self.inverse[p.index()].is_some() {
            return Err(PlacementError::Occupied(p));
        }
        self.forward[q] = Some(p);
        self.inverse[p.index()] = Some(q);
        Ok(())
    }

    /// Move `q` across a movement edge into an empty position.
    pub fn apply_move(
        &mut self,
        graph: &PositionGraph,
        q: Qudit,
        to: PositionId,
    ) -> Result<(), PlacementError> {
        if to.index() >= self.inverse.len() {
            return Err(PlacementError::UnknownPosition(to));
        }
        let from = self.require(q)?;
        let caps = graph
            .edge_caps(from, to)
            .ok_or(PlacementError::NotAnEdge(from, to))?;
        if !caps.is_movement() {
            return Err(PlacementError::NotMovement(from, to));
        }
        if self.inverse[to.index()].is_some() {
            return Err(PlacementError::Occupied(to));
        }
        self.inverse[from.index()] = None;
        self.inverse[to.index()] = Some(q);
        self.forward[q] = Some(to);
        Ok(())
    }

    /// Exchange the occupants of two positions joined by a swap edge. Either may be empty.
    pub fn apply_swap(
        &mut self,
        graph: &PositionGraph,
        a: PositionId,
        b: PositionId,
    ) -> Result<(), PlacementError> {
        for p in [a, b] {
            if p.index() >= self.inverse.len() {
                return Err(PlacementError::UnknownPosition(p));
            }
        }
        let caps = graph.edge_caps(a, b).ok_or(PlacementError::NotAnEdge(a, b))?;
        if !caps.contains(EdgeCapability::Swap) {
            return Err(PlacementError::CapabilityMismatch {
                a,
                b,
                required: EdgeCapability::Swap,
            });
        }
        self.swap_unchecked(a, b);
        Ok(())
    }

    /// Exchange occupants without consulting the graph.
    #[inline]
    pub(crate) fn swap_unchecked(&mut self, a: PositionId, b: PositionId) {
        let qa = self.inverse[a.index()];
        let qb = self.inverse[b.index()];
        self.inverse[a.index()] = qb;
        self.inverse[b.index()] = qa;
        if let Some(q) = qa {
            self.forward[q] = Some(b);
        }
        if let Some(q) = qb {
            self.forward[q] = Some(a);
        }
    }

    /// Forward and inverse maps agree.
    pub fn is_consistent(&self) -> bool {
        self.forward.iter().enumerate().all(|(q, p)| match p {
            Some(p) => self.inverse.get(p.index()) == Some(&Some(q)),
            None => true,
        }) && self.inverse.iter().enumerate().all(|(p, q)| match q {
            Some(q) => self.forward.get(*q) == Some(&Some(PositionId::from(p))),
            None => true,
        })
    }
}

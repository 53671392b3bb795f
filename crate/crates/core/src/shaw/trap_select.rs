//! Choosing the trap in which a stuck gate should execute.
//!
//! Exact score of a trap: the cheapest assignment of the gate's outside operands to distinct
//! slots (operands already inside keep theirs), each costing travel time, the penalties of
//! occupied path intermediates, and a clearing penalty when the slot holds a bystander. The
//! lower bound sums nearest-slot travel times and so never exceeds the exact score. Both are
//! reduced by the same occupancy bonus.

use serde::{Deserialize, Serialize};

use super::geometry::{Geometry, Profiles};
use super::ShawError;
use crate::circuit::Qudit;
use crate::graph::{Placement, PositionId, TrapId};

type Assignment = Vec<(Qudit, PositionId)>;

const UNREACHABLE: u64 = u64::MAX;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrapScore {
    pub trap: TrapId,
    pub lower_bound: u64,
    pub exact: Option<u64>,
    pub occupancy_bonus: u64,
}

impl TrapScore {
    /// Lower bound minus bonus; `i64::MAX` when some operand cannot reach the trap.
    pub fn adjusted_lower_bound(&self) -> i64 {
        if self.lower_bound == UNREACHABLE {
            i64::MAX
        } else {
            self.lower_bound as i64 - self.occupancy_bonus as i64
        }
    }

    pub fn adjusted_exact(&self) -> Option<i64> {
        self.exact.map(|e| e as i64 - self.occupancy_bonus as i64)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrapChoice {
    pub trap: TrapId,
    /// Target slot of every operand that is outside the trap, in operand order.
    pub assignment: Vec<(Qudit, PositionId)>,
    pub score: TrapScore,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrapSelection {
    pub choice: TrapChoice,
    /// Every eligible trap, with `exact` filled for those that were scored.
    pub scores: Vec<TrapScore>,
    pub pruned: usize,
}

/// `free_slots * swap / capacity`.
pub fn occupancy_bonus(geometry: &Geometry, placement: &Placement, trap: TrapId) -> u64 {
    let t = geometry.graph().trap(trap);
    let free = t.slots.iter().filter(|&&s| !placement.is_occupied(s)).count() as u64;
    free * geometry.costs().swap / t.capacity() as u64
}

pub fn trap_lower_bound(geometry: &Geometry, positions: &[PositionId], trap: TrapId) -> u64 {
    positions
        .iter()
        .map(|&p| geometry.nearest_trap(p, trap))
        .try_fold(0u64, |acc, d| (d != UNREACHABLE).then(|| acc + d))
        .unwrap_or(UNREACHABLE)
}

/// Cheapest distinct-slot assignment, or `None` when no assignment is reachable.
pub fn exact_trap_score(
    geometry: &Geometry,
    profiles: &mut Profiles,
    placement: &Placement,
    operands: &[Qudit],
    trap: TrapId,
) -> Option<(u64, Vec<(Qudit, PositionId)>)> {
    let graph = geometry.graph();
    let t = graph.trap(trap);
    if t.capacity() < operands.len() {
        return None;
    }
    let position = |q: Qudit| placement.position_of(q).expect("operands are placed");
    let incoming: Vec<Qudit> = operands
        .iter()
        .copied()
        .filter(|&q| graph.trap_of(position(q)) != Some(trap))
        .collect();
    let slots: Vec<PositionId> = t
        .slots
        .iter()
        .copied()
        .filter(|&s| placement.occupant(s).is_none_or(|o| !operands.contains(&o)))
        .collect();
    // cost[i][j]: moving incoming[i] into slots[j].
    let mut cost = vec![vec![UNREACHABLE; slots.len()]; incoming.len()];
    for (i, &q) in incoming.iter().enumerate() {
        let src = position(q);
        for (j, &s) in slots.iter().enumerate() {
            let d = geometry.dist(src, s);
            if d == UNREACHABLE {
                continue;
            }
            let Some(profile) = profiles.get(geometry, src, s) else {
                continue;
            };
            let evict = if placement.is_occupied(s) {
                geometry.penalty(s)
            } else {
                0
            };
            cost[i][j] = d + profile.occupied_penalty(placement) + evict;
        }
    }
    let mut best: Option<(u64, Vec<usize>)> = None;
    let mut chosen = Vec::with_capacity(incoming.len());
    let mut used = vec![false; slots.len()];
    assign(&cost, 0, 0, &mut used, &mut chosen, &mut best);
    best.map(|(c, picks)| {
        let assignment = incoming
            .iter()
            .zip(picks)
            .map(|(&q, j)| (q, slots[j]))
            .collect();
        (c, assignment)
    })
}

/// Enumerate assignments in lexicographic slot order, keeping the first minimum.
fn assign(
    cost: &[Vec<u64>],
    i: usize,
    acc: u64,
    used: &mut [bool],
    chosen: &mut Vec<usize>,
    best: &mut Option<(u64, Vec<usize>)>,
) {
    if i == cost.len() {
        if best.as_ref().is_none_or(|(b, _)| acc < *b) {
            *best = Some((acc, chosen.clone()));
        }
        return;
    }
    for j in 0..used.len() {
        if used[j] || cost[i][j] == UNREACHABLE {
            continue;
        }
        used[j] = true;
        chosen.push(j);
        assign(cost, i + 1, acc + cost[i][j], used, chosen, best);
        chosen.pop();
        used[j] = false;
    }
}

/// Pick the trap with the smallest adjusted exact score, ties to the lowest id. With `prune`,
/// traps are visited by adjusted lower bound and the scan stops once the next bound exceeds
/// the best score found; the result is the same as scoring every trap.
pub fn select_target_trap(
    geometry: &Geometry,
    profiles: &mut Profiles,
    placement: &Placement,
    operands: &[Qudit],
    prune: bool,
) -> Result<TrapSelection, ShawError> {
    let graph = geometry.graph();
    let positions: Vec<PositionId> = operands
        .iter()
        .map(|&q| placement.position_of(q).expect("operands are placed"))
        .collect();
    let mut scores: Vec<TrapScore> = graph
        .traps()
        .iter()
        .filter(|t| t.executable && t.capacity() >= operands.len())
        .map(|t| TrapScore {
            trap: t.id,
            lower_bound: if prune {
                trap_lower_bound(geometry, &positions, t.id)
            } else {
                0
            },
            exact: None,
            occupancy_bonus: occupancy_bonus(geometry, placement, t.id),
        })
        .collect();
    if scores.is_empty() {
        return Err(ShawError::NoMultiSlotTrap {
            arity: operands.len(),
        });
    }
    if prune {
        scores.sort_by_key(|s| (s.adjusted_lower_bound(), s.trap));
    }

    let mut best: Option<(i64, TrapId, Assignment)> = None;
    let mut pruned = 0;
    for k in 0..scores.len() {
        if prune && scores[k].lower_bound == UNREACHABLE {
            pruned = scores.len() - k;
            break;
        }
        if let Some((b, ..)) = &best {
            if prune && scores[k].adjusted_lower_bound() > *b {
                pruned = scores.len() - k;
                break;
            }
        }
        let Some((exact, assignment)) =
            exact_trap_score(geometry, profiles, placement, operands, scores[k].trap)
        else {
            continue;
        };
        scores[k].exact = Some(exact);
        let adjusted = scores[k].adjusted_exact().unwrap();
        let better = best
            .as_ref()
            .is_none_or(|(b, id, _)| (adjusted, scores[k].trap) < (*b, *id));
        if better {
            best = Some((adjusted, scores[k].trap, assignment));
        }
    }
    let (_, trap, assignment) = best.ok_or(ShawError::Unreachable)?;
    let score = scores
        .iter()
        .find(|s| s.trap == trap)
        .cloned()
        .expect("chosen trap was scored");
    Ok(TrapSelection {
        choice: TrapChoice {
            trap,
            assignment,
            score,
        },
        scores,
        pruned,
    })
}

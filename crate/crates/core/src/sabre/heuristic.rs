//! The SABRE cost `H = (1/|F|) sum_F dist + w (1/|E|) sum_E dist` and its incremental update.
//!
//! Sums are kept as exact integers; the float value is derived from them with one fixed
//! formula, so the incremental and the from-scratch paths produce the same bits.

use crate::circuit::Qudit;
use crate::graph::{Placement, PositionId};

/// Two-qudit interactions that make up the front and lookahead terms.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct HeuristicTerms {
    pub front: Vec<(Qudit, Qudit)>,
    pub lookahead: Vec<(Qudit, Qudit)>,
    pub extended_weight: f64,
}

impl HeuristicTerms {
    /// `H` for the given integer sums.
    #[inline]
    pub fn value(&self, front_sum: u64, lookahead_sum: u64) -> f64 {
        let mut h = 0.0;
        if !self.front.is_empty() {
            h += front_sum as f64 / self.front.len() as f64;
        }
        if !self.lookahead.is_empty() {
            h += self.extended_weight * (lookahead_sum as f64 / self.lookahead.len() as f64);
        }
        h
    }
}

fn pos(placement: &Placement, q: Qudit) -> PositionId {
    placement
        .position_of(q)
        .expect("heuristic terms only reference placed qudits")
}

fn pair_sum(
    pairs: &[(Qudit, Qudit)],
    dist: &impl Fn(PositionId, PositionId) -> u64,
    placement: &Placement,
) -> u64 {
    pairs
        .iter()
        .map(|&(x, y)| dist(pos(placement, x), pos(placement, y)))
        .sum()
}

/// Recompute `H` from scratch.
pub fn full_heuristic(
    terms: &HeuristicTerms,
    dist: impl Fn(PositionId, PositionId) -> u64,
    placement: &Placement,
) -> f64 {
    terms.value(
        pair_sum(&terms.front, &dist, placement),
        pair_sum(&terms.lookahead, &dist, placement),
    )
}

/// Integer sums plus, per qudit, the terms it participates in.
#[derive(Clone, Debug, Default)]
pub struct HeuristicState {
    pub terms: HeuristicTerms,
    front_sum: u64,
    lookahead_sum: u64,
    touching: Vec<Vec<(u32, bool)>>,
}

impl HeuristicState {
    pub fn new(
        terms: HeuristicTerms,
        num_qudits: usize,
        dist: impl Fn(PositionId, PositionId) -> u64,
        placement: &Placement,
    ) -> Self {
        let mut touching = vec![Vec::new(); num_qudits];
        for (i, &(x, y)) in terms.front.iter().enumerate() {
            touching[x].push((i as u32, true));
            touching[y].push((i as u32, true));
        }
        for (i, &(x, y)) in terms.lookahead.iter().enumerate() {
            touching[x].push((i as u32, false));
            touching[y].push((i as u32, false));
        }
        Self {
            front_sum: pair_sum(&terms.front, &dist, placement),
            lookahead_sum: pair_sum(&terms.lookahead, &dist, placement),
            terms,
            touching,
        }
    }

    pub fn value(&self) -> f64 {
        self.terms.value(self.front_sum, self.lookahead_sum)
    }

    pub fn sums(&self) -> (u64, u64) {
        (self.front_sum, self.lookahead_sum)
    }

    /// Sums after exchanging the occupants of `a` and `b`, touching only the terms of the two
    /// moved qudits.
    pub fn sums_after_swap(
        &self,
        dist: impl Fn(PositionId, PositionId) -> u64,
        placement: &Placement,
        a: PositionId,
        b: PositionId,
    ) -> (u64, u64) {
        let mut df: i64 = 0;
        let mut de: i64 = 0;
        let qa = placement.occupant(a);
        let qb = placement.occupant(b);
        for (q, from, to, other) in [(qa, a, b, qb), (qb, b, a, qa)] {
            let Some(q) = q else { continue };
            for &(i, front) in &self.touching[q] {
                let (x, y) = if front {
                    self.terms.front[i as usize]
                } else {
                    self.terms.lookahead[i as usize]
                };
                let partner = if x == q { y } else { x };
                if Some(partner) == other {
                    // Both operands trade places; the distance is symmetric.
                    continue;
                }
                let p = pos(placement, partner);
                let change = dist(to, p) as i64 - dist(from, p) as i64;
                if front {
                    df += change;
                } else {
                    de += change;
                }
            }
        }
        (
            (self.front_sum as i64 + df) as u64,
            (self.lookahead_sum as i64 + de) as u64,
        )
    }

    /// Sums after moving qudit `q` alone to `to`, leaving every other qudit in place.
    pub fn sums_after_relocate(
        &self,
        dist: impl Fn(PositionId, PositionId) -> u64,
        placement: &Placement,
        q: Qudit,
        to: PositionId,
    ) -> (u64, u64) {
        let from = pos(placement, q);
        let mut df: i64 = 0;
        let mut de: i64 = 0;
        for &(i, front) in &self.touching[q] {
            let (x, y) = if front {
                self.terms.front[i as usize]
            } else {
                self.terms.lookahead[i as usize]
            };
            let p = pos(placement, if x == q { y } else { x });
            let change = dist(to, p) as i64 - dist(from, p) as i64;
            if front {
                df += change;
            } else {
                de += change;
            }
        }
        (
            (self.front_sum as i64 + df) as u64,
            (self.lookahead_sum as i64 + de) as u64,
        )
    }

    /// `H` after the swap minus `H` before.
    pub fn heuristic_delta(
        &self,
        dist: impl Fn(PositionId, PositionId) -> u64,
        placement: &Placement,
        a: PositionId,
        b: PositionId,
    ) -> f64 {
        let (f, e) = self.sums_after_swap(dist, placement, a, b);
        self.terms.value(f, e) - self.value()
    }

    /// Commit a swap that has already been applied to `placement`.
    pub(crate) fn set_sums(&mut self, sums: (u64, u64)) {
        self.front_sum = sums.0;
        self.lookahead_sum = sums.1;
    }
}

//! Local congestion scoring for clearing moves, with the two-level memo: scoring sets keyed by
//! `(p, t, b, d)` for the whole compilation, scores keyed by `(p, t, b, d, sigma)` per episode.

use std::collections::{HashMap, VecDeque};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::graph::{Placement, PositionGraph, PositionId};

/// `(p, t, b, d)`: candidate position, local target, blockage, depth.
pub type ScoringKey = (PositionId, PositionId, PositionId, u32);

/// Positions within `d` movement steps of `p`, excluding `p`, `t` and `b`, ascending, with
/// their hop distance from `p`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LocalScoringSet {
    pub key: ScoringKey,
    pub members: Vec<PositionId>,
    pub hops: Vec<u32>,
}

pub fn local_scoring_set(
    graph: &PositionGraph,
    p: PositionId,
    t: PositionId,
    b: PositionId,
    d: u32,
) -> LocalScoringSet {
    let mut hop = vec![u32::MAX; graph.num_positions()];
    let mut queue = VecDeque::new();
    hop[p.index()] = 0;
    queue.push_back(p);
    let mut found = Vec::new();
    while let Some(u) = queue.pop_front() {
        let h = hop[u.index()];
        if h == d {
            continue;
        }
        for v in graph.movement_neighbors(u) {
            if hop[v.index()] == u32::MAX {
                hop[v.index()] = h + 1;
                queue.push_back(v);
                if v != t && v != b {
                    found.push(v);
                }
            }
        }
    }
    found.sort_unstable();
    let hops = found.iter().map(|m| hop[m.index()]).collect();
    LocalScoringSet {
        key: (p, t, b, d),
        members: found,
        hops,
    }
}

/// Occupied positions among `{p}` and the scoring set, ascending.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct OccupancySignature(pub Vec<PositionId>);

impl OccupancySignature {
    pub fn of(set: &LocalScoringSet, placement: &Placement) -> Self {
        let p = set.key.0;
        let mut sigma: Vec<PositionId> = set
            .members
            .iter()
            .copied()
            .filter(|&m| placement.is_occupied(m))
            .collect();
        if placement.is_occupied(p) {
            let at = sigma.partition_point(|&m| m < p);
            sigma.insert(at, p);
        }
        Self(sigma)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CongestionScore {
    /// Occupied members over all members; zero for an empty set.
    pub fraction: f64,
    /// Sum of `1 / (1 + hops(p, m))` over occupied members `m`.
    pub weighted: f64,
}

/// Score a scoring set against the placement by scanning every member.
pub fn scan_congestion(set: &LocalScoringSet, placement: &Placement) -> CongestionScore {
    let mut occupied = 0usize;
    let mut weighted = 0.0;
    for (m, h) in set.members.iter().zip(&set.hops) {
        if placement.is_occupied(*m) {
            occupied += 1;
            weighted += 1.0 / (1.0 + *h as f64);
        }
    }
    let fraction = if set.members.is_empty() {
        0.0
    } else {
        occupied as f64 / set.members.len() as f64
    };
    CongestionScore { fraction, weighted }
}

/// Score computed from a signature alone; equal to [`scan_congestion`] because the signature
/// lists exactly the occupied members.
fn score_from_signature(set: &LocalScoringSet, sigma: &OccupancySignature) -> CongestionScore {
    let p = set.key.0;
    let mut occupied = 0usize;
    let mut weighted = 0.0;
    let mut it = sigma.0.iter().copied().filter(|&m| m != p).peekable();
    for (m, h) in set.members.iter().zip(&set.hops) {
        if it.peek() == Some(m) {
            it.next();
            occupied += 1;
            weighted += 1.0 / (1.0 + *h as f64);
        }
    }
    let fraction = if set.members.is_empty() {
        0.0
    } else {
        occupied as f64 / set.members.len() as f64
    };
    CongestionScore { fraction, weighted }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CongestionCounters {
    pub episodes: u64,
    pub scoring_set_hits: u64,
    pub scoring_set_misses: u64,
    pub score_hits: u64,
    pub score_misses: u64,
    /// Episodes that began with a non-empty score memo. Always zero.
    pub dirty_episode_starts: u64,
}

/// Congestion scorer with individually switchable caches.
pub struct CongestionScorer {
    cache_sets: bool,
    cache_scores: bool,
    sets: HashMap<ScoringKey, Arc<LocalScoringSet>>,
    scores: HashMap<(ScoringKey, OccupancySignature), CongestionScore>,
    in_episode: bool,
    pub counters: CongestionCounters,
}

impl CongestionScorer {
    pub fn new(cache_sets: bool, cache_scores: bool) -> Self {
        Self {
            cache_sets,
            cache_scores,
            sets: HashMap::new(),
            scores: HashMap::new(),
            in_episode: false,
            counters: CongestionCounters::default(),
        }
    }

    /// Open a congestion-resolution episode with a fresh score memo.
    pub fn begin_episode(&mut self) {
        if !self.scores.is_empty() {
            self.counters.dirty_episode_starts += 1;
        }
        self.in_episode = true;
        self.counters.episodes += 1;
    }

    /// Close the episode and discard its score memo.
    pub fn end_episode(&mut self) {
        self.scores.clear();
        self.in_episode = false;
    }

    pub fn memo_len(&self) -> usize {
        self.scores.len()
    }

    pub fn scoring_set(
        &mut self,
        graph: &PositionGraph,
        key: ScoringKey,
    ) -> Arc<LocalScoringSet> {
        let (p, t, b, d) = key;
        if !self.cache_sets {
            self.counters.scoring_set_misses += 1;
            return Arc::new(local_scoring_set(graph, p, t, b, d));
        }
        if let Some(set) = self.sets.get(&key) {
            self.counters.scoring_set_hits += 1;
            return Arc::clone(set);
        }
        self.counters.scoring_set_misses += 1;
        let set = Arc::new(local_scoring_set(graph, p, t, b, d));
        self.sets.insert(key, Arc::clone(&set));
        set
    }

    pub fn score(
        &mut self,
        graph: &PositionGraph,
        key: ScoringKey,
        placement: &Placement,
    ) -> CongestionScore {
        let set = self.scoring_set(graph, key);
        if !(self.cache_scores && self.in_episode) {
            self.counters.score_misses += 1;
            return scan_congestion(&set, placement);
        }
        let sigma = OccupancySignature::of(&set, placement);
        if let Some(score) = self.scores.get(&(key, sigma.clone())) {
            self.counters.score_hits += 1;
            return *score;
        }
        self.counters.score_misses += 1;
        let score = score_from_signature(&set, &sigma);
        self.scores.insert((key, sigma), score);
        score
    }
}

//! Independent reference implementations and the randomized equivalence checks built on them.
//!
//! Every oracle here reads the graph only through its edge list and trap table, never
//! through the cached tables it is compared against. Each `check_*` returns a one-line
//! summary on success and the first mismatch on failure.

#![allow(dead_code, clippy::needless_range_loop, clippy::type_complexity)]

use std::collections::{BTreeSet, VecDeque};

use posgraph::builder::{build_coupling, build_grid, lattice_coupling, CouplingSpec, GridSpec};
use posgraph::circuit::Qudit;
use posgraph::graph::{
    can_execute, ArchCaches, EdgeCapability, Placement, PositionGraph, PositionId, Region,
    TrapId, TravelCosts,
};
use posgraph::sabre::{HeuristicState, HeuristicTerms};
use posgraph::schedule::OperationDurations;
use posgraph::shaw::{
    induced_exec_connected, local_scoring_set, score_move, select_target_trap, CongestionScorer,
    Geometry, Profiles,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Check = Result<String, String>;

fn pid(i: usize) -> PositionId {
    PositionId(i as u32)
}

pub fn default_costs() -> TravelCosts {
    TravelCosts::from_durations(&OperationDurations::default()).unwrap()
}

/// Travel weight of an edge read from its capability set.
pub fn edge_weight(costs: &TravelCosts, caps: &[EdgeCapability]) -> Option<u64> {
    if caps.contains(&EdgeCapability::Swap) {
        Some(costs.swap)
    } else if caps.contains(&EdgeCapability::MergeSplit) {
        Some(costs.merge_split)
    } else if caps.contains(&EdgeCapability::Move) {
        Some(costs.moving)
    } else {
        None
    }
}

/// Weighted movement adjacency built from the edge list.
pub fn weighted_adjacency(graph: &PositionGraph, costs: &TravelCosts) -> Vec<Vec<(usize, u64)>> {
    let mut adj = vec![Vec::new(); graph.num_positions()];
    for e in graph.edges() {
        let caps: Vec<EdgeCapability> = e.caps.iter().collect();
        if let Some(w) = edge_weight(costs, &caps) {
            adj[e.a.index()].push((e.b.index(), w));
            adj[e.b.index()].push((e.a.index(), w));
        }
    }
    adj
}

/// All-pairs travel times by Floyd–Warshall; `None` when unreachable.
pub fn floyd_warshall(graph: &PositionGraph, costs: &TravelCosts) -> Vec<Vec<Option<u64>>> {
    let n = graph.num_positions();
    let mut d = vec![vec![None; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = Some(0);
    }
    for (a, list) in weighted_adjacency(graph, costs).iter().enumerate() {
        for &(b, w) in list {
            if d[a][b].is_none_or(|x| w < x) {
                d[a][b] = Some(w);
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            let Some(ik) = d[i][k] else { continue };
            for j in 0..n {
                if let Some(kj) = d[k][j] {
                    if d[i][j].is_none_or(|x| ik + kj < x) {
                        d[i][j] = Some(ik + kj);
                    }
                }
            }
        }
    }
    d
}

/// Fixed clearing penalty: a round trip over the position's cheapest movement edge.
pub fn penalty_oracle(adj: &[Vec<(usize, u64)>], p: usize) -> u64 {
    adj[p].iter().map(|&(_, w)| w).min().map_or(0, |w| 2 * w)
}

/// Connectivity of the subgraph induced by `positions` over the graph's execute edges.
pub fn induced_connected(graph: &PositionGraph, positions: &[PositionId]) -> bool {
    if positions.len() <= 1 {
        return true;
    }
    let inside: BTreeSet<PositionId> = positions.iter().copied().collect();
    let mut adj: Vec<Vec<PositionId>> = vec![Vec::new(); graph.num_positions()];
    for e in graph.edges() {
        if e.caps.contains(EdgeCapability::Execute) && inside.contains(&e.a) && inside.contains(&e.b)
        {
            adj[e.a.index()].push(e.b);
            adj[e.b.index()].push(e.a);
        }
    }
    let mut seen = BTreeSet::from([positions[0]]);
    let mut queue = VecDeque::from([positions[0]]);
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u.index()] {
            if seen.insert(v) {
                queue.push_back(v);
            }
        }
    }
    seen.len() == inside.len()
}

/// Positions within `d` movement hops of `p`, minus `p`, `t` and `b`, with their hop counts.
pub fn bfs_scoring_set(
    graph: &PositionGraph,
    p: PositionId,
    t: PositionId,
    b: PositionId,
    d: u32,
) -> Vec<(PositionId, u32)> {
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); graph.num_positions()];
    for e in graph.edges() {
        if e.caps.is_movement() {
            adj[e.a.index()].push(e.b.index());
            adj[e.b.index()].push(e.a.index());
        }
    }
    let mut hop = vec![u32::MAX; graph.num_positions()];
    hop[p.index()] = 0;
    let mut queue = VecDeque::from([p.index()]);
    while let Some(u) = queue.pop_front() {
        if hop[u] == d {
            continue;
        }
        for &v in &adj[u] {
            if hop[v] == u32::MAX {
                hop[v] = hop[u] + 1;
                queue.push_back(v);
            }
        }
    }
    (0..graph.num_positions())
        .filter(|&v| hop[v] != u32::MAX && v != p.index() && v != t.index() && v != b.index())
        .map(|v| (pid(v), hop[v]))
        .collect()
}

/// `(fraction, weighted)` by scanning the members against the placement.
pub fn congestion_oracle(members: &[(PositionId, u32)], placement: &Placement) -> (f64, f64) {
    let occupied: Vec<u32> = members
        .iter()
        .filter(|(m, _)| placement.is_occupied(*m))
        .map(|&(_, h)| h)
        .collect();
    let fraction = if members.is_empty() {
        0.0
    } else {
        occupied.len() as f64 / members.len() as f64
    };
    let weighted = occupied.iter().map(|&h| 1.0 / (1.0 + h as f64)).sum();
    (fraction, weighted)
}

/// `H` computed directly from a distance table.
pub fn h_oracle(
    dist: &[Vec<Option<u64>>],
    front: &[(Qudit, Qudit)],
    lookahead: &[(Qudit, Qudit)],
    w: f64,
    placement: &Placement,
) -> f64 {
    let sum = |pairs: &[(Qudit, Qudit)]| -> f64 {
        pairs
            .iter()
            .map(|&(x, y)| {
                let a = placement.position_of(x).unwrap().index();
                let b = placement.position_of(y).unwrap().index();
                dist[a][b].unwrap() as f64
            })
            .sum()
    };
    let mut h = 0.0;
    if !front.is_empty() {
        h += sum(front) / front.len() as f64;
    }
    if !lookahead.is_empty() {
        h += w * sum(lookahead) / lookahead.len() as f64;
    }
    h
}

pub fn random_placement(
    rng: &mut ChaCha8Rng,
    candidates: &[PositionId],
    num_positions: usize,
    nq: usize,
) -> Placement {
    let mut c = candidates.to_vec();
    c.shuffle(rng);
    Placement::from_positions(num_positions, &c[..nq]).unwrap()
}

fn random_pairs(rng: &mut ChaCha8Rng, nq: usize, count: usize) -> Vec<(Qudit, Qudit)> {
    (0..count)
        .map(|_| {
            let a = rng.random_range(0..nq);
            let mut b = rng.random_range(0..nq - 1);
            if b >= a {
                b += 1;
            }
            (a, b)
        })
        .collect()
}

fn grid(r: usize, c: usize, k: usize) -> PositionGraph {
    build_grid(&GridSpec::new(r, c, k)).unwrap()
}

/// Graphs used by the distance checks: grids, lattices and a disconnected coupling graph.
pub fn apsp_graphs() -> Vec<(String, PositionGraph)> {
    let mut out = Vec::new();
    for (r, c, k) in [(1, 1, 3), (1, 3, 4), (3, 1, 2), (2, 2, 4), (2, 2, 5), (2, 3, 3), (3, 3, 4)] {
        out.push((format!("grid:{r}x{c}:{k}"), grid(r, c, k)));
    }
    out.push((
        "lattice 4x4".into(),
        build_coupling(&lattice_coupling(4, 4)).unwrap(),
    ));
    out.push((
        "two components".into(),
        build_coupling(&CouplingSpec::new(6, vec![(0, 1), (1, 2), (3, 4), (4, 5), (3, 5)]))
            .unwrap(),
    ));
    out
}

/// Cached distances, paths and nearest-trap entries against Floyd–Warshall.
pub fn check_apsp() -> Check {
    let mut pairs = 0usize;
    for (name, graph) in apsp_graphs() {
        for costs in [TravelCosts::UNIT, default_costs()] {
            let fw = floyd_warshall(&graph, &costs);
            let adj = weighted_adjacency(&graph, &costs);
            let caches = ArchCaches::build(graph.clone(), costs).unwrap();
            let n = graph.num_positions();
            for s in 0..n {
                for t in 0..n {
                    pairs += 1;
                    let got = caches.dist(pid(s), pid(t));
                    if got != fw[s][t] {
                        return Err(format!("{name}: dist({s},{t}) = {got:?}, oracle {:?}", fw[s][t]));
                    }
                    if got != caches.dist(pid(t), pid(s)) {
                        return Err(format!("{name}: dist({s},{t}) is not symmetric"));
                    }
                    let path = caches.path(pid(s), pid(t));
                    let Some(d) = fw[s][t] else {
                        if path.is_some() {
                            return Err(format!("{name}: path across components {s}->{t}"));
                        }
                        continue;
                    };
                    let path = path.ok_or_else(|| format!("{name}: missing path {s}->{t}"))?;
                    if path[0] != pid(s) || *path.last().unwrap() != pid(t) {
                        return Err(format!("{name}: path {s}->{t} has wrong endpoints"));
                    }
                    let mut cost = 0;
                    for w in path.windows(2) {
                        let step = adj[w[0].index()]
                            .iter()
                            .find(|(v, _)| *v == w[1].index())
                            .ok_or_else(|| format!("{name}: path {s}->{t} uses a non-edge"))?;
                        cost += step.1;
                    }
                    if cost != d {
                        return Err(format!("{name}: path {s}->{t} costs {cost}, dist {d}"));
                    }
                    // Lexicographically smallest shortest path: every hop is the smallest
                    // neighbor that stays on some shortest path.
                    for w in path.windows(2) {
                        let (u, v) = (w[0].index(), w[1].index());
                        let best = adj[u]
                            .iter()
                            .filter(|&&(x, wt)| fw[x][t].is_some_and(|dx| wt + dx == fw[u][t].unwrap()))
                            .map(|&(x, _)| x)
                            .min();
                        if best != Some(v) {
                            return Err(format!("{name}: path {s}->{t} is not lexicographically smallest"));
                        }
                    }
                }
                for trap in graph.traps() {
                    let want = trap.slots.iter().filter_map(|u| fw[s][u.index()]).min();
                    if caches.nearest_trap(pid(s), trap.id) != want {
                        return Err(format!("{name}: nearest_trap({s}, {}) mismatch", trap.id));
                    }
                }
                if caches.penalty(pid(s)) != penalty_oracle(&adj, s) {
                    return Err(format!("{name}: penalty({s}) mismatch"));
                }
            }
        }
    }
    Ok(format!("{pairs} position pairs match Floyd–Warshall"))
}

fn subsets_up_to_three(n: usize) -> Vec<Vec<PositionId>> {
    let mut out = Vec::new();
    for a in 0..n {
        out.push(vec![pid(a)]);
        for b in a + 1..n {
            out.push(vec![pid(a), pid(b)]);
            for c in b + 1..n {
                out.push(vec![pid(a), pid(b), pid(c)]);
            }
        }
    }
    out
}

/// Executability through the caches against induced-subgraph connectivity, over every
/// operand set of size at most three on graphs of at most 20 positions.
pub fn check_can_execute() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut graphs: Vec<PositionGraph> = Vec::new();
    for n in [3usize, 5, 8, 12, 16, 20] {
        for density in [0.15, 0.3, 0.6] {
            let mut edges = Vec::new();
            for a in 0..n {
                for b in a + 1..n {
                    if rng.random::<f64>() < density {
                        edges.push((a, b));
                    }
                }
            }
            graphs.push(build_coupling(&CouplingSpec::new(n, edges)).unwrap());
        }
    }
    graphs.push(build_coupling(&CouplingSpec::new(6, vec![])).unwrap());
    graphs.push(grid(1, 1, 5));
    graphs.push(grid(1, 2, 4));
    graphs.push(grid(2, 1, 3));
    let mut checked = 0usize;
    for graph in &graphs {
        let n = graph.num_positions();
        assert!(n <= 20);
        let caches = ArchCaches::build(graph.clone(), TravelCosts::UNIT).unwrap();
        for set in subsets_up_to_three(n) {
            let want = induced_connected(graph, &set);
            let placement = Placement::from_positions(n, &set).unwrap();
            let gate = posgraph::circuit::Gate {
                id: 0,
                operands: (0..set.len()).collect(),
                kind: "g".into(),
                params: vec![],
            };
            let got = [
                caches.exec_connected(&set),
                induced_exec_connected(graph, &set),
                can_execute(&caches, &gate, &placement).unwrap(),
            ];
            if got.iter().any(|&g| g != want) {
                return Err(format!("operands at {set:?}: got {got:?}, oracle {want}"));
            }
            checked += 1;
        }
    }
    Ok(format!("{checked} operand sets on {} graphs agree", graphs.len()))
}

/// Memoized congestion scores against a from-scratch scan, with ions moving outside the
/// scored region between repeated queries.
pub fn check_congestion_memo(trials: usize) -> Check {
    let graph = grid(3, 3, 4);
    let n = graph.num_positions();
    let all: Vec<PositionId> = (0..n).map(pid).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut scorer = CongestionScorer::new(true, true);
    scorer.begin_episode();
    let mut out_of_set_hits = 0usize;
    for trial in 0..trials {
        if trial % 50 == 0 {
            scorer.end_episode();
            if scorer.memo_len() != 0 {
                return Err("score memo survived the end of an episode".into());
            }
            scorer.begin_episode();
        }
        let nq = rng.random_range(0..n);
        let mut placement = random_placement(&mut rng, &all, n, nq);
        let p = pid(rng.random_range(0..n));
        let t = pid(rng.random_range(0..n));
        let b = pid(rng.random_range(0..n));
        let d = rng.random_range(1..=3);
        let members = bfs_scoring_set(&graph, p, t, b, d);
        for round in 0..2 {
            let hits_before = scorer.counters.score_hits;
            let got = scorer.score(&graph, (p, t, b, d), &placement);
            let want = congestion_oracle(&members, &placement);
            if (got.fraction - want.0).abs() > 1e-9 || (got.weighted - want.1).abs() > 1e-9 {
                return Err(format!(
                    "trial {trial}: key ({p},{t},{b},{d}) scored {got:?}, oracle {want:?}"
                ));
            }
            if round == 1 {
                if scorer.counters.score_hits != hits_before + 1 {
                    return Err(format!("trial {trial}: out-of-set move missed the memo"));
                }
                out_of_set_hits += 1;
                break;
            }
            // Move one ion between two positions outside {p} and the scoring set.
            let region: BTreeSet<PositionId> =
                members.iter().map(|m| m.0).chain([p]).collect();
            let outside_occupied: Vec<Qudit> = placement
                .iter()
                .filter(|(_, pos)| !region.contains(pos))
                .map(|(q, _)| q)
                .collect();
            let outside_free: Vec<PositionId> = all
                .iter()
                .copied()
                .filter(|x| !region.contains(x) && !placement.is_occupied(*x))
                .collect();
            if outside_occupied.is_empty() || outside_free.is_empty() {
                break;
            }
            let q = outside_occupied[rng.random_range(0..outside_occupied.len())];
            let to = outside_free[rng.random_range(0..outside_free.len())];
            let mut positions: Vec<PositionId> =
                (0..nq).map(|i| placement.position_of(i).unwrap()).collect();
            positions[q] = to;
            placement = Placement::from_positions(n, &positions).unwrap();
        }
    }
    scorer.end_episode();
    if scorer.counters.dirty_episode_starts != 0 {
        return Err("an episode began with a non-empty memo".into());
    }
    Ok(format!(
        "{trials} trials match the scan ({out_of_set_hits} out-of-set moves hit the memo)"
    ))
}

/// Injective maps from `k` items into `m` slots, in lexicographic order.
pub fn injections(k: usize, m: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for head in injections(k - 1, m) {
        for j in 0..m {
            if !head.contains(&j) {
                let mut v = head.clone();
                v.push(j);
                out.push(v);
            }
        }
    }
    out
}

/// Exhaustive exact trap scoring; returns the winning trap, its adjusted score and the
/// assignment.
pub fn exhaustive_trap_oracle(
    graph: &PositionGraph,
    caches: &ArchCaches,
    fw: &[Vec<Option<u64>>],
    adj: &[Vec<(usize, u64)>],
    placement: &Placement,
    operands: &[Qudit],
) -> Option<(TrapId, i64, Vec<(Qudit, PositionId)>)> {
    let swap = caches.costs().swap;
    let mut best: Option<(i64, TrapId, Vec<(Qudit, PositionId)>)> = None;
    for trap in graph.traps() {
        if !trap.executable || trap.capacity() < operands.len() {
            continue;
        }
        let in_trap = |q: Qudit| {
            matches!(graph.region(placement.position_of(q).unwrap()),
                Region::Slot { trap: t, .. } if t == trap.id)
        };
        let incoming: Vec<Qudit> = operands.iter().copied().filter(|&q| !in_trap(q)).collect();
        let slots: Vec<PositionId> = trap
            .slots
            .iter()
            .copied()
            .filter(|&s| placement.occupant(s).is_none_or(|o| !operands.contains(&o)))
            .collect();
        let cost = |q: Qudit, s: PositionId| -> Option<u64> {
            let src = placement.position_of(q).unwrap();
            let d = fw[src.index()][s.index()]?;
            let path = caches.path(src, s)?;
            let blocked: u64 = if path.len() > 2 {
                path[1..path.len() - 1]
                    .iter()
                    .filter(|p| placement.is_occupied(**p))
                    .map(|p| penalty_oracle(adj, p.index()))
                    .sum()
            } else {
                0
            };
            let evict = if placement.is_occupied(s) {
                penalty_oracle(adj, s.index())
            } else {
                0
            };
            Some(d + blocked + evict)
        };
        // All injective assignments in lexicographic slot order, keeping the first minimum.
        let mut trap_best: Option<(u64, Vec<usize>)> = None;
        for picks in injections(incoming.len(), slots.len()) {
            let total: Option<u64> = picks
                .iter()
                .enumerate()
                .map(|(i, &j)| cost(incoming[i], slots[j]))
                .sum();
            if let Some(c) = total {
                if trap_best.as_ref().is_none_or(|(b, _)| c < *b) {
                    trap_best = Some((c, picks));
                }
            }
        }
        let Some((exact, picks)) = trap_best else { continue };
        let free = trap.slots.iter().filter(|s| !placement.is_occupied(**s)).count() as u64;
        let bonus = free * swap / trap.capacity() as u64;
        let adjusted = exact as i64 - bonus as i64;
        let assignment: Vec<(Qudit, PositionId)> =
            incoming.iter().zip(&picks).map(|(&q, &j)| (q, slots[j])).collect();
        if best.as_ref().is_none_or(|(b, id, _)| (adjusted, trap.id) < (*b, *id)) {
            best = Some((adjusted, trap.id, assignment));
        }
    }
    best.map(|(a, t, asg)| (t, a, asg))
}

/// Pruned trap selection against exhaustive exact scoring over random states.
pub fn check_trap_selection(r: usize, c: usize, k: usize, states: usize) -> Check {
    let graph = grid(r, c, k);
    let costs = default_costs();
    let fw = floyd_warshall(&graph, &costs);
    let adj = weighted_adjacency(&graph, &costs);
    let caches = ArchCaches::build(graph.clone(), costs).unwrap();
    let cached = Geometry::Cached(&caches);
    let on_demand = Geometry::OnDemand {
        graph: &graph,
        costs,
    };
    let n = graph.num_positions();
    let slots: Vec<PositionId> = graph.traps().iter().flat_map(|t| t.slots.clone()).collect();
    let all: Vec<PositionId> = (0..n).map(pid).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(13 + (r * 100 + c * 10 + k) as u64);
    let mut pruned_total = 0usize;
    let mut done = 0usize;
    let mut profiles = Profiles::new(true);
    while done < states {
        let nq = rng.random_range(3..=slots.len());
        // Mostly trap slots, sometimes ions parked in transport.
        let placement = if rng.random_bool(0.7) {
            random_placement(&mut rng, &slots, n, nq)
        } else {
            random_placement(&mut rng, &all, n, nq.min(n))
        };
        let arity = if rng.random_bool(0.8) { 2 } else { 3 };
        let mut qs: Vec<Qudit> = (0..placement.num_qudits()).collect();
        qs.shuffle(&mut rng);
        let operands = &qs[..arity];
        let positions: Vec<PositionId> =
            operands.iter().map(|&q| placement.position_of(q).unwrap()).collect();
        if caches.exec_connected(&positions) {
            continue;
        }
        done += 1;
        let want = exhaustive_trap_oracle(&graph, &caches, &fw, &adj, &placement, operands);
        let pruned = select_target_trap(&cached, &mut profiles, &placement, operands, true);
        let full = select_target_trap(&on_demand, &mut Profiles::new(false), &placement, operands, false);
        let (Some(want), Ok(pruned), Ok(full)) = (want, pruned, full) else {
            return Err(format!("state {done}: selection failed where the oracle did not"));
        };
        for (label, sel) in [("pruned", &pruned), ("exhaustive", &full)] {
            let got = (
                sel.choice.trap,
                sel.choice.score.adjusted_exact().unwrap(),
                sel.choice.assignment.clone(),
            );
            if got != want {
                return Err(format!("state {done}: {label} chose {got:?}, oracle {want:?}"));
            }
        }
        // Soundness: bounds never exceed exact scores, and pruned traps lose on bounds.
        for s in &pruned.scores {
            if let Some(e) = s.adjusted_exact() {
                if s.adjusted_lower_bound() > e {
                    return Err(format!("state {done}: bound above exact on {}", s.trap));
                }
            } else if s.lower_bound != u64::MAX && s.adjusted_lower_bound() <= want.1 {
                let scored = full.scores.iter().find(|f| f.trap == s.trap).unwrap();
                if scored.exact.is_some() {
                    return Err(format!("state {done}: {} pruned without a losing bound", s.trap));
                }
            }
        }
        pruned_total += pruned.pruned;
    }
    Ok(format!(
        "grid:{r}x{c}:{k}: {states} states agree, {pruned_total} traps pruned"
    ))
}

/// Incremental swap deltas against recomputing `H` on a 4x4 lattice.
pub fn check_heuristic_delta(trials: usize) -> Check {
    let graph = build_coupling(&lattice_coupling(4, 4)).unwrap();
    let costs = TravelCosts::UNIT;
    let fw = floyd_warshall(&graph, &costs);
    let caches = ArchCaches::build(graph.clone(), costs).unwrap();
    let dist = |a: PositionId, b: PositionId| caches.dist(a, b).unwrap();
    let n = graph.num_positions();
    let all: Vec<PositionId> = (0..n).map(pid).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let edges: Vec<(PositionId, PositionId)> = graph.edges().iter().map(|e| (e.a, e.b)).collect();
    let mut evaluated = 0usize;
    while evaluated < trials {
        let nq = rng.random_range(2..=n);
        let placement = random_placement(&mut rng, &all, n, nq);
        let nf = rng.random_range(1..=4);
        let front = random_pairs(&mut rng, nq, nf);
        let ne = rng.random_range(0..=8);
        let lookahead = random_pairs(&mut rng, nq, ne);
        let w = 0.5;
        let terms = HeuristicTerms {
            front: front.clone(),
            lookahead: lookahead.clone(),
            extended_weight: w,
        };
        let state = HeuristicState::new(terms, nq, dist, &placement);
        let before = h_oracle(&fw, &front, &lookahead, w, &placement);
        if (state.value() - before).abs() > 1e-9 {
            return Err(format!("H = {} but oracle {before}", state.value()));
        }
        let mut best_delta: Option<(f64, (PositionId, PositionId))> = None;
        let mut best_oracle: Option<(f64, (PositionId, PositionId))> = None;
        for &(a, b) in &edges {
            if !placement.is_occupied(a) && !placement.is_occupied(b) {
                continue;
            }
            let mut after = placement.clone();
            after.apply_swap(&graph, a, b).unwrap();
            let want = h_oracle(&fw, &front, &lookahead, w, &after) - before;
            let got = state.heuristic_delta(dist, &placement, a, b);
            if (got - want).abs() > 1e-9 {
                return Err(format!("swap ({a},{b}): delta {got}, oracle {want}"));
            }
            if best_delta.is_none_or(|(d, _)| got < d) {
                best_delta = Some((got, (a, b)));
            }
            if best_oracle.is_none_or(|(d, _)| want < d) {
                best_oracle = Some((want, (a, b)));
            }
            evaluated += 1;
        }
        if best_delta.map(|x| x.1) != best_oracle.map(|x| x.1) {
            return Err("argmin over deltas differs from argmin over recomputed H".into());
        }
    }
    Ok(format!("{evaluated} swap candidates match full recomputation"))
}

/// Cached and uncached shuttle move scores against a direct evaluation on a 3x3 grid.
pub fn check_score_move(samples: usize) -> Check {
    let graph = grid(3, 3, 4);
    let costs = default_costs();
    let fw = floyd_warshall(&graph, &costs);
    let adj = weighted_adjacency(&graph, &costs);
    let caches = ArchCaches::build(graph.clone(), costs).unwrap();
    let cached = Geometry::Cached(&caches);
    let on_demand = Geometry::OnDemand {
        graph: &graph,
        costs,
    };
    let mut cached_profiles = Profiles::new(true);
    let mut fresh_profiles = Profiles::new(false);
    let n = graph.num_positions();
    let all: Vec<PositionId> = (0..n).map(pid).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for i in 0..samples {
        let nq = rng.random_range(2..=36);
        let placement = random_placement(&mut rng, &all, n, nq);
        let nf = rng.random_range(1..=4);
        let front = random_pairs(&mut rng, nq, nf);
        let ne = rng.random_range(0..=8);
        let lookahead = random_pairs(&mut rng, nq, ne);
        let terms = HeuristicTerms {
            front: front.clone(),
            lookahead: lookahead.clone(),
            extended_weight: 0.5,
        };
        let dist = |a: PositionId, b: PositionId| caches.dist(a, b).unwrap();
        let state = HeuristicState::new(terms, nq, dist, &placement);
        let q = rng.random_range(0..nq);
        let free: Vec<PositionId> = all.iter().copied().filter(|p| !placement.is_occupied(*p)).collect();
        let dst = free[rng.random_range(0..free.len())];
        let a = score_move(&cached, &mut cached_profiles, &state, &placement, q, dst);
        let b = score_move(&on_demand, &mut fresh_profiles, &state, &placement, q, dst);
        if a.to_bits() != b.to_bits() {
            return Err(format!("sample {i}: cached {a} vs uncached {b}"));
        }
        let mut moved: Vec<PositionId> = (0..nq).map(|x| placement.position_of(x).unwrap()).collect();
        moved[q] = dst;
        let after = Placement::from_positions(n, &moved).unwrap();
        let src = placement.position_of(q).unwrap();
        let path = caches.path(src, dst).unwrap();
        let blocked: u64 = if path.len() > 2 {
            path[1..path.len() - 1]
                .iter()
                .filter(|p| placement.is_occupied(**p))
                .map(|p| penalty_oracle(&adj, p.index()))
                .sum()
        } else {
            0
        };
        let want = h_oracle(&fw, &front, &lookahead, 0.5, &after)
            - h_oracle(&fw, &front, &lookahead, 0.5, &placement)
            + blocked as f64;
        if (a - want).abs() > 1e-9 {
            return Err(format!("sample {i}: score {a}, oracle {want}"));
        }
    }
    if cached_profiles.builds() >= fresh_profiles.builds() {
        return Err("cached profiles were rebuilt as often as uncached ones".into());
    }
    Ok(format!(
        "{samples} samples agree ({} cached profile builds vs {} uncached)",
        cached_profiles.builds(),
        fresh_profiles.builds()
    ))
}

/// Scoring sets against a BFS oracle on a 2x2 grid, every key with depth up to three.
pub fn check_scoring_sets() -> Check {
    let graph = grid(2, 2, 4);
    let n = graph.num_positions();
    let mut scorer = CongestionScorer::new(true, true);
    let mut keys = 0usize;
    for p in 0..n {
        for t in 0..n {
            for b in 0..n {
                for d in 1..=3 {
                    let want = bfs_scoring_set(&graph, pid(p), pid(t), pid(b), d);
                    let set = local_scoring_set(&graph, pid(p), pid(t), pid(b), d);
                    let got: Vec<(PositionId, u32)> =
                        set.members.iter().copied().zip(set.hops.iter().copied()).collect();
                    if got != want {
                        return Err(format!("key ({p},{t},{b},{d}): {got:?} vs {want:?}"));
                    }
                    let memo = scorer.scoring_set(&graph, (pid(p), pid(t), pid(b), d));
                    if *memo != set || *scorer.scoring_set(&graph, set.key) != set {
                        return Err(format!("key ({p},{t},{b},{d}): memoized set differs"));
                    }
                    keys += 1;
                }
            }
        }
    }
    Ok(format!("{keys} keys match the BFS oracle"))
}

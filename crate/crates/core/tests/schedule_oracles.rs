use posgraph::graph::PositionId;
use posgraph::schedule::{assign_times, Op, OpKind, OperationDurations, Schedule};
use posgraph::verify::check_timing;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_op(rng: &mut ChaCha8Rng, ions: usize, positions: u32) -> Op {
    let x = rng.random_range(0..positions);
    let (x, y) = (PositionId(x), PositionId((x + rng.random_range(1..positions)) % positions));
    let q = rng.random_range(0..ions);
    match rng.random_range(0..5) {
        0 => Op::movement(OpKind::Move, q, x, y),
        1 => Op::movement(OpKind::Split, q, x, y),
        2 => Op::movement(OpKind::Merge, q, x, y),
        3 => Op::swap(x, y, vec![q]),
        _ => Op::gate(0, vec![q, (q + rng.random_range(1..ions)) % ions], vec![x, y]),
    }
}

fn random_ops(seed: u64, len: usize) -> Vec<Op> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| random_op(&mut rng, 6, 12)).collect()
}

fn shares_resource(a: &Op, b: &Op) -> bool {
    a.ions.iter().any(|q| b.ions.contains(q)) || a.positions.iter().any(|p| b.positions.contains(p))
}

/// Start times from the pairwise precedence rule: an op waits for every earlier op it shares
/// an ion or position with.
fn start_oracle(ops: &[Op], d: &OperationDurations) -> Vec<u64> {
    let mut end = Vec::with_capacity(ops.len());
    let mut start = Vec::with_capacity(ops.len());
    for (j, op) in ops.iter().enumerate() {
        let s = (0..j)
            .filter(|&i| shares_resource(&ops[i], op))
            .map(|i| end[i])
            .max()
            .unwrap_or(0);
        start.push(s);
        end.push(s + d.duration_ns(op));
    }
    start
}

/// Makespan by sweeping the sorted start and end events.
fn sweep_makespan(schedule: &Schedule) -> u64 {
    let mut events: Vec<(u64, i32)> = schedule
        .ops
        .iter()
        .flat_map(|t| [(t.start_ns, 1), (t.end_ns(), -1)])
        .collect();
    events.sort_unstable_by_key(|&(t, delta)| (t, delta));
    let mut active = 0;
    let mut last = 0;
    for (t, delta) in events {
        active += delta;
        if active == 0 {
            last = t;
        }
    }
    last
}

#[test]
fn asap_matches_pairwise_precedence() {
    let d = OperationDurations::default();
    for seed in 0..500 {
        let ops = random_ops(seed, 50);
        let s = assign_times(&ops, &d).unwrap();
        let starts: Vec<u64> = s.ops.iter().map(|t| t.start_ns).collect();
        assert_eq!(starts, start_oracle(&ops, &d));
        assert_eq!(s.makespan_ns, sweep_makespan(&s));
        assert_eq!(s.serial_ns, ops.iter().map(|o| d.duration_ns(o)).sum::<u64>());
        check_timing(&s, Some(&d)).unwrap();
    }
}

#[test]
fn two_ops_reach_the_brute_force_minimum() {
    let d = OperationDurations::default();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..300 {
        let ops = [random_op(&mut rng, 3, 4), random_op(&mut rng, 3, 4)];
        let (d0, d1) = (d.duration_ns(&ops[0]), d.duration_ns(&ops[1]));
        let step = 1000;
        let horizon = (d0 + d1) / step + 1;
        let mut best = u64::MAX;
        for s0 in 0..=horizon {
            for s1 in 0..=horizon {
                let (s0, s1) = (s0 * step, s1 * step);
                if shares_resource(&ops[0], &ops[1]) && s1 < s0 + d0 {
                    continue;
                }
                best = best.min((s0 + d0).max(s1 + d1));
            }
        }
        assert_eq!(assign_times(&ops, &d).unwrap().makespan_ns, best);
    }
}

#[test]
fn timing_checker_rejects_overlap() {
    let d = OperationDurations::default();
    let ops = [
        Op::movement(OpKind::Move, 0, PositionId(0), PositionId(1)),
        Op::movement(OpKind::Move, 0, PositionId(1), PositionId(2)),
    ];
    let mut s = assign_times(&ops, &d).unwrap();
    s.ops[1].start_ns -= 1;
    s.makespan_ns -= 1;
    let err = check_timing(&s, Some(&d)).unwrap_err();
    assert_eq!(err.index, 1);
}

proptest! {
    #[test]
    fn makespan_lies_between_longest_op_and_serial_sum(seed in 0u64..10_000, len in 1usize..60) {
        let d = OperationDurations::default();
        let ops = random_ops(seed, len);
        let s = assign_times(&ops, &d).unwrap();
        let longest = ops.iter().map(|o| d.duration_ns(o)).max().unwrap();
        prop_assert!(s.makespan_ns <= s.serial_ns);
        prop_assert!(s.makespan_ns >= longest);
    }

    #[test]
    fn appending_never_shortens(seed in 0u64..10_000, len in 0usize..60) {
        let d = OperationDurations::default();
        let ops = random_ops(seed, len + 1);
        let shorter = assign_times(&ops[..len], &d).unwrap();
        let longer = assign_times(&ops, &d).unwrap();
        prop_assert!(longer.makespan_ns >= shorter.makespan_ns);
        prop_assert_eq!(&longer.ops[..len], &shorter.ops[..]);
    }

    #[test]
    fn relabeling_keeps_the_timing(seed in 0u64..10_000, len in 0usize..60, shift in 1u32..50) {
        let d = OperationDurations::default();
        let ops = random_ops(seed, len);
        let renamed: Vec<Op> = ops
            .iter()
            .map(|o| {
                let mut o = o.clone();
                o.ions = o.ions.iter().map(|q| 5 - q).collect();
                o.positions = o.positions.iter().map(|p| PositionId(p.0 + shift)).collect();
                o
            })
            .collect();
        let a = assign_times(&ops, &d).unwrap();
        let b = assign_times(&renamed, &d).unwrap();
        prop_assert_eq!(a.makespan_ns, b.makespan_ns);
        let starts = |s: &Schedule| s.ops.iter().map(|t| t.start_ns).collect::<Vec<_>>();
        prop_assert_eq!(starts(&a), starts(&b));
    }

    #[test]
    fn chains_on_one_ion_add_up(k in 0usize..40) {
        let d = OperationDurations::default();
        let ops: Vec<Op> = (0..k)
            .map(|i| Op::movement(OpKind::Move, 0, PositionId(i as u32), PositionId(i as u32 + 1)))
            .collect();
        let s = assign_times(&ops, &d).unwrap();
        prop_assert_eq!(s.makespan_ns, k as u64 * d.move_ns());
    }
}

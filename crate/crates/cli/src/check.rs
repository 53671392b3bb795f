//! Artifact replay and comparison.

use posgraph::circuit::CircuitDag;
use posgraph::graph::PositionGraph;
use posgraph::schedule::OperationDurations;
use posgraph::verify::{replay_sabre, replay_shuttle, Violation};

use crate::compile::Artifact;

pub fn replay(
    graph: &PositionGraph,
    dag: &CircuitDag,
    artifact: &Artifact,
    durations: Option<&OperationDurations>,
) -> Result<(), Violation> {
    match artifact {
        Artifact::Sabre(c) => replay_sabre(graph, dag, c),
        Artifact::Shuttle(c) => replay_shuttle(graph, dag, c, durations),
    }
}

fn differ(index: usize, reason: impl Into<String>) -> Result<(), Violation> {
    Err(Violation {
        index,
        reason: reason.into(),
    })
}

/// Check that two artifacts hold the same placements and op sequence. The violation names
/// the first op that differs.
pub fn diff(a: &Artifact, b: &Artifact) -> Result<(), Violation> {
    if a.initial_placement() != b.initial_placement() {
        return differ(0, "initial placements differ");
    }
    match (a, b) {
        (Artifact::Sabre(x), Artifact::Sabre(y)) => {
            diff_ops(&x.ops, &y.ops)?;
            if x.final_placement != y.final_placement {
                return differ(x.ops.len(), "final placements differ");
            }
        }
        (Artifact::Shuttle(x), Artifact::Shuttle(y)) => {
            diff_ops(&x.schedule.ops, &y.schedule.ops)?;
            if x.final_placement != y.final_placement {
                return differ(x.schedule.ops.len(), "final placements differ");
            }
            if x.schedule != y.schedule {
                return differ(x.schedule.ops.len(), "schedule totals differ");
            }
        }
        _ => return differ(0, "one artifact is swap-routed and the other shuttle-routed"),
    }
    Ok(())
}

fn diff_ops<T: PartialEq + std::fmt::Debug>(a: &[T], b: &[T]) -> Result<(), Violation> {
    if let Some(i) = a.iter().zip(b).position(|(x, y)| x != y) {
        return differ(i, format!("{:?} != {:?}", a[i], b[i]));
    }
    if a.len() != b.len() {
        return differ(
            a.len().min(b.len()),
            format!("op counts differ: {} vs {}", a.len(), b.len()),
        );
    }
    Ok(())
}

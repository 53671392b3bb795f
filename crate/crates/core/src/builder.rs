//! Grid QCCD and coupling-graph architecture builders.
//!
//! Grid layout: traps sit at the nodes of an `rows x cols` grid and hold `ions_per_trap`
//! slots joined by swap edges. Horizontally adjacent traps meet at a junction; the junction
//! owns one segment per incident trap (merged into the left trap's last slot and the right
//! trap's first slot) and vertically adjacent junctions share one segment. A junction is not a
//! position: it is realized as a clique of move edges over its segments. A single-column grid
//! places its junctions vertically instead.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{
    Capabilities, Edge, GraphError, GraphJsonError, Junction, PositionGraph, PositionId, Region,
    Trap, TrapId,
};

#[derive(Debug, Error)]
pub enum BuildError {
    #[error("grid needs at least one row, one column and one ion per trap")]
    EmptyGrid,
    #[error("executable flag list has {found} entries for {expected} traps")]
    ExecutableFlags { expected: usize, found: usize },
    #[error("coupling edge ({0}, {0}) is a self-loop")]
    SelfLoop(usize),
    #[error("coupling edge ({0}, {1}) is listed twice")]
    DuplicateEdge(usize, usize),
    #[error("coupling edge ({0}, {1}) references a qudit outside 0..{2}")]
    OutOfRange(usize, usize, usize),
    #[error("invalid architecture string {0:?}; expected grid:RxC:k, coupling:@file or file:@file")]
    Syntax(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid coupling file: {0}")]
    CouplingJson(#[from] serde_json::Error),
    #[error(transparent)]
    GraphJson(#[from] GraphJsonError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GridSpec {
    pub rows: usize,
    pub cols: usize,
    pub ions_per_trap: usize,
    /// Per-trap executable flags in trap order; `None` means every trap is executable.
    pub executable: Option<Vec<bool>>,
}

impl GridSpec {
    pub fn new(rows: usize, cols: usize, ions_per_trap: usize) -> Self {
        Self {
            rows,
            cols,
            ions_per_trap,
            executable: None,
        }
    }

    pub fn num_traps(&self) -> usize {
        self.rows * self.cols
    }

    /// Total number of slots, the x-axis of compile-time scaling fits.
    pub fn total_capacity(&self) -> usize {
        self.num_traps() * self.ions_per_trap
    }
}

/// Structural counts of a grid build, used to check the vertex and edge identities.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct GridCounts {
    pub slots: usize,
    pub segments: usize,
    pub trap_segments: usize,
    pub junction_segments: usize,
    pub junction_edges: usize,
    pub chain_edges: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CouplingSpec {
    pub num_qudits: usize,
    pub edges: Vec<(usize, usize)>,
}

impl CouplingSpec {
    pub fn new(num_qudits: usize, edges: Vec<(usize, usize)>) -> Self {
        Self { num_qudits, edges }
    }

    fn validate(&self) -> Result<(), BuildError> {
        let mut seen = BTreeSet::new();
        for &(a, b) in &self.edges {
            if a == b {
                return Err(BuildError::SelfLoop(a));
            }
            if a >= self.num_qudits || b >= self.num_qudits {
                return Err(BuildError::OutOfRange(a, b, self.num_qudits));
            }
            if !seen.insert((a.min(b), a.max(b))) {
                return Err(BuildError::DuplicateEdge(a, b));
            }
        }
        Ok(())
    }
}

struct GridBuilder {
    regions: Vec<Region>,
    edges: Vec<Edge>,
    junctions: Vec<Junction>,
    counts: GridCounts,
}

impl GridBuilder {
    fn segment(&mut self) -> PositionId {
        self.regions.push(Region::Transport);
        self.counts.segments += 1;
        PositionId::from(self.regions.len() - 1)
    }

    fn edge(&mut self, a: PositionId, b: PositionId, caps: Capabilities) {
        self.edges.push(Edge { a, b, caps });
    }

    /// A junction between `first` (merged at its last slot) and `second` (at its first slot).
    fn trap_junction(&mut self, first: &Trap, second: &Trap) -> Vec<PositionId> {
        let a = self.segment();
        let b = self.segment();
        self.counts.trap_segments += 2;
        self.edge(*first.slots.last().unwrap(), a, Capabilities::MERGE_SPLIT);
        self.edge(*second.slots.first().unwrap(), b, Capabilities::MERGE_SPLIT);
        vec![a, b]
    }

    fn close_junctions(&mut self, members: Vec<Vec<PositionId>>) {
        for (id, segs) in members.into_iter().enumerate() {
            for i in 0..segs.len() {
                for j in i + 1..segs.len() {
                    self.edge(segs[i], segs[j], Capabilities::MOVE);
                    self.counts.junction_edges += 1;
                }
            }
            self.junctions.push(Junction {
                id: id as u32,
                segments: segs,
            });
        }
    }
}

/// Build a grid QCCD position graph. Returns the graph and its structural counts.
pub fn build_grid_with_counts(spec: &GridSpec) -> Result<(PositionGraph, GridCounts), BuildError> {
    let (rows, cols, k) = (spec.rows, spec.cols, spec.ions_per_trap);
    if rows == 0 || cols == 0 || k == 0 {
        return Err(BuildError::EmptyGrid);
    }
    let num_traps = rows * cols;
    if let Some(flags) = &spec.executable {
        if flags.len() != num_traps {
            return Err(BuildError::ExecutableFlags {
                expected: num_traps,
                found: flags.len(),
            });
        }
    }
    let executable = |t: usize| spec.executable.as_ref().is_none_or(|f| f[t]);

    let mut b = GridBuilder {
        regions: Vec::new(),
        edges: Vec::new(),
        junctions: Vec::new(),
        counts: GridCounts::default(),
    };
    let mut traps = Vec::with_capacity(num_traps);
    for t in 0..num_traps {
        let id = TrapId(t as u32);
        let slots: Vec<PositionId> = (0..k)
            .map(|i| {
                b.regions.push(Region::Slot {
                    trap: id,
                    slot: i as u32,
                });
                PositionId::from(t * k + i)
            })
            .collect();
        traps.push(Trap {
            id,
            slots,
            executable: executable(t),
        });
    }
    b.counts.slots = num_traps * k;
    for trap in &traps {
        for i in 0..k {
            for j in i + 1..k {
                let (a, c) = (trap.slots[i], trap.slots[j]);
                if j == i + 1 {
                    let caps = if trap.executable {
                        Capabilities::SWAP | Capabilities::EXECUTE
                    } else {
                        Capabilities::SWAP
                    };
                    b.edge(a, c, caps);
                    b.counts.chain_edges += 1;
                } else if trap.executable {
                    b.edge(a, c, Capabilities::EXECUTE);
                }
            }
        }
    }

    let trap_at = |r: usize, c: usize| &traps[r * cols + c];
    let mut members: Vec<Vec<PositionId>> = Vec::new();
    if cols >= 2 {
        // Junction (r, c) sits between traps (r, c) and (r, c + 1).
        for r in 0..rows {
            for c in 0..cols - 1 {
                let segs = b.trap_junction(trap_at(r, c), trap_at(r, c + 1));
                members.push(segs);
            }
        }
        let jid = |r: usize, c: usize| r * (cols - 1) + c;
        for r in 0..rows.saturating_sub(1) {
            for c in 0..cols - 1 {
                let s = b.segment();
                b.counts.junction_segments += 1;
                members[jid(r, c)].push(s);
                members[jid(r + 1, c)].push(s);
            }
        }
    } else {
        for r in 0..rows - 1 {
            let segs = b.trap_junction(trap_at(r, 0), trap_at(r + 1, 0));
            members.push(segs);
        }
    }
    b.close_junctions(members);

    let counts = b.counts;
    let graph = PositionGraph::new(b.regions, b.edges, traps, b.junctions)?;

    let slot_total: usize = graph.traps().iter().map(Trap::capacity).sum();
    assert_eq!(
        graph.num_positions(),
        slot_total + graph.num_transport(),
        "vertex identity violated"
    );
    let clique_edges: usize = graph
        .junctions()
        .iter()
        .map(|j| j.degree() * (j.degree() - 1) / 2)
        .sum();
    assert_eq!(
        graph.movement_edge_count(),
        slot_total - num_traps + clique_edges + counts.trap_segments,
        "edge identity of the documented construction violated"
    );
    Ok((graph, counts))
}

pub fn build_grid(spec: &GridSpec) -> Result<PositionGraph, BuildError> {
    build_grid_with_counts(spec).map(|(g, _)| g)
}

/// One capacity-1 executable trap per qudit; each coupling edge carries swap and execute.
pub fn build_coupling(spec: &CouplingSpec) -> Result<PositionGraph, BuildError> {
    spec.validate()?;
    let regions = (0..spec.num_qudits)
        .map(|q| Region::Slot {
            trap: TrapId(q as u32),
            slot: 0,
        })
        .collect();
    let traps = (0..spec.num_qudits)
        .map(|q| Trap {
            id: TrapId(q as u32),
            slots: vec![PositionId::from(q)],
            executable: true,
        })
        .collect();
    let edges = spec
        .edges
        .iter()
        .map(|&(a, b)| Edge {
            a: PositionId::from(a),
            b: PositionId::from(b),
            caps: Capabilities::SWAP | Capabilities::EXECUTE,
        })
        .collect();
    Ok(PositionGraph::new(regions, edges, traps, Vec::new())?)
}

/// `rows x cols` lattice coupling graph with row-major qudit numbering.
pub fn lattice_coupling(rows: usize, cols: usize) -> CouplingSpec {
    let mut edges = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let q = r * cols + c;
            if c + 1 < cols {
                edges.push((q, q + 1));
            }
            if r + 1 < rows {
                edges.push((q, q + cols));
            }
        }
    }
    CouplingSpec::new(rows * cols, edges)
}

/// Architecture selector as written on the command line.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ArchSpec {
    Grid(GridSpec),
    Coupling(String),
    File(String),
}

impl FromStr for ArchSpec {
    type Err = BuildError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || BuildError::Syntax(s.to_string());
        if let Some(rest) = s.strip_prefix("grid:") {
            let (dims, k) = rest.split_once(':').ok_or_else(bad)?;
            let (r, c) = dims.split_once(['x', 'X']).ok_or_else(bad)?;
            let parse = |v: &str| v.trim().parse::<usize>().map_err(|_| bad());
            let spec = GridSpec::new(parse(r)?, parse(c)?, parse(k)?);
            if spec.rows == 0 || spec.cols == 0 || spec.ions_per_trap == 0 {
                return Err(BuildError::EmptyGrid);
            }
            return Ok(ArchSpec::Grid(spec));
        }
        let file = |rest: &str| {
            let path = rest.strip_prefix('@').unwrap_or(rest);
            if path.is_empty() {
                Err(bad())
            } else {
                Ok(path.to_string())
            }
        };
        if let Some(rest) = s.strip_prefix("coupling:") {
            return Ok(ArchSpec::Coupling(file(rest)?));
        }
        if let Some(rest) = s.strip_prefix("file:") {
            return Ok(ArchSpec::File(file(rest)?));
        }
        Err(bad())
    }
}

impl fmt::Display for ArchSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ArchSpec::Grid(g) => write!(f, "grid:{}x{}:{}", g.rows, g.cols, g.ions_per_trap),
            ArchSpec::Coupling(p) => write!(f, "coupling:@{p}"),
            ArchSpec::File(p) => write!(f, "file:@{p}"),
        }
    }
}

fn read(path: &str) -> Result<String, BuildError> {
    std::fs::read_to_string(Path::new(path)).map_err(|source| BuildError::Io {
        path: path.to_string(),
        source,
    })
}

impl ArchSpec {
    pub fn build(&self) -> Result<PositionGraph, BuildError> {
        match self {
            ArchSpec::Grid(g) => build_grid(g),
            ArchSpec::Coupling(path) => {
                let spec: CouplingSpec = serde_json::from_str(&read(path)?)?;
                build_coupling(&spec)
            }
            ArchSpec::File(path) => Ok(PositionGraph::from_json(&read(path)?)?),
        }
    }
}

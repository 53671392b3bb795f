//! Versioned JSON form of a [`PositionGraph`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{
    Capabilities, Edge, EdgeCapability, GraphError, Junction, PositionGraph, PositionId, Region,
    Trap, TrapId,
};

const FORMAT: &str = "position-graph";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum GraphJsonError {
    #[error("malformed architecture JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("expected format {FORMAT:?} version {VERSION}, found {format:?} version {version}")]
    Version { format: String, version: u32 },
    #[error("position list is not dense: entry {index} has id {id}")]
    PositionOrder { index: usize, id: u32 },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Serialize, Deserialize)]
struct GraphDoc {
    format: String,
    version: u32,
    positions: Vec<PositionDoc>,
    edges: Vec<EdgeDoc>,
    traps: Vec<TrapDoc>,
    #[serde(default)]
    junctions: Vec<JunctionDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "region", rename_all = "snake_case")]
enum PositionKind {
    Slot { trap: TrapId, slot: u32 },
    Transport,
}

#[derive(Serialize, Deserialize)]
struct PositionDoc {
    id: u32,
    #[serde(flatten)]
    kind: PositionKind,
}

#[derive(Serialize, Deserialize)]
struct EdgeDoc {
    a: PositionId,
    b: PositionId,
    caps: Vec<EdgeCapability>,
}

#[derive(Serialize, Deserialize)]
struct TrapDoc {
    id: TrapId,
    slots: Vec<PositionId>,
    executable: bool,
}

#[derive(Serialize, Deserialize)]
struct JunctionDoc {
    id: u32,
    segments: Vec<PositionId>,
}

impl PositionGraph {
    pub fn to_json(&self) -> String {
        let doc = GraphDoc {
            format: FORMAT.into(),
            version: VERSION,
            positions: self
                .positions()
                .map(|p| PositionDoc {
                    id: p.0,
                    kind: match self.region(p) {
                        Region::Slot { trap, slot } => PositionKind::Slot { trap, slot },
                        Region::Transport => PositionKind::Transport,
                    },
                })
                .collect(),
            edges: self
                .edges()
                .iter()
                .map(|e| EdgeDoc {
                    a: e.a,
                    b: e.b,
                    caps: e.caps.iter().collect(),
                })
                .collect(),
            traps: self
                .traps()
                .iter()
                .map(|t| TrapDoc {
                    id: t.id,
                    slots: t.slots.clone(),
                    executable: t.executable,
                })
                .collect(),
            junctions: self
                .junctions()
                .iter()
                .map(|j| JunctionDoc {
                    id: j.id,
                    segments: j.segments.clone(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("graph documents always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, GraphJsonError> {
        let doc: GraphDoc = serde_json::from_str(text)?;
        if doc.format != FORMAT || doc.version != VERSION {
            return Err(GraphJsonError::Version {
                format: doc.format,
                version: doc.version,
            });
        }
        let mut regions = Vec::with_capacity(doc.positions.len());
        for (index, p) in doc.positions.into_iter().enumerate() {
            if p.id as usize != index {
                return Err(GraphJsonError::PositionOrder { index, id: p.id });
            }
            regions.push(match p.kind {
                PositionKind::Slot { trap, slot } => Region::Slot { trap, slot },
                PositionKind::Transport => Region::Transport,
            });
        }
        let edges = doc
            .edges
            .into_iter()
            .map(|e| Edge {
                a: e.a,
                b: e.b,
                caps: e.caps.into_iter().collect::<Capabilities>(),
            })
            .collect();
        let traps = doc
            .traps
            .into_iter()
            .map(|t| Trap {
                id: t.id,
                slots: t.slots,
                executable: t.executable,
            })
            .collect();
        let junctions = doc
            .junctions
            .into_iter()
            .map(|j| Junction {
                id: j.id,
                segments: j.segments,
            })
            .collect();
        Ok(PositionGraph::new(regions, edges, traps, junctions)?)
    }
}

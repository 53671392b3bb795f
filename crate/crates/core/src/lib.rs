//! Qubit mapping and routing over position graphs.
//!
//! A [`graph::PositionGraph`] describes where qudits may sit and how they may move. Swap-only
//! graphs (coupling graphs) are routed with [`sabre`]; QCCD trap/segment graphs are routed by
//! shuttling with [`shaw`]. Both routers read the per-architecture [`graph::ArchCaches`].

pub mod bench_circuits;
pub mod builder;
pub mod circuit;
pub mod graph;
pub mod sabre;
pub mod schedule;
pub mod shaw;
pub mod verify;

//! One compilation: load inputs, run a router, and describe the result.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use clap::ValueEnum;
use posgraph::builder::ArchSpec;
use posgraph::circuit::{parse_qasm, to_qasm, CircuitDag};
use posgraph::graph::{ArchCaches, Placement, PositionGraph, TravelCosts};
use posgraph::sabre::{
    check_architecture, compile, CompiledCircuit, CouplingBackend, PositionBackend, SabreConfig,
    SabreError, SabreOp,
};
use posgraph::schedule::{assign_times, Op, OpKind, OperationDurations, Schedule};
use posgraph::shaw::{compile_mode, ShawConfig, ShawError, ShawMode, ShuttleCircuit};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Router {
    SabreCg,
    SabrePg,
    Shaw,
    Lightshaw,
}

impl Router {
    pub fn id(self) -> &'static str {
        match self {
            Router::SabreCg => "sabre-cg",
            Router::SabrePg => "sabre-pg",
            Router::Shaw => "shaw",
            Router::Lightshaw => "lightshaw",
        }
    }
}

impl fmt::Display for Router {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

/// Failure of a compile run, sorted by exit code.
#[derive(Debug)]
pub enum RunError {
    /// Unreadable or invalid input or configuration.
    Config(String),
    /// The circuit cannot be served on the architecture by any routing.
    Infeasible(String),
    /// The router gave up.
    Routing(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Infeasible(_) => 3,
            RunError::Routing(_) => 1,
        }
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config(m) | RunError::Infeasible(m) | RunError::Routing(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for RunError {}

fn config<E: fmt::Display>(context: &str) -> impl FnOnce(E) -> RunError + '_ {
    move |e| RunError::Config(format!("{context}: {e}"))
}

/// A parsed circuit with the name and digest recorded in reports.
#[derive(Clone, Debug)]
pub struct CircuitInput {
    pub name: String,
    pub sha256: String,
    pub dag: CircuitDag,
}

impl CircuitInput {
    pub fn from_qasm(name: impl Into<String>, text: &str) -> Result<Self, RunError> {
        let dag = parse_qasm(text).map_err(config("circuit"))?;
        Ok(Self {
            name: name.into(),
            sha256: hex::encode(Sha256::digest(text.as_bytes())),
            dag,
        })
    }

    pub fn from_file(path: &Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path).map_err(config(&path.display().to_string()))?;
        let name = path
            .file_stem()
            .map_or_else(|| "circuit".to_string(), |s| s.to_string_lossy().into_owned());
        Self::from_qasm(name, &text)
    }

    /// A generated circuit, digested through its QASM text.
    pub fn generated(name: impl Into<String>, dag: CircuitDag) -> Self {
        let text = to_qasm(&dag);
        Self {
            name: name.into(),
            sha256: hex::encode(Sha256::digest(text.as_bytes())),
            dag,
        }
    }
}

pub fn load_arch(spec: &str) -> Result<(ArchSpec, Arc<PositionGraph>), RunError> {
    let arch: ArchSpec = spec.parse().map_err(config("architecture"))?;
    let graph = arch.build().map_err(config("architecture"))?;
    Ok((arch, Arc::new(graph)))
}

/// Read a durations file; `@path` and `path` are both accepted.
pub fn load_durations(arg: &str) -> Result<OperationDurations, RunError> {
    let path = arg.strip_prefix('@').unwrap_or(arg);
    let text = std::fs::read_to_string(path).map_err(config(path))?;
    let d: OperationDurations = serde_json::from_str(&text).map_err(config(path))?;
    d.validate().map_err(config(path))?;
    Ok(d)
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub router: Router,
    pub layout_passes: usize,
    pub seed: u64,
    pub durations: OperationDurations,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            router: Router::Lightshaw,
            layout_passes: SabreConfig::default().layout_passes,
            seed: 0,
            durations: OperationDurations::default(),
        }
    }
}

/// The routed output, without router or timing data, so equal decisions give equal bytes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Artifact {
    Sabre(CompiledCircuit),
    Shuttle(ShuttleCircuit),
}

impl Artifact {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("artifacts serialize") + "\n"
    }

    pub fn initial_placement(&self) -> &Placement {
        match self {
            Artifact::Sabre(c) => &c.initial_placement,
            Artifact::Shuttle(c) => &c.initial_placement,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub circuit: String,
    pub circuit_sha256: String,
    pub num_qudits: usize,
    pub num_gates: usize,
    pub arch: String,
    /// Trap slots; for grids the trap count times the trap capacity.
    pub total_capacity: usize,
    pub num_positions: usize,
    pub router: Router,
    pub seed: u64,
    pub layout_passes: usize,
    /// Seconds spent in the router, cache construction included.
    pub wall_clock_s: f64,
    pub op_counts: BTreeMap<String, usize>,
    /// Makespan of the ASAP schedule in microseconds.
    pub operation_time_us: f64,
    pub serial_time_us: f64,
    pub counters: serde_json::Value,
}

impl RunReport {
    /// The report with its only nondeterministic field cleared.
    pub fn deterministic(&self) -> RunReport {
        RunReport {
            wall_clock_s: 0.0,
            ..self.clone()
        }
    }
}

fn kind_name(kind: OpKind) -> &'static str {
    match kind {
        OpKind::Move => "move",
        OpKind::Split => "split",
        OpKind::Merge => "merge",
        OpKind::Swap => "swap",
        OpKind::Gate => "gate",
    }
}

/// Time a swap-routed circuit with the same ASAP model as shuttle schedules.
pub fn sabre_schedule(
    graph: &PositionGraph,
    dag: &CircuitDag,
    circuit: &CompiledCircuit,
    durations: &OperationDurations,
) -> Result<Schedule, RunError> {
    let mut placement = circuit.initial_placement.clone();
    let mut ops = Vec::with_capacity(circuit.ops.len());
    for op in &circuit.ops {
        match op {
            SabreOp::Gate { gate, positions } => {
                ops.push(Op::gate(*gate, dag.gate(*gate).operands.clone(), positions.clone()));
            }
            SabreOp::Swap { a, b } => {
                let ions = [placement.occupant(*a), placement.occupant(*b)]
                    .into_iter()
                    .flatten()
                    .collect();
                ops.push(Op::swap(*a, *b, ions));
                placement
                    .apply_swap(graph, *a, *b)
                    .map_err(|e| RunError::Routing(format!("router emitted an illegal swap: {e}")))?;
            }
        }
    }
    assign_times(&ops, durations).map_err(config("durations"))
}

fn sabre_error(e: SabreError) -> RunError {
    match e {
        SabreError::NotSwapOnly | SabreError::UnsupportedArity { .. } => {
            RunError::Config(format!("sabre: {e}"))
        }
        SabreError::InsufficientPositions { .. } | SabreError::Unroutable { .. } => {
            RunError::Infeasible(format!("infeasible: {e}"))
        }
    }
}

fn shaw_error(e: ShawError) -> RunError {
    if e.is_infeasible() {
        RunError::Infeasible(e.to_string())
    } else if matches!(e, ShawError::Costs(_) | ShawError::Schedule(_)) {
        RunError::Config(e.to_string())
    } else {
        RunError::Routing(e.to_string())
    }
}

/// Route `circuit` on `graph` and return the artifact with its report. The wall clock covers
/// backend or cache construction and routing, not parsing or the architecture build.
pub fn run(
    circuit: &CircuitInput,
    arch: &str,
    graph: &Arc<PositionGraph>,
    options: &RunOptions,
) -> Result<(Artifact, RunReport), RunError> {
    let dag = &circuit.dag;
    let durations = &options.durations;
    let costs = TravelCosts::from_durations(durations).map_err(config("durations"))?;
    let (artifact, schedule, counters, wall) = match options.router {
        Router::SabreCg | Router::SabrePg => {
            check_architecture(graph).map_err(sabre_error)?;
            let cfg = SabreConfig {
                layout_passes: options.layout_passes,
                seed: options.seed,
                ..SabreConfig::default()
            };
            let start = Instant::now();
            let result = if options.router == Router::SabreCg {
                compile(dag, &mut CouplingBackend::new(graph, costs.swap), &cfg)
            } else {
                let caches = ArchCaches::build(Arc::clone(graph), costs).map_err(config("durations"))?;
                compile(dag, &mut PositionBackend::new(&caches), &cfg)
            }
            .map_err(sabre_error)?;
            let wall = start.elapsed().as_secs_f64();
            let schedule = sabre_schedule(graph, dag, &result.circuit, durations)?;
            let counters = serde_json::to_value(&result.stats).expect("stats serialize");
            (Artifact::Sabre(result.circuit), schedule, counters, wall)
        }
        Router::Shaw | Router::Lightshaw => {
            let mode = if options.router == Router::Shaw {
                ShawMode::Shaw
            } else {
                ShawMode::LightShaw
            };
            let cfg = ShawConfig {
                seed: options.seed,
                ..ShawConfig::for_mode(mode)
            };
            let start = Instant::now();
            let result = compile_mode(dag, Arc::clone(graph), durations, mode, &cfg).map_err(shaw_error)?;
            let wall = start.elapsed().as_secs_f64();
            let schedule = result.circuit.schedule.clone();
            let counters = serde_json::to_value(&result.stats).expect("stats serialize");
            (Artifact::Shuttle(result.circuit), schedule, counters, wall)
        }
    };
    let mut op_counts = BTreeMap::new();
    for kind in [OpKind::Move, OpKind::Split, OpKind::Merge, OpKind::Swap, OpKind::Gate] {
        op_counts.insert(kind_name(kind).to_string(), schedule.count(kind));
    }
    let report = RunReport {
        circuit: circuit.name.clone(),
        circuit_sha256: circuit.sha256.clone(),
        num_qudits: dag.num_qudits(),
        num_gates: dag.len(),
        arch: arch.to_string(),
        total_capacity: graph.num_slots(),
        num_positions: graph.num_positions(),
        router: options.router,
        seed: options.seed,
        layout_passes: options.layout_passes,
        wall_clock_s: wall,
        op_counts,
        operation_time_us: schedule.total_operation_time(),
        serial_time_us: schedule.serial_operation_time(),
        counters,
    };
    Ok((artifact, report))
}

/// Write `text` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, text: &str) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, text)?;
    std::fs::rename(tmp, path)
}

//! Benchmark manifests, aggregate tables and power-law fits of compile time against total
//! trap capacity.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use log::{info, warn};
use posgraph::bench_circuits::Family;
use posgraph::graph::PositionGraph;
use serde::{Deserialize, Serialize};

use crate::compile::{
    load_arch, load_durations, run, write_atomic, CircuitInput, RunError, RunOptions, RunReport,
    Router,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CircuitSpec {
    Generated {
        family: Family,
        qudits: usize,
        #[serde(default)]
        seed: u64,
    },
    Qasm {
        qasm: String,
    },
}

impl CircuitSpec {
    pub fn load(&self, base: &Path) -> Result<CircuitInput, RunError> {
        match self {
            CircuitSpec::Generated {
                family,
                qudits,
                seed,
            } => Ok(CircuitInput::generated(
                format!("{family}_{qudits}"),
                family.generate(*qudits, *seed),
            )),
            CircuitSpec::Qasm { qasm } => CircuitInput::from_file(&base.join(qasm)),
        }
    }
}

fn one() -> usize {
    1
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_passes() -> usize {
    2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub circuits: Vec<CircuitSpec>,
    pub architectures: Vec<String>,
    pub routers: Vec<Router>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "one")]
    pub repetitions: usize,
    #[serde(default = "default_passes")]
    pub layout_passes: usize,
    /// Durations file, relative to the manifest.
    #[serde(default)]
    pub durations: Option<String>,
}

/// Outcome of one run, as written under `runs/`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub index: usize,
    pub circuit: String,
    pub arch: String,
    pub router: Router,
    pub seed: u64,
    pub repetition: usize,
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<RunReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub router: Router,
    pub circuit: String,
    pub arch: String,
    pub total_capacity: usize,
    pub seed: u64,
    pub runs: usize,
    pub failures: usize,
    /// Mean over successful runs; empty when every run failed.
    pub mean_wall_clock_s: Option<f64>,
    pub operation_time_us: Option<f64>,
    pub status: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub a: f64,
    pub b: f64,
    pub sizes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitRow {
    pub router: Router,
    pub a: f64,
    pub b: f64,
    pub sizes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchSummary {
    pub rows: Vec<BenchRow>,
    pub fits: Vec<FitRow>,
}

/// Least-squares fit of `y = a x^b` on log-log axes. Points with equal `x` are averaged
/// first; `None` with fewer than two distinct sizes or any non-positive value.
pub fn power_law_fit(points: &[(f64, f64)]) -> Option<PowerLawFit> {
    if points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0)) {
        return None;
    }
    let mut by_x: BTreeMap<u64, (f64, f64, usize)> = BTreeMap::new();
    for &(x, y) in points {
        let e = by_x.entry(x.to_bits()).or_insert((x, 0.0, 0));
        e.1 += y;
        e.2 += 1;
    }
    let logs: Vec<(f64, f64)> = by_x
        .values()
        .map(|&(x, sum, n)| (x.ln(), (sum / n as f64).ln()))
        .collect();
    let n = logs.len();
    if n < 2 {
        return None;
    }
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n as f64;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n as f64;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let b = sxy / sxx;
    Some(PowerLawFit {
        a: (my - b * mx).exp(),
        b,
        sizes: n,
    })
}

/// Group records into table rows and fit each router over its successful rows.
pub fn summarize(records: &[RunRecord], capacities: &BTreeMap<String, usize>) -> BenchSummary {
    let mut groups: BTreeMap<(Router, String, String, u64), Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        groups
            .entry((r.router, r.circuit.clone(), r.arch.clone(), r.seed))
            .or_default()
            .push(r);
    }
    let mut rows = Vec::new();
    for ((router, circuit, arch, seed), runs) in groups {
        let ok: Vec<&RunReport> = runs.iter().filter_map(|r| r.report.as_ref()).collect();
        let failures = runs.len() - ok.len();
        let mean = (!ok.is_empty())
            .then(|| ok.iter().map(|r| r.wall_clock_s).sum::<f64>() / ok.len() as f64);
        let status = match (failures, runs.iter().find_map(|r| r.error.as_deref())) {
            (0, _) => "ok".to_string(),
            (_, Some(e)) => format!("failed ({failures}/{}): {e}", runs.len()),
            (_, None) => "failed".to_string(),
        };
        rows.push(BenchRow {
            router,
            total_capacity: capacities.get(&arch).copied().unwrap_or(0),
            circuit,
            arch,
            seed,
            runs: runs.len(),
            failures,
            mean_wall_clock_s: mean,
            operation_time_us: ok.first().map(|r| r.operation_time_us),
            status,
        });
    }
    let mut points: BTreeMap<Router, Vec<(f64, f64)>> = BTreeMap::new();
    for row in &rows {
        if let (0, Some(t)) = (row.failures, row.mean_wall_clock_s) {
            points
                .entry(row.router)
                .or_default()
                .push((row.total_capacity as f64, t));
        }
    }
    let fits = points
        .into_iter()
        .filter_map(|(router, pts)| {
            power_law_fit(&pts).map(|f| FitRow {
                router,
                a: f.a,
                b: f.b,
                sizes: f.sizes,
            })
        })
        .collect();
    BenchSummary { rows, fits }
}

fn slug(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect()
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    let bytes = w.into_inner()?;
    write_atomic(path, &String::from_utf8(bytes)?)?;
    Ok(())
}

/// Run every manifest entry, write per-run records under `out/runs/`, and write
/// `bench.csv`, `fits.csv` and `bench.json` to `out`. Failed runs are recorded and skipped.
pub fn run_manifest(manifest: &Manifest, base: &Path, out: &Path) -> anyhow::Result<BenchSummary> {
    let runs_dir = out.join("runs");
    std::fs::create_dir_all(&runs_dir)?;
    let durations = match &manifest.durations {
        Some(p) => load_durations(&base.join(p.strip_prefix('@').unwrap_or(p)).to_string_lossy())?,
        None => Default::default(),
    };
    let mut archs: Vec<(String, Result<Arc<PositionGraph>, String>)> = Vec::new();
    let mut capacities = BTreeMap::new();
    for a in &manifest.architectures {
        let built = load_arch(a).map(|(_, g)| g).map_err(|e| e.to_string());
        if let Ok(g) = &built {
            capacities.insert(a.clone(), g.num_slots());
        }
        archs.push((a.clone(), built));
    }
    let mut records = Vec::new();
    for spec in &manifest.circuits {
        let circuit = spec.load(base);
        let name = match (&circuit, spec) {
            (Ok(c), _) => c.name.clone(),
            (Err(_), CircuitSpec::Qasm { qasm }) => qasm.clone(),
            (Err(_), CircuitSpec::Generated { family, qudits, .. }) => format!("{family}_{qudits}"),
        };
        for (arch, graph) in &archs {
            for &router in &manifest.routers {
                for &seed in &manifest.seeds {
                    for repetition in 0..manifest.repetitions {
                        let options = RunOptions {
                            router,
                            layout_passes: manifest.layout_passes,
                            seed,
                            durations,
                        };
                        let outcome = match (&circuit, graph) {
                            (Err(e), _) => Err(e.to_string()),
                            (_, Err(e)) => Err(e.clone()),
                            (Ok(c), Ok(g)) => run(c, arch, g, &options)
                                .map(|(_, report)| report)
                                .map_err(|e| e.to_string()),
                        };
                        let index = records.len();
                        if let Err(e) = &outcome {
                            warn!("run {index} ({name} on {arch}, {router}, seed {seed}) failed: {e}");
                        } else {
                            info!("run {index} ({name} on {arch}, {router}, seed {seed}) done");
                        }
                        let record = RunRecord {
                            index,
                            circuit: name.clone(),
                            arch: arch.clone(),
                            router,
                            seed,
                            repetition,
                            ok: outcome.is_ok(),
                            error: outcome.as_ref().err().cloned(),
                            report: outcome.ok(),
                        };
                        let file = runs_dir.join(format!(
                            "{index:04}-{}-{}-{router}-s{seed}-r{repetition}.json",
                            slug(&name),
                            slug(arch)
                        ));
                        write_atomic(&file, &(serde_json::to_string_pretty(&record)? + "\n"))?;
                        records.push(record);
                    }
                }
            }
        }
    }
    let summary = summarize(&records, &capacities);
    write_csv(&out.join("bench.csv"), &summary.rows)?;
    write_csv(&out.join("fits.csv"), &summary.fits)?;
    write_atomic(
        &out.join("bench.json"),
        &(serde_json::to_string_pretty(&summary)? + "\n"),
    )?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_cubic_is_recovered() {
        let pts: Vec<(f64, f64)> = [16.0, 36.0, 80.0, 144.0]
            .iter()
            .map(|&x: &f64| (x, 2.0 * x.powi(3)))
            .collect();
        let fit = power_law_fit(&pts).unwrap();
        assert!((fit.b - 3.0).abs() < 1e-6, "{fit:?}");
        assert!((fit.a - 2.0).abs() < 1e-6, "{fit:?}");
    }

    #[test]
    fn one_size_has_no_fit() {
        assert!(power_law_fit(&[(16.0, 1.0)]).is_none());
        assert!(power_law_fit(&[(16.0, 1.0), (16.0, 2.0)]).is_none());
        assert!(power_law_fit(&[]).is_none());
        assert!(power_law_fit(&[(16.0, 0.0), (32.0, 1.0)]).is_none());
    }

    #[test]
    fn manifest_defaults() {
        let m: Manifest = serde_json::from_str(
            r#"{"circuits":[{"family":"qft","qudits":8},{"qasm":"a.qasm"}],
                "architectures":["grid:2x2:4"],"routers":["shaw","sabre-pg"]}"#,
        )
        .unwrap();
        assert_eq!(m.seeds, vec![0]);
        assert_eq!(m.repetitions, 1);
        assert_eq!(m.routers, vec![Router::Shaw, Router::SabrePg]);
        assert!(matches!(m.circuits[1], CircuitSpec::Qasm { .. }));
    }
}

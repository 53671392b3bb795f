//! Benchmark circuit generators: QFT, single-layer QAOA on a random graph, and Trotterized
//! transverse-field Ising / XY chains.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::{CircuitDag, Qudit};

type GateSpec = (&'static str, Vec<Qudit>, Vec<f64>);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Qft,
    Qaoa,
    Tfim,
    Tfxy,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::Qft, Family::Qaoa, Family::Tfim, Family::Tfxy];

    pub fn generate(self, n: usize, seed: u64) -> CircuitDag {
        match self {
            Family::Qft => qft(n),
            Family::Qaoa => qaoa(n, 0.1, seed),
            Family::Tfim => tfim(n, n / 2),
            Family::Tfxy => tfxy(n, n / 2),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Qft => "qft",
            Family::Qaoa => "qaoa",
            Family::Tfim => "tfim",
            Family::Tfxy => "tfxy",
        })
    }
}

impl FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "qft" => Ok(Family::Qft),
            "qaoa" => Ok(Family::Qaoa),
            "tfim" => Ok(Family::Tfim),
            "tfxy" => Ok(Family::Tfxy),
            other => Err(format!("unknown circuit family `{other}`")),
        }
    }
}

fn build(n: usize, gates: Vec<GateSpec>) -> CircuitDag {
    CircuitDag::new(n, gates).expect("generated gates are well formed")
}

/// Textbook QFT: `h` and controlled phases per qudit, then the bit-reversal swaps.
pub fn qft(n: usize) -> CircuitDag {
    let mut gates: Vec<GateSpec> = Vec::new();
    for i in 0..n {
        gates.push(("h", vec![i], vec![]));
        for j in i + 1..n {
            let angle = PI / (1u64 << (j - i).min(62)) as f64;
            gates.push(("cp", vec![j, i], vec![angle]));
        }
    }
    for i in 0..n / 2 {
        gates.push(("swap", vec![i, n - 1 - i], vec![]));
    }
    build(n, gates)
}

/// Edges of a G(n, p) random graph in lexicographic order.
pub fn erdos_renyi(n: usize, p: f64, seed: u64) -> Vec<(Qudit, Qudit)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    edges
}

/// One QAOA layer for MaxCut on `G(n, p)`: `h` on every qudit, `rzz` per edge, `rx` mixer.
pub fn qaoa(n: usize, p: f64, seed: u64) -> CircuitDag {
    let gamma = 0.7;
    let beta = 0.3;
    let mut gates: Vec<GateSpec> = (0..n).map(|i| ("h", vec![i], vec![])).collect();
    for (a, b) in erdos_renyi(n, p, seed) {
        gates.push(("rzz", vec![a, b], vec![2.0 * gamma]));
    }
    gates.extend((0..n).map(|i| ("rx", vec![i], vec![2.0 * beta])));
    build(n, gates)
}

/// Open-chain Ising evolution: per step `rzz` on every bond, then `rx` on every site.
pub fn tfim(n: usize, steps: usize) -> CircuitDag {
    let dt = 0.1;
    let mut gates: Vec<GateSpec> = Vec::new();
    for _ in 0..steps {
        for i in 0..n.saturating_sub(1) {
            gates.push(("rzz", vec![i, i + 1], vec![2.0 * dt]));
        }
        for i in 0..n {
            gates.push(("rx", vec![i], vec![2.0 * dt]));
        }
    }
    build(n, gates)
}

/// Open-chain XY evolution: per step `rxx` and `ryy` on every bond, then `rz` on every site.
pub fn tfxy(n: usize, steps: usize) -> CircuitDag {
    let dt = 0.1;
    let mut gates: Vec<GateSpec> = Vec::new();
    for _ in 0..steps {
        for i in 0..n.saturating_sub(1) {
            gates.push(("rxx", vec![i, i + 1], vec![2.0 * dt]));
            gates.push(("ryy", vec![i, i + 1], vec![2.0 * dt]));
        }
        for i in 0..n {
            gates.push(("rz", vec![i], vec![2.0 * dt]));
        }
    }
    build(n, gates)
}

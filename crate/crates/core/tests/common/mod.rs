#![allow(dead_code)]

use num_complex::Complex64;
use qnet::{build_random_all_to_all, DriveSpec, LoadSpec, NetworkSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const OMEGA_0: f64 = 1000.0;
pub const SIZES: [usize; 4] = [2, 5, 10, 50];
pub const PER_SIZE: usize = 25;
pub const LOADS_PER_NETWORK: usize = 10;

pub struct CorpusEntry {
    pub spec: NetworkSpec,
    pub loads: Vec<LoadSpec>,
}

/// Seeded random all-to-all networks with detuned nodes, nonuniform losses,
/// a complex drive on node 0 and the load on the last node.
pub fn network(n: usize, seed: u64) -> NetworkSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0000 + seed);
    let rabi = Complex64::from_polar(rng.random_range(0.5..1.5), rng.random_range(0.0..std::f64::consts::TAU));
    let drive = DriveSpec { node: 0, omega_d: OMEGA_0 + rng.random_range(-3.0..3.0), rabi };
    let load = LoadSpec { node: n - 1, delta_omega: 0.0, gamma_load: 1.0 };
    let mut spec = build_random_all_to_all(n, OMEGA_0, 2.5, 1.0, 1.0, seed, drive, load).unwrap();
    for k in 0..n {
        spec.node_frequencies[k] = OMEGA_0 + rng.random_range(-2.0..2.0);
        spec.intrinsic_decays[k] = rng.random_range(0.3..1.5);
    }
    spec
}

pub fn loads(spec: &NetworkSpec, seed: u64) -> Vec<LoadSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x10ad_0000 + seed);
    (0..LOADS_PER_NETWORK)
        .map(|_| LoadSpec {
            node: spec.load.node,
            delta_omega: rng.random_range(-3.0..3.0),
            gamma_load: 10f64.powf(rng.random_range(-1.0..1.0)),
        })
        .collect()
}

pub fn corpus() -> Vec<CorpusEntry> {
    let mut out = Vec::new();
    for (i, &n) in SIZES.iter().enumerate() {
        for k in 0..PER_SIZE {
            let seed = (i * 1000 + k) as u64;
            let spec = network(n, seed);
            let loads = loads(&spec, seed);
            out.push(CorpusEntry { spec, loads });
        }
    }
    out
}

pub fn rel_err(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm()
}

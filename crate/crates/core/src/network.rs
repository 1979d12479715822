//! Network data model, validation and the deterministic network generators.
//!
//! All frequencies and rates are expressed in units of a reference decay
//! rate, with ħ = 1, so powers come out in units of that rate squared.

use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// Coherent drive applied to a single node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveSpec {
    pub node: usize,
    pub omega_d: f64,
    pub rabi: Complex64,
}

/// Dissipative load attached to a single node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadSpec {
    pub node: usize,
    /// Load-induced frequency shift of the load node.
    pub delta_omega: f64,
    /// Decay rate from the load node into the load.
    pub gamma_load: f64,
}

impl LoadSpec {
    /// Diagonal entry `i δω − Γ/2` the load adds to the steady-state matrix.
    pub fn h_load(&self) -> Complex64 {
        Complex64::new(-0.5 * self.gamma_load, self.delta_omega)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    pub node_frequencies: Vec<f64>,
    pub intrinsic_decays: Vec<f64>,
    /// Real symmetric hopping matrix with zero diagonal.
    pub couplings: DMatrix<f64>,
    pub drive: DriveSpec,
    pub load: LoadSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Empty,
    DimensionMismatch { field: &'static str, expected: usize, found: usize },
    NonFinite { field: &'static str },
    AsymmetricCoupling { i: usize, j: usize },
    NonzeroDiagonal { node: usize },
    NegativeDecay { node: usize, value: f64 },
    DriveNodeOutOfRange { node: usize, n_nodes: usize },
    LoadNodeOutOfRange { node: usize, n_nodes: usize },
    NonPositiveDriveFrequency { omega_d: f64 },
    NegativeLoadDecay { value: f64 },
    /// Largest coupling or rate is not small against the smallest node frequency.
    BornMarkov { max_rate: f64, min_frequency: f64 },
}

impl Violation {
    pub fn severity(&self) -> Severity {
        match self {
            Violation::BornMarkov { .. } => Severity::Warning,
            _ => Severity::Error,
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity() == Severity::Error
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Empty => write!(f, "network has no nodes"),
            Violation::DimensionMismatch { field, expected, found } => {
                write!(f, "{field}: expected dimension {expected}, found {found}")
            }
            Violation::NonFinite { field } => write!(f, "{field}: non-finite value"),
            Violation::AsymmetricCoupling { i, j } => write!(f, "coupling J[{i}][{j}] != J[{j}][{i}]"),
            Violation::NonzeroDiagonal { node } => write!(f, "coupling J[{node}][{node}] must be zero"),
            Violation::NegativeDecay { node, value } => {
                write!(f, "intrinsic decay of node {node} is negative ({value})")
            }
            Violation::DriveNodeOutOfRange { node, n_nodes } => {
                write!(f, "drive node {node} out of range for {n_nodes} nodes")
            }
            Violation::LoadNodeOutOfRange { node, n_nodes } => {
                write!(f, "load node {node} out of range for {n_nodes} nodes")
            }
            Violation::NonPositiveDriveFrequency { omega_d } => {
                write!(f, "drive frequency must be positive (got {omega_d})")
            }
            Violation::NegativeLoadDecay { value } => write!(f, "load decay rate is negative ({value})"),
            Violation::BornMarkov { max_rate, min_frequency } => write!(
                f,
                "warning: rate {max_rate} is not small against node frequency {min_frequency} (Born-Markov regime)"
            ),
        }
    }
}

impl NetworkSpec {
    pub fn n_nodes(&self) -> usize {
        self.node_frequencies.len()
    }

    /// All invariant violations, errors and warnings alike.
    pub fn validate(&self) -> Vec<Violation> {
        validate(self)
    }

    /// Fails with the error-severity violations, if any.
    pub fn ensure_valid(&self) -> Result<()> {
        let errors: Vec<_> = validate(self).into_iter().filter(Violation::is_error).collect();
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(errors))
        }
    }

    /// `ω_nm`: node frequency on the diagonal, hopping off the diagonal.
    pub fn frequency_matrix(&self) -> DMatrix<f64> {
        let mut w = self.couplings.clone();
        for (n, &omega) in self.node_frequencies.iter().enumerate() {
            w[(n, n)] = omega;
        }
        w
    }

    /// Same network with a different load.
    pub fn with_load(&self, load: LoadSpec) -> Self {
        Self { load, ..self.clone() }
    }

    /// Same network with a different drive.
    pub fn with_drive(&self, drive: DriveSpec) -> Self {
        Self { drive, ..self.clone() }
    }

    /// Per-node load decay rates `Γ_n`: nonzero only at the load node.
    pub fn load_decays(&self) -> Vec<f64> {
        let mut g = vec![0.0; self.n_nodes()];
        if let Some(slot) = g.get_mut(self.load.node) {
            *slot = self.load.gamma_load;
        }
        g
    }

    /// Bandwidth of the coupling matrix (largest |n − m| with J_nm ≠ 0).
    pub fn coupling_bandwidth(&self) -> usize {
        let n = self.couplings.nrows();
        let mut bw = 0;
        for i in 0..n {
            for j in 0..self.couplings.ncols() {
                if self.couplings[(i, j)] != 0.0 {
                    bw = bw.max(i.abs_diff(j));
                }
            }
        }
        bw
    }
}

/// Checks every invariant of a [`NetworkSpec`]; an empty result means valid.
pub fn validate(spec: &NetworkSpec) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = spec.node_frequencies.len();
    if n == 0 {
        out.push(Violation::Empty);
    }
    if spec.intrinsic_decays.len() != n {
        out.push(Violation::DimensionMismatch {
            field: "intrinsic_decays",
            expected: n,
            found: spec.intrinsic_decays.len(),
        });
    }
    let (rows, cols) = spec.couplings.shape();
    if rows != n || cols != n {
        out.push(Violation::DimensionMismatch {
            field: "couplings",
            expected: n,
            found: if rows != n { rows } else { cols },
        });
    }
    if spec.node_frequencies.iter().any(|x| !x.is_finite()) {
        out.push(Violation::NonFinite { field: "node_frequencies" });
    }
    if spec.intrinsic_decays.iter().any(|x| !x.is_finite()) {
        out.push(Violation::NonFinite { field: "intrinsic_decays" });
    }
    if spec.couplings.iter().any(|x| !x.is_finite()) {
        out.push(Violation::NonFinite { field: "couplings" });
    }
    if !spec.drive.omega_d.is_finite() || !spec.drive.rabi.re.is_finite() || !spec.drive.rabi.im.is_finite() {
        out.push(Violation::NonFinite { field: "drive" });
    }
    if !spec.load.delta_omega.is_finite() || !spec.load.gamma_load.is_finite() {
        out.push(Violation::NonFinite { field: "load" });
    }

    if rows == cols {
        for i in 0..rows {
            if spec.couplings[(i, i)] != 0.0 {
                out.push(Violation::NonzeroDiagonal { node: i });
            }
            for j in (i + 1)..cols {
                if spec.couplings[(i, j)] != spec.couplings[(j, i)] {
                    out.push(Violation::AsymmetricCoupling { i, j });
                }
            }
        }
    }
    for (node, &value) in spec.intrinsic_decays.iter().enumerate() {
        if value < 0.0 {
            out.push(Violation::NegativeDecay { node, value });
        }
    }
    if spec.drive.node >= n {
        out.push(Violation::DriveNodeOutOfRange { node: spec.drive.node, n_nodes: n });
    }
    if spec.load.node >= n {
        out.push(Violation::LoadNodeOutOfRange { node: spec.load.node, n_nodes: n });
    }
    if !(spec.drive.omega_d > 0.0) {
        out.push(Violation::NonPositiveDriveFrequency { omega_d: spec.drive.omega_d });
    }
    if spec.load.gamma_load < 0.0 {
        out.push(Violation::NegativeLoadDecay { value: spec.load.gamma_load });
    }

    if n > 0 && out.iter().all(|v| !v.is_error()) {
        let max_rate = spec
            .couplings
            .iter()
            .map(|x| x.abs())
            .chain(spec.intrinsic_decays.iter().copied())
            .chain(std::iter::once(spec.load.gamma_load))
            .fold(0.0, f64::max);
        let min_frequency = spec.node_frequencies.iter().copied().fold(f64::INFINITY, f64::min);
        if max_rate >= min_frequency / 10.0 {
            out.push(Violation::BornMarkov { max_rate, min_frequency });
        }
    }
    out
}

/// Uniform nearest-neighbour chain.
pub fn build_chain(
    n_nodes: usize,
    omega_0: f64,
    j: f64,
    gamma: f64,
    drive: DriveSpec,
    load: LoadSpec,
) -> Result<NetworkSpec> {
    let mut couplings = DMatrix::zeros(n_nodes, n_nodes);
    for n in 1..n_nodes {
        couplings[(n - 1, n)] = j;
        couplings[(n, n - 1)] = j;
    }
    let spec = NetworkSpec {
        node_frequencies: vec![omega_0; n_nodes],
        intrinsic_decays: vec![gamma; n_nodes],
        couplings,
        drive,
        load,
    };
    spec.ensure_valid()?;
    Ok(spec)
}

/// All-to-all network with one normal draw per unordered pair.
///
/// Pairs are drawn in row-major order over `n < m` from a ChaCha8 stream
/// seeded with `seed`, so the output is a pure function of the arguments.
#[allow(clippy::too_many_arguments)]
pub fn build_random_all_to_all(
    n_nodes: usize,
    omega_0: f64,
    j_avg: f64,
    j_std: f64,
    gamma: f64,
    seed: u64,
    drive: DriveSpec,
    load: LoadSpec,
) -> Result<NetworkSpec> {
    if n_nodes == 0 {
        return Err(Error::Validation(vec![Violation::Empty]));
    }
    if !(j_std >= 0.0) {
        return Err(Error::InvalidArgument(format!("coupling standard deviation must be >= 0 (got {j_std})")));
    }
    let normal = Normal::new(j_avg, j_std)
        .map_err(|e| Error::InvalidArgument(format!("coupling distribution: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut couplings = DMatrix::zeros(n_nodes, n_nodes);
    for n in 0..n_nodes {
        for m in (n + 1)..n_nodes {
            let x: f64 = normal.sample(&mut rng);
            couplings[(n, m)] = x;
            couplings[(m, n)] = x;
        }
    }
    let spec = NetworkSpec {
        node_frequencies: vec![omega_0; n_nodes],
        intrinsic_decays: vec![gamma; n_nodes],
        couplings,
        drive,
        load,
    };
    spec.ensure_valid()?;
    Ok(spec)
}

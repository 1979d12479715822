//! Density-matrix ground truth in a truncated Fock space.
//!
//! The rotating-frame master equation
//!
//! ```text
//! dρ/dt = −i[H, ρ] + Σ_n γ_n D[a_n]ρ + Γ D[a_N]ρ,   D[c]ρ = cρc† − ½{c†c, ρ}
//! H = Σ (ω_n − ω_d) a_n†a_n + Σ J_nm a_n†a_m − δω_N a_N†a_N + Ω^* a_d + Ω a_d†
//! ```
//!
//! is vectorized column-wise (`vec(AρB) = (Bᵀ ⊗ A) vec ρ`) and its steady
//! state found from the null space of the Liouvillian. The Hamiltonian signs
//! are those for which the mean-field equation of motion is
//! `dã/dt = (H̃ + H_L) ã − iΩ`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::network::NetworkSpec;
use crate::power::{general_power_from_correlators, load_power, radiated_power};
use crate::steady_state::solve_amplitudes;

/// Largest admitted Liouvillian dimension `D²`.
pub const LIOUVILLIAN_CAP: usize = 4096;

const FACTORIZATION_EPS: f64 = 1e-12;
const RANK_TOLERANCE: f64 = 1e-10;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FockConfig {
    pub n_max: usize,
    pub nodes: usize,
}

impl FockConfig {
    pub fn new(n_max: usize, nodes: usize) -> Result<Self> {
        if n_max < 1 {
            return Err(Error::InvalidArgument("n_max must be at least 1".into()));
        }
        if nodes < 1 {
            return Err(Error::InvalidArgument("Fock space needs at least one node".into()));
        }
        let cfg = Self { n_max, nodes };
        let dim = cfg.liouvillian_dim().unwrap_or(usize::MAX);
        if dim > LIOUVILLIAN_CAP {
            return Err(Error::CapacityError { dim, cap: LIOUVILLIAN_CAP });
        }
        Ok(cfg)
    }

    fn checked_hilbert_dim(&self) -> Option<usize> {
        (0..self.nodes).try_fold(1usize, |acc, _| acc.checked_mul(self.n_max + 1))
    }

    pub fn hilbert_dim(&self) -> usize {
        self.checked_hilbert_dim().expect("validated Fock dimension")
    }

    fn liouvillian_dim(&self) -> Option<usize> {
        self.checked_hilbert_dim().and_then(|d| d.checked_mul(d))
    }

    /// Basis index stride of a node; node 0 is the most significant digit.
    fn stride(&self, node: usize) -> usize {
        (self.n_max + 1).pow((self.nodes - 1 - node) as u32)
    }

    fn occupation(&self, state: usize, node: usize) -> usize {
        (state / self.stride(node)) % (self.n_max + 1)
    }

    /// Truncated annihilation operator of `node`.
    pub fn annihilation(&self, node: usize) -> DMatrix<Complex64> {
        let d = self.hilbert_dim();
        let stride = self.stride(node);
        let mut a = DMatrix::zeros(d, d);
        for s in 0..d {
            let k = self.occupation(s, node);
            if k > 0 {
                a[(s - stride, s)] = Complex64::new((k as f64).sqrt(), 0.0);
            }
        }
        a
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityState {
    pub rho: DMatrix<Complex64>,
    pub cfg: FockConfig,
}

impl DensityState {
    /// Checks trace, Hermiticity and positivity of `rho`.
    pub fn new(rho: DMatrix<Complex64>, cfg: FockConfig) -> Result<Self> {
        let d = cfg.hilbert_dim();
        if rho.shape() != (d, d) {
            return Err(Error::InvalidDensity(format!("expected {d}x{d}, got {:?}", rho.shape())));
        }
        let tr = rho.trace();
        if (tr - ONE).norm() > 1e-10 {
            return Err(Error::InvalidDensity(format!("trace {tr}")));
        }
        let herm = (&rho - rho.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if herm > 1e-10 {
            return Err(Error::InvalidDensity(format!("Hermiticity defect {herm:.3e}")));
        }
        let rho = (&rho + rho.adjoint()) * Complex64::new(0.5, 0.0);
        let min_eig = rho.clone().symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
        if min_eig < -1e-8 {
            return Err(Error::InvalidDensity(format!("negative eigenvalue {min_eig:.3e}")));
        }
        Ok(Self { rho, cfg })
    }

    /// `|0…0⟩⟨0…0|`.
    pub fn vacuum(cfg: FockConfig) -> Self {
        let d = cfg.hilbert_dim();
        let mut rho = DMatrix::zeros(d, d);
        rho[(0, 0)] = ONE;
        Self { rho, cfg }
    }
}

/// Adds `coeff · (a ⊗ b)` into `out`, skipping zero entries.
fn add_kron(out: &mut DMatrix<Complex64>, coeff: Complex64, a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) {
    let (p, q) = b.shape();
    let nz_b: Vec<(usize, usize, Complex64)> = (0..q)
        .flat_map(|jb| (0..p).map(move |ib| (ib, jb)))
        .filter_map(|(ib, jb)| {
            let v = b[(ib, jb)];
            (v != ZERO).then_some((ib, jb, v))
        })
        .collect();
    for ja in 0..a.ncols() {
        for ia in 0..a.nrows() {
            let va = a[(ia, ja)];
            if va == ZERO {
                continue;
            }
            let s = coeff * va;
            for &(ib, jb, vb) in &nz_b {
                out[(ia * p + ib, ja * q + jb)] += s * vb;
            }
        }
    }
}

/// Rotating-frame Hamiltonian on the truncated space.
pub fn rotating_hamiltonian(spec: &NetworkSpec, cfg: &FockConfig) -> DMatrix<Complex64> {
    let d = cfg.hilbert_dim();
    let ops: Vec<DMatrix<Complex64>> = (0..cfg.nodes).map(|k| cfg.annihilation(k)).collect();
    let mut h = DMatrix::<Complex64>::zeros(d, d);
    let wd = spec.drive.omega_d;
    for n in 0..cfg.nodes {
        let mut e = spec.node_frequencies[n] - wd;
        if n == spec.load.node {
            e -= spec.load.delta_omega;
        }
        if e != 0.0 {
            h += ops[n].adjoint() * &ops[n] * Complex64::new(e, 0.0);
        }
        for m in 0..cfg.nodes {
            let j = spec.couplings[(n, m)];
            if n != m && j != 0.0 {
                h += ops[n].adjoint() * &ops[m] * Complex64::new(j, 0.0);
            }
        }
    }
    let rabi = spec.drive.rabi;
    let a = &ops[spec.drive.node];
    h += a * rabi.conj() + a.adjoint() * rabi;
    h
}

/// Vectorized Liouvillian, a `D² × D²` matrix acting on column-stacked ρ.
pub fn build_liouvillian(spec: &NetworkSpec, cfg: &FockConfig) -> Result<DMatrix<Complex64>> {
    spec.ensure_valid()?;
    if cfg.nodes != spec.n_nodes() {
        return Err(Error::InvalidArgument(format!(
            "Fock config has {} nodes, network has {}",
            cfg.nodes,
            spec.n_nodes()
        )));
    }
    let cfg = FockConfig::new(cfg.n_max, cfg.nodes)?;
    let d = cfg.hilbert_dim();
    let id = DMatrix::<Complex64>::identity(d, d);
    let h = rotating_hamiltonian(spec, &cfg);
    let mut l = DMatrix::<Complex64>::zeros(d * d, d * d);

    add_kron(&mut l, -I, &id, &h);
    add_kron(&mut l, I, &h.transpose(), &id);

    let rates = spec.load_decays();
    for n in 0..cfg.nodes {
        let rate = spec.intrinsic_decays[n] + rates[n];
        if rate == 0.0 {
            continue;
        }
        let c = cfg.annihilation(n);
        let cdc = c.adjoint() * &c;
        let r = Complex64::new(rate, 0.0);
        add_kron(&mut l, r, &c.map(|z| z.conj()), &c);
        add_kron(&mut l, r * -0.5, &id, &cdc);
        add_kron(&mut l, r * -0.5, &cdc.transpose(), &id);
    }
    Ok(l)
}

/// Applies a vectorized Liouvillian to a density matrix.
pub fn apply_liouvillian(l: &DMatrix<Complex64>, rho: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let d = rho.nrows();
    let v = DVector::from_column_slice(rho.as_slice());
    let out = l * v;
    DMatrix::from_column_slice(d, d, out.as_slice())
}

/// Solves `L vec ρ = 0`, `tr ρ = 1` as one stacked least-squares problem
/// via column-pivoted QR; a second small pivot signals a degenerate kernel.
pub fn steady_state_density(liouvillian: &DMatrix<Complex64>, cfg: &FockConfig) -> Result<DensityState> {
    let d = cfg.hilbert_dim();
    let n = d * d;
    if liouvillian.shape() != (n, n) {
        return Err(Error::InvalidArgument(format!("Liouvillian must be {n}x{n}")));
    }
    let mut a = DMatrix::<Complex64>::zeros(n + 1, n);
    a.view_mut((0, 0), (n, n)).copy_from(liouvillian);
    for k in 0..d {
        a[(n, k + d * k)] = ONE;
    }
    let qr = a.col_piv_qr();
    let r = qr.r();
    let top = r[(0, 0)].norm();
    let deficiency = (0..n).filter(|&k| !(r[(k, k)].norm() > RANK_TOLERANCE * top)).count();
    if deficiency > 0 {
        return Err(Error::NonUniqueSteadyState { deficiency });
    }
    let mut b = DVector::<Complex64>::zeros(n + 1);
    b[n] = ONE;
    qr.q_tr_mul(&mut b);
    let rhs = b.rows(0, n).into_owned();
    let mut x = r
        .solve_upper_triangular(&rhs)
        .ok_or(Error::NonUniqueSteadyState { deficiency: 1 })?;
    qr.p().inv_permute_rows(&mut x);
    let rho = DMatrix::from_column_slice(d, d, x.as_slice());
    DensityState::new(rho, *cfg)
}

/// `tr(a_n ρ)`.
pub fn expectation_amplitude(state: &DensityState, node: usize) -> Result<Complex64> {
    check_node(state, node)?;
    Ok((state.cfg.annihilation(node) * &state.rho).trace())
}

/// `tr(a_n† a_m ρ)`.
pub fn expectation_correlator(state: &DensityState, n: usize, m: usize) -> Result<Complex64> {
    check_node(state, n)?;
    check_node(state, m)?;
    let op = state.cfg.annihilation(n).adjoint() * state.cfg.annihilation(m);
    Ok((op * &state.rho).trace())
}

fn check_node(state: &DensityState, node: usize) -> Result<()> {
    if node >= state.cfg.nodes {
        return Err(Error::InvalidArgument(format!("node {node} out of range for {} nodes", state.cfg.nodes)));
    }
    Ok(())
}

/// All `⟨a_n⟩` and the matrix of `⟨a_n† a_m⟩`.
pub fn moments(state: &DensityState) -> (DVector<Complex64>, DMatrix<Complex64>) {
    let k = state.cfg.nodes;
    let ops: Vec<DMatrix<Complex64>> = (0..k).map(|n| state.cfg.annihilation(n)).collect();
    let first = DVector::from_fn(k, |n, _| (&ops[n] * &state.rho).trace());
    let second = DMatrix::from_fn(k, k, |n, m| (ops[n].adjoint() * &ops[m] * &state.rho).trace());
    (first, second)
}

/// `max_nm |⟨a_n†a_m⟩ − ⟨a_n†⟩⟨a_m⟩| / max(|⟨a_n†⟩⟨a_m⟩|, ε)`.
pub fn factorization_residual(state: &DensityState) -> f64 {
    let (first, second) = moments(state);
    let k = first.len();
    let mut worst: f64 = 0.0;
    for n in 0..k {
        for m in 0..k {
            let product = first[n].conj() * first[m];
            let r = (second[(n, m)] - product).norm() / product.norm().max(FACTORIZATION_EPS);
            worst = worst.max(r);
        }
    }
    worst
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeComparison {
    pub node: usize,
    pub oracle_re: f64,
    pub oracle_im: f64,
    pub linear_re: f64,
    pub linear_im: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleComparison {
    pub n_max: usize,
    pub hilbert_dim: usize,
    pub amplitudes: Vec<NodeComparison>,
    /// `||⟨a⟩_oracle − ã|| / ||ã||`.
    pub amplitude_rel_error: f64,
    pub factorization_residual: f64,
    pub oracle_p_in: f64,
    pub oracle_p_r: f64,
    pub oracle_p_l: f64,
    pub closed_p_r: f64,
    pub closed_p_l: f64,
    pub p_r_rel_error: f64,
    pub p_l_rel_error: f64,
    /// `|P_in − P_R − P_L| / P_in` from oracle quantities.
    pub oracle_balance_residual: f64,
}

fn rel(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        a.abs()
    } else {
        (a - b).abs() / b.abs()
    }
}

/// Runs the density-matrix oracle on `spec` and compares it against the
/// linear amplitude solve and the factorized power formulas.
pub fn compare_with_linear_solve(spec: &NetworkSpec, n_max: usize) -> Result<OracleComparison> {
    let cfg = FockConfig::new(n_max, spec.n_nodes())?;
    let l = build_liouvillian(spec, &cfg)?;
    let state = steady_state_density(&l, &cfg)?;
    let (first, second) = moments(&state);
    let linear = solve_amplitudes(spec)?;

    let amplitudes = (0..spec.n_nodes())
        .map(|n| {
            let (o, a) = (first[n], linear.amplitudes[n]);
            NodeComparison {
                node: n,
                oracle_re: o.re,
                oracle_im: o.im,
                linear_re: a.re,
                linear_im: a.im,
                rel_error: if a.norm() > 0.0 { (o - a).norm() / a.norm() } else { o.norm() },
            }
        })
        .collect();
    let diff = (&first - &linear.amplitudes).norm();
    let scale = linear.amplitudes.norm();
    let amplitude_rel_error = if scale > 0.0 { diff / scale } else { diff };

    let (oracle_p_r, oracle_p_l) = general_power_from_correlators(spec, &first, &second)?;
    let oracle_p_in = -2.0 * spec.drive.omega_d * (spec.drive.rabi.conj() * first[spec.drive.node]).im;
    let closed_p_r = radiated_power(spec, &linear);
    let closed_p_l = load_power(spec, &linear);

    Ok(OracleComparison {
        n_max,
        hilbert_dim: cfg.hilbert_dim(),
        amplitudes,
        amplitude_rel_error,
        factorization_residual: factorization_residual(&state),
        oracle_p_in,
        oracle_p_r,
        oracle_p_l,
        closed_p_r,
        closed_p_l,
        p_r_rel_error: rel(oracle_p_r, closed_p_r),
        p_l_rel_error: rel(oracle_p_l, closed_p_l),
        oracle_balance_residual: rel(oracle_p_r + oracle_p_l, oracle_p_in),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{build_chain, DriveSpec, LoadSpec};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn one_node(gamma: f64, rabi: Complex64, omega_d: f64) -> NetworkSpec {
        let drive = DriveSpec { node: 0, omega_d, rabi };
        let load = LoadSpec { node: 0, delta_omega: 0.0, gamma_load: 0.0 };
        build_chain(1, 1000.0, 0.0, gamma, drive, load).unwrap()
    }

    fn sorted_spectrum(l: &DMatrix<Complex64>) -> Vec<Complex64> {
        let mut ev: Vec<Complex64> = l.clone().eigenvalues().unwrap().iter().copied().collect();
        ev.sort_by(|a, b| b.re.partial_cmp(&a.re).unwrap());
        ev
    }

    #[test]
    fn capacity_is_enforced() {
        assert!(matches!(FockConfig::new(5, 3), Err(Error::CapacityError { .. })));
        assert!(FockConfig::new(7, 2).is_ok());
        assert!(matches!(FockConfig::new(8, 2), Err(Error::CapacityError { .. })));
        assert!(FockConfig::new(0, 1).is_err());
        assert!(matches!(FockConfig::new(3, 40), Err(Error::CapacityError { .. })));
    }

    #[test]
    fn two_level_damping_spectrum() {
        let gamma = 0.8;
        let spec = one_node(gamma, c(0.0, 0.0), 1000.0);
        let cfg = FockConfig::new(1, 1).unwrap();
        let l = build_liouvillian(&spec, &cfg).unwrap();
        let ev = sorted_spectrum(&l);
        let expected = [0.0, -gamma / 2.0, -gamma / 2.0, -gamma];
        for (e, x) in ev.iter().zip(expected) {
            assert!((e - c(x, 0.0)).norm() < 1e-12, "{ev:?}");
        }
    }

    #[test]
    fn undriven_steady_state_is_vacuum() {
        let spec = one_node(1.0, c(0.0, 0.0), 1000.0);
        let cfg = FockConfig::new(3, 1).unwrap();
        let l = build_liouvillian(&spec, &cfg).unwrap();
        let st = steady_state_density(&l, &cfg).unwrap();
        let vac = DensityState::vacuum(cfg);
        assert!((&st.rho - &vac.rho).norm() < 1e-12);
        assert!(expectation_amplitude(&st, 0).unwrap().norm() < 1e-12);
        assert!(expectation_correlator(&st, 0, 0).unwrap().norm() < 1e-12);
        assert_eq!(factorization_residual(&vac), 0.0);
        assert!(expectation_amplitude(&st, 1).is_err());
    }

    fn random_hermitian(d: usize, seed: u64) -> DMatrix<Complex64> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let m = DMatrix::from_fn(d, d, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        &m + m.adjoint()
    }

    fn two_node_spec(rabi: f64) -> NetworkSpec {
        let drive = DriveSpec { node: 0, omega_d: 1002.5, rabi: c(rabi, 0.0) };
        let load = LoadSpec { node: 1, delta_omega: 0.3, gamma_load: 1.5 };
        let mut s = build_chain(2, 1000.0, 2.5, 1.0, drive, load).unwrap();
        s.intrinsic_decays = vec![1.0, 0.5];
        s
    }

    #[test]
    fn liouvillian_preserves_trace_and_hermiticity() {
        let spec = two_node_spec(0.3);
        let cfg = FockConfig::new(2, 2).unwrap();
        let l = build_liouvillian(&spec, &cfg).unwrap();
        for seed in 0..5 {
            let rho = random_hermitian(cfg.hilbert_dim(), seed);
            let out = apply_liouvillian(&l, &rho);
            assert!(out.trace().norm() < 1e-12, "trace {}", out.trace());
            assert!((&out - out.adjoint()).norm() < 1e-12);
        }
    }

    #[test]
    fn weak_drive_single_node_matches_scalar_solution() {
        let gamma = 1.0;
        let rabi = c(0.05 * gamma, 0.0);
        let spec = one_node(gamma, rabi, 1000.0);
        let cfg = FockConfig::new(4, 1).unwrap();
        let l = build_liouvillian(&spec, &cfg).unwrap();
        let st = steady_state_density(&l, &cfg).unwrap();
        let a = expectation_amplitude(&st, 0).unwrap();
        let expected = -2.0 * I * rabi / gamma;
        assert!((a - expected).norm() / expected.norm() < 1e-4, "{a} vs {expected}");
        let n = expectation_correlator(&st, 0, 0).unwrap();
        assert!(n.re >= a.norm_sqr() * (1.0 - 1e-9));
    }

    #[test]
    fn complex_drive_and_lamb_shift_follow_the_linear_model() {
        let mut spec = two_node_spec(0.04);
        spec.drive.rabi = c(0.03, -0.025);
        let cmp = compare_with_linear_solve(&spec, 5).unwrap();
        assert!(cmp.amplitude_rel_error < 1e-4, "{cmp:?}");
        assert!(cmp.p_l_rel_error < 1e-3 && cmp.p_r_rel_error < 1e-3);
        assert!(cmp.oracle_balance_residual < 1e-3);
    }

    #[test]
    fn lossless_undriven_network_has_degenerate_kernel() {
        let spec = one_node(0.0, c(0.0, 0.0), 1000.0);
        let cfg = FockConfig::new(2, 1).unwrap();
        let l = build_liouvillian(&spec, &cfg).unwrap();
        assert!(matches!(steady_state_density(&l, &cfg), Err(Error::NonUniqueSteadyState { .. })));
    }

    #[test]
    fn density_invariants_are_checked() {
        let cfg = FockConfig::new(1, 1).unwrap();
        let bad_trace = DMatrix::from_diagonal_element(2, 2, c(0.6, 0.0));
        assert!(DensityState::new(bad_trace, cfg).is_err());
        let negative = DMatrix::from_row_slice(2, 2, &[c(1.5, 0.0), ZERO, ZERO, c(-0.5, 0.0)]);
        assert!(DensityState::new(negative, cfg).is_err());
        assert!(DensityState::new(DensityState::vacuum(cfg).rho, cfg).is_ok());
    }
}

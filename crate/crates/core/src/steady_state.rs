//! Rotating-frame steady state of the driven network.
//!
//! In the frame rotating at the drive frequency the mean field amplitudes
//! obey `dã/dt = (H̃ + H_L) ã − iΩ`, so the steady state solves
//! `(H̃ + H_L) ã = iΩ` with
//!
//! ```text
//! H̃_nm = i(δ_nm ω_d − ω_nm) − δ_nm γ_n / 2,    (H_L)_nn = i δω_n − Γ_n / 2.
//! ```

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::linear_grid;
use crate::linalg::{vec_norm, ComplexLu, MAX_CONDITION};
use crate::network::NetworkSpec;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Relative residual bound every returned steady state satisfies.
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveMatrix {
    pub h_tilde: DMatrix<Complex64>,
    /// Diagonal of `H_L`; nonzero only at the load node.
    pub h_load: DVector<Complex64>,
    pub omega_d: f64,
}

impl EffectiveMatrix {
    /// `H̃ + H_L`.
    pub fn total(&self) -> DMatrix<Complex64> {
        let mut m = self.h_tilde.clone();
        for (n, h) in self.h_load.iter().enumerate() {
            m[(n, n)] += h;
        }
        m
    }

    pub fn h_load_matrix(&self) -> DMatrix<Complex64> {
        DMatrix::from_diagonal(&self.h_load)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    /// Rotating-frame mean amplitudes `⟨a_n⟩`.
    pub amplitudes: DVector<Complex64>,
    /// `||(H̃ + H_L) ã − iΩ|| / ||iΩ||` (absolute when undriven).
    pub residual: f64,
}

/// `H̃` without the load.
pub fn h_tilde(spec: &NetworkSpec) -> DMatrix<Complex64> {
    let n = spec.n_nodes();
    let wd = spec.drive.omega_d;
    DMatrix::from_fn(n, n, |r, c| {
        if r == c {
            Complex64::new(-0.5 * spec.intrinsic_decays[r], wd - spec.node_frequencies[r])
        } else {
            Complex64::new(0.0, -spec.couplings[(r, c)])
        }
    })
}

pub fn effective_matrix(spec: &NetworkSpec) -> Result<EffectiveMatrix> {
    spec.ensure_valid()?;
    let mut h_load = DVector::zeros(spec.n_nodes());
    h_load[spec.load.node] = spec.load.h_load();
    Ok(EffectiveMatrix { h_tilde: h_tilde(spec), h_load, omega_d: spec.drive.omega_d })
}

/// One-hot drive vector `Ω`.
pub fn drive_vector(spec: &NetworkSpec) -> DVector<Complex64> {
    let mut v = DVector::zeros(spec.n_nodes());
    v[spec.drive.node] = spec.drive.rabi;
    v
}

/// Factorizes `a`, rejecting it when the condition estimate exceeds [`MAX_CONDITION`].
pub(crate) fn factorize(a: &DMatrix<Complex64>) -> Result<ComplexLu> {
    let lu = ComplexLu::new(a);
    if lu.is_exactly_singular() {
        return Err(Error::SingularNetwork { condition: f64::INFINITY });
    }
    let condition = lu.condition_estimate();
    if !(condition <= MAX_CONDITION) {
        return Err(Error::SingularNetwork { condition });
    }
    Ok(lu)
}

/// Solves `a x = b` with one step of iterative refinement when the first
/// residual is above [`RESIDUAL_TOLERANCE`]. Returns `x` and its relative residual.
pub(crate) fn solve_refined(
    a: &DMatrix<Complex64>,
    lu: &ComplexLu,
    b: &DVector<Complex64>,
) -> Result<(DVector<Complex64>, f64)> {
    let singular = || Error::SingularNetwork { condition: f64::INFINITY };
    let scale = vec_norm(b);
    let mut x = lu.solve(b).ok_or_else(singular)?;
    let rel = |x: &DVector<Complex64>| {
        let r = vec_norm(&(a * x - b));
        if scale > 0.0 {
            r / scale
        } else {
            r
        }
    };
    let mut res = rel(&x);
    if res > RESIDUAL_TOLERANCE {
        let dx = lu.solve(&(b - a * &x)).ok_or_else(singular)?;
        x += dx;
        res = rel(&x);
    }
    Ok((x, res))
}

/// `ã = (H̃ + H_L)^{-1} iΩ`.
pub fn solve_amplitudes(spec: &NetworkSpec) -> Result<SteadyState> {
    let m = effective_matrix(spec)?.total();
    let rhs = drive_vector(spec) * I;
    let lu = factorize(&m)?;
    let (amplitudes, residual) = solve_refined(&m, &lu, &rhs)?;
    Ok(SteadyState { amplitudes, residual })
}

/// `S(ω) = −Im tr (ω − M)^{-1}` with the bare network matrix
/// `M_nm = ω_nm − i δ_nm γ_n / 2` (no drive shift, no load).
pub fn spectral_density(spec: &NetworkSpec, omega: f64) -> Result<f64> {
    spec.ensure_valid()?;
    let n = spec.n_nodes();
    let a = DMatrix::from_fn(n, n, |r, c| {
        if r == c {
            Complex64::new(omega - spec.node_frequencies[r], 0.5 * spec.intrinsic_decays[r])
        } else {
            Complex64::new(-spec.couplings[(r, c)], 0.0)
        }
    });
    let lu = factorize(&a)?;
    let mut trace = Complex64::new(0.0, 0.0);
    let mut e = DVector::zeros(n);
    for k in 0..n {
        e[k] = Complex64::new(1.0, 0.0);
        let col = lu.solve(&e).ok_or(Error::SingularNetwork { condition: f64::INFINITY })?;
        trace += col[k];
        e[k] = Complex64::new(0.0, 0.0);
    }
    Ok(-trace.im)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralPoint {
    pub omega: f64,
    /// `None` where the resolvent is singular.
    pub density: Option<f64>,
}

/// Spectral density on a uniform grid including both endpoints.
///
/// Points are evaluated in parallel and returned in grid order.
pub fn spectral_density_sweep(
    spec: &NetworkSpec,
    omega_min: f64,
    omega_max: f64,
    n_points: usize,
) -> Result<Vec<SpectralPoint>> {
    spec.ensure_valid()?;
    let grid = linear_grid(omega_min, omega_max, n_points)?;
    grid.par_iter()
        .map(|&omega| match spectral_density(spec, omega) {
            Ok(s) => Ok(SpectralPoint { omega, density: Some(s) }),
            Err(Error::SingularNetwork { .. }) => Ok(SpectralPoint { omega, density: None }),
            Err(e) => Err(e),
        })
        .collect()
}

fn eigenvalues(m: &DMatrix<Complex64>) -> Result<DVector<Complex64>> {
    m.clone()
        .eigenvalues()
        .ok_or_else(|| Error::InvalidArgument("eigenvalue computation did not converge".into()))
}

/// Largest step admitted by [`time_domain_steady_state`]: `0.1 / max |λ|`.
pub fn suggested_time_step(spec: &NetworkSpec) -> Result<f64> {
    let m = effective_matrix(spec)?.total();
    let rho = eigenvalues(&m)?.iter().map(|z| z.norm()).fold(0.0, f64::max);
    Ok(if rho > 0.0 { 0.1 / rho } else { f64::INFINITY })
}

/// Integrates `dã/dt = (H̃ + H_L) ã − iΩ` from `ã(0) = 0` with classical
/// RK4 until `||dã/dt|| ≤ 1e-10 ||Ω||`.
///
/// For a constant linear system one RK4 step is the affine map
/// `x ← x + h P(hM)(M x + b)` with `P(Z) = 1 + Z/2 + Z²/6 + Z³/24`; the map is
/// assembled once so each step costs a single matrix-vector product.
pub fn time_domain_steady_state(spec: &NetworkSpec, t_final: f64, dt: f64) -> Result<SteadyState> {
    let m = effective_matrix(spec)?.total();
    let n = m.nrows();
    if !(t_final > 0.0) || !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("need t_final > 0 and dt > 0 (got {t_final}, {dt})")));
    }
    let lambda = eigenvalues(&m)?;
    let abscissa = lambda.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    if !(abscissa < 0.0) {
        return Err(Error::InvalidArgument(format!(
            "system is not decaying: largest eigenvalue real part {abscissa:.3e}"
        )));
    }
    let rho = lambda.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if dt * rho > 0.1 * (1.0 + 1e-12) {
        return Err(Error::InvalidArgument(format!("dt {dt} exceeds 0.1 / max|eigenvalue| = {}", 0.1 / rho)));
    }

    let b = drive_vector(spec) * (-I);
    let drive_norm = vec_norm(&b);
    let tol = RESIDUAL_TOLERANCE * drive_norm;
    let mut x = DVector::<Complex64>::zeros(n);
    if drive_norm == 0.0 {
        return Ok(SteadyState { amplitudes: x, residual: 0.0 });
    }

    let z = &m * Complex64::new(dt, 0.0);
    let id = DMatrix::<Complex64>::identity(n, n);
    let z2 = &z * &z;
    let z3 = &z2 * &z;
    let poly = &id + &z * Complex64::new(0.5, 0.0) + &z2 * Complex64::new(1.0 / 6.0, 0.0) + &z3 * Complex64::new(1.0 / 24.0, 0.0);
    let step = poly * Complex64::new(dt, 0.0);
    let propagator = &id + &step * &m;
    let offset = &step * &b;

    const CHECK_EVERY: usize = 16;
    let max_steps = (t_final / dt).ceil() as usize;
    let mut next = DVector::<Complex64>::zeros(n);
    let mut residual = vec_norm(&(&m * &x + &b));
    let mut k = 0;
    while k < max_steps {
        let burst = CHECK_EVERY.min(max_steps - k);
        for _ in 0..burst {
            next.gemv(Complex64::new(1.0, 0.0), &propagator, &x, Complex64::new(0.0, 0.0));
            next += &offset;
            std::mem::swap(&mut x, &mut next);
        }
        k += burst;
        residual = vec_norm(&(&m * &x + &b));
        if residual <= tol {
            return Ok(SteadyState { amplitudes: x, residual: residual / drive_norm });
        }
    }
    Err(Error::ConvergenceFailure { residual: residual / drive_norm, t_final })
}

//! Single-node Thevenin reduction of the network as seen from the load node,
//! and the conjugate-matched load.
//!
//! With `x = H̃^{-1} e_N` and `y = H̃^{-1} Ω` (load excluded from `H̃`):
//!
//! ```text
//! H̃_th = 1 / x_N,    Ω_th = y_N / x_N,    ã_N = iΩ_th / (H̃_th + H_L).
//! ```

use nalgebra::DVector;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::network::{LoadSpec, NetworkSpec};
use crate::power::load_power;
use crate::steady_state::{drive_vector, factorize, h_tilde, solve_amplitudes, solve_refined};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Relative size below which a resolvent element or pivot counts as zero.
const ZERO_TOLERANCE: f64 = 1e-14;

/// Thevenin dissipation below `MATCH_TOLERANCE * |H̃_th|` is treated as lossless.
pub const MATCH_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheveninEquivalent {
    pub h_th: Complex64,
    pub omega_th: Complex64,
    pub delta_omega_th: f64,
    pub gamma_th: f64,
    pub load_node: usize,
}

impl TheveninEquivalent {
    pub fn new(h_th: Complex64, omega_th: Complex64, load_node: usize) -> Self {
        Self {
            h_th,
            omega_th,
            delta_omega_th: h_th.im,
            gamma_th: -2.0 * h_th.re,
            load_node,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchedLoad {
    pub delta_omega: f64,
    pub gamma_load: f64,
    /// Maximum load power `ω_d |Ω_th|² / Γ_th`; infinite when infeasible.
    pub p_max: f64,
    pub feasible: bool,
}

impl MatchedLoad {
    pub fn from_thevenin(th: &TheveninEquivalent, omega_d: f64) -> Self {
        let feasible = th.gamma_th > MATCH_TOLERANCE * th.h_th.norm();
        let p_max = if feasible {
            omega_d * th.omega_th.norm_sqr() / th.gamma_th
        } else {
            f64::INFINITY
        };
        Self { delta_omega: -th.delta_omega_th, gamma_load: th.gamma_th, p_max, feasible }
    }

    pub fn load_spec(&self, node: usize) -> LoadSpec {
        LoadSpec { node, delta_omega: self.delta_omega, gamma_load: self.gamma_load }
    }
}

/// Resolvent route: both Thevenin quantities from one factorization of `H̃`.
pub fn thevenin_equivalent(spec: &NetworkSpec) -> Result<TheveninEquivalent> {
    spec.ensure_valid()?;
    let node = spec.load.node;
    let h = h_tilde(spec);
    let lu = factorize(&h)?;
    let mut e = DVector::zeros(spec.n_nodes());
    e[node] = Complex64::new(1.0, 0.0);
    let (x, _) = solve_refined(&h, &lu, &e)?;
    let scale = x.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if !(x[node].norm() > ZERO_TOLERANCE * scale) {
        return Err(Error::DarkNode { node });
    }
    let (y, _) = solve_refined(&h, &lu, &drive_vector(spec))?;
    let inv = x[node].inv();
    Ok(TheveninEquivalent::new(inv, y[node] * inv, node))
}

/// `H̃_th = (e_N^T H̃^{-1} e_N)^{-1}`.
pub fn thevenin_energy(spec: &NetworkSpec) -> Result<Complex64> {
    thevenin_equivalent(spec).map(|t| t.h_th)
}

/// `Ω_th = (e_N^T H̃^{-1} Ω) / (e_N^T H̃^{-1} e_N)`.
pub fn thevenin_rabi(spec: &NetworkSpec) -> Result<Complex64> {
    thevenin_equivalent(spec).map(|t| t.omega_th)
}

/// Elimination route: Gaussian elimination of every non-load node, in index
/// order and without pivoting, from `H̃ ã = iΩ` until only the scalar
/// equation `iΩ_th = H̃_th ã_N` remains.
pub fn thevenin_by_elimination(spec: &NetworkSpec) -> Result<TheveninEquivalent> {
    spec.ensure_valid()?;
    let n = spec.n_nodes();
    let node = spec.load.node;
    let mut a = h_tilde(spec);
    let mut b = drive_vector(spec) * I;
    let scale = a.iter().map(|z| z.norm()).fold(0.0, f64::max);

    for k in (0..n).filter(|&k| k != node) {
        let pivot = a[(k, k)];
        if !(pivot.norm() > ZERO_TOLERANCE * scale) {
            return Err(Error::PivotBreakdown { node: k });
        }
        let inv = pivot.inv();
        for r in (k + 1..n).chain(std::iter::once(node).filter(|&r| r < k)) {
            let f = a[(r, k)] * inv;
            if f == Complex64::new(0.0, 0.0) {
                continue;
            }
            for c in 0..n {
                if c == k {
                    continue;
                }
                let v = a[(k, c)];
                a[(r, c)] -= f * v;
            }
            a[(r, k)] = Complex64::new(0.0, 0.0);
            let bk = b[k];
            b[r] -= f * bk;
        }
    }
    Ok(TheveninEquivalent::new(a[(node, node)], b[node] / I, node))
}

/// `ã_N = iΩ_th / (H̃_th + H_L)`.
pub fn load_amplitude_from_thevenin(th: &TheveninEquivalent, load: &LoadSpec) -> Result<Complex64> {
    let den = th.h_th + load.h_load();
    if den.norm() == 0.0 {
        return Err(Error::SingularNetwork { condition: f64::INFINITY });
    }
    Ok(I * th.omega_th / den)
}

/// Conjugate match `H_L = H̃_th^*`, with the maximum deliverable power.
pub fn matched_load(spec: &NetworkSpec) -> Result<MatchedLoad> {
    let th = thevenin_equivalent(spec)?;
    let m = MatchedLoad::from_thevenin(&th, spec.drive.omega_d);
    if !m.feasible {
        return Err(Error::UnphysicalMatch { gamma_th: th.gamma_th });
    }
    Ok(m)
}

/// Rectangular grid over load settings around a centre point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadGrid {
    pub delta_center: f64,
    pub delta_half_width: f64,
    pub gamma_center: f64,
    pub gamma_half_width: f64,
    pub points: usize,
}

impl LoadGrid {
    /// Grid centred on the matched load, spanning `±rel_width · Γ_th` on both axes.
    pub fn around(matched: &MatchedLoad, rel_width: f64, points: usize) -> Self {
        let w = rel_width * matched.gamma_load;
        Self {
            delta_center: matched.delta_omega,
            delta_half_width: w,
            gamma_center: matched.gamma_load,
            gamma_half_width: w,
            points,
        }
    }

    pub fn delta_step(&self) -> f64 {
        2.0 * self.delta_half_width / (self.points - 1) as f64
    }

    pub fn gamma_step(&self) -> f64 {
        2.0 * self.gamma_half_width / (self.points - 1) as f64
    }

    pub fn delta_at(&self, i: usize) -> f64 {
        self.delta_center - self.delta_half_width + self.delta_step() * i as f64
    }

    pub fn gamma_at(&self, j: usize) -> f64 {
        self.gamma_center - self.gamma_half_width + self.gamma_step() * j as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridMaximum {
    pub delta_omega: f64,
    pub gamma_load: f64,
    pub p_l: f64,
    pub delta_index: usize,
    pub gamma_index: usize,
}

/// Load power from a full-network solve at the given load setting.
pub fn full_solve_load_power(spec: &NetworkSpec, delta_omega: f64, gamma_load: f64) -> Result<f64> {
    let s = spec.with_load(LoadSpec { node: spec.load.node, delta_omega, gamma_load });
    let state = solve_amplitudes(&s)?;
    Ok(load_power(&s, &state))
}

/// Brute-force maximum of the full-solve load power over `grid`.
///
/// Rows (fixed δω) are evaluated in parallel; ties resolve to the lowest
/// (row, column) index so the reduction is deterministic.
pub fn grid_search_load_power(spec: &NetworkSpec, grid: &LoadGrid) -> Result<GridMaximum> {
    if grid.points < 2 {
        return Err(Error::InvalidArgument("grid needs at least 2 points per axis".into()));
    }
    if grid.gamma_at(0) < 0.0 {
        return Err(Error::InvalidArgument("grid reaches negative load decay rates".into()));
    }
    let rows: Vec<Result<GridMaximum>> = (0..grid.points)
        .into_par_iter()
        .map(|i| {
            let delta = grid.delta_at(i);
            let mut best: Option<GridMaximum> = None;
            for j in 0..grid.points {
                let gamma = grid.gamma_at(j);
                let p = full_solve_load_power(spec, delta, gamma)?;
                if best.is_none_or(|b| p > b.p_l) {
                    best = Some(GridMaximum { delta_omega: delta, gamma_load: gamma, p_l: p, delta_index: i, gamma_index: j });
                }
            }
            Ok(best.expect("non-empty row"))
        })
        .collect();
    let mut best: Option<GridMaximum> = None;
    for r in rows {
        let r = r?;
        if best.is_none_or(|b| r.p_l > b.p_l) {
            best = Some(r);
        }
    }
    Ok(best.expect("non-empty grid"))
}

/// Refines a grid maximum by bisection on the sign of the (central
/// difference) derivative, one axis at a time, each within one grid cell
/// of the current point. Returns the refined point.
pub fn refine_maximum(spec: &NetworkSpec, grid: &LoadGrid, start: &GridMaximum) -> Result<GridMaximum> {
    let mut delta = start.delta_omega;
    let mut gamma = start.gamma_load;
    for _ in 0..3 {
        let g = gamma;
        delta = bisect_axis(|d| full_solve_load_power(spec, d, g), delta, grid.delta_step())?;
        let d = delta;
        gamma = bisect_axis(|x| full_solve_load_power(spec, d, x), gamma, grid.gamma_step())?;
    }
    Ok(GridMaximum {
        delta_omega: delta,
        gamma_load: gamma,
        p_l: full_solve_load_power(spec, delta, gamma)?,
        ..*start
    })
}

fn bisect_axis<F>(f: F, x0: f64, step: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let h = 1e-4 * step;
    let slope = |x: f64| -> Result<f64> { Ok(f(x + h)? - f(x - h)?) };
    let (mut lo, mut hi) = (x0 - step, x0 + step);
    if slope(lo)? <= 0.0 || slope(hi)? >= 0.0 {
        // No interior maximum bracketed: keep the best of the three points.
        let cands = [lo, x0, hi];
        let mut best = x0;
        let mut best_p = f(x0)?;
        for &c in &cands {
            let p = f(c)?;
            if p > best_p {
                best = c;
                best_p = p;
            }
        }
        return Ok(best);
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if slope(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * step {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{build_chain, DriveSpec};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol * b.norm().max(1e-300)
    }

    fn two_node(j: f64, g1: f64, g2: f64, omega_d: f64, rabi: Complex64) -> NetworkSpec {
        let drive = DriveSpec { node: 0, omega_d, rabi };
        let load = LoadSpec { node: 1, delta_omega: 0.0, gamma_load: 1.0 };
        let mut s = build_chain(2, 1000.0, j, 0.0, drive, load).unwrap();
        s.intrinsic_decays = vec![g1, g2];
        s
    }

    #[test]
    fn single_node_reduction_is_identity() {
        let drive = DriveSpec { node: 0, omega_d: 1001.5, rabi: c(0.4, 0.1) };
        let load = LoadSpec { node: 0, delta_omega: 0.3, gamma_load: 2.0 };
        let spec = build_chain(1, 1000.0, 0.0, 0.7, drive, load).unwrap();
        let th = thevenin_equivalent(&spec).unwrap();
        assert!(close(th.h_th, c(-0.35, 1.5), 1e-15));
        assert!(close(th.omega_th, drive.rabi, 1e-15));
        let a = load_amplitude_from_thevenin(&th, &load).unwrap();
        assert!(close(a, solve_amplitudes(&spec).unwrap().amplitudes[0], 1e-15));
    }

    #[test]
    fn two_node_closed_forms() {
        let (j, g1, g2) = (2.5, 0.9, 0.3);
        let rabi = c(0.7, -0.2);
        let spec = two_node(j, g1, g2, 1001.2, rabi);
        let h = h_tilde(&spec);
        let h_th = h[(1, 1)] + j * j / h[(0, 0)];
        let om_th = I * j * rabi / h[(0, 0)];
        let th = thevenin_equivalent(&spec).unwrap();
        assert!(close(th.h_th, h_th, 1e-14));
        assert!(close(th.omega_th, om_th, 1e-14));
        let el = thevenin_by_elimination(&spec).unwrap();
        assert!(close(el.h_th, h_th, 1e-14));
        assert!(close(el.omega_th, om_th, 1e-14));
    }

    #[test]
    fn resonant_two_node_lossless_load_node() {
        let (j, g1) = (2.5, 1.0);
        let spec = two_node(j, g1, 0.0, 1000.0, c(1.0, 0.0));
        let th = thevenin_equivalent(&spec).unwrap();
        assert!(close(th.h_th, c(-2.0 * j * j / g1, 0.0), 1e-14));
        assert!(th.delta_omega_th.abs() < 1e-14);
        assert!((th.gamma_th - 4.0 * j * j / g1).abs() < 1e-12);
        assert!(close(th.omega_th, c(0.0, -2.0 * j / g1), 1e-14));
        let m = matched_load(&spec).unwrap();
        assert!(m.delta_omega.abs() < 1e-14);
        assert!((m.gamma_load - 4.0 * j * j / g1).abs() < 1e-12);
        assert!((m.p_max - 1000.0 / g1).abs() < 1e-10 * 1000.0);
    }

    #[test]
    fn decomposition_is_consistent() {
        let th = TheveninEquivalent::new(c(-1.25, 0.75), c(1.0, 0.0), 3);
        assert_eq!(c(-th.gamma_th / 2.0, th.delta_omega_th), th.h_th);
    }

    #[test]
    fn decoupled_network_has_no_thevenin_drive() {
        let drive = DriveSpec { node: 0, omega_d: 1000.5, rabi: c(1.0, 0.0) };
        let load = LoadSpec { node: 2, delta_omega: 0.0, gamma_load: 1.0 };
        let spec = build_chain(3, 1000.0, 0.0, 1.0, drive, load).unwrap();
        let el = thevenin_by_elimination(&spec).unwrap();
        assert_eq!(el.omega_th, c(0.0, 0.0));
        assert_eq!(thevenin_rabi(&spec).unwrap(), c(0.0, 0.0));
    }

    #[test]
    fn dark_node_and_pivot_breakdown() {
        // Lossless resonant pair: H̃ = [[0, -iJ], [-iJ, 0]], so (H̃^{-1})_22 = 0
        // and the first elimination pivot is zero.
        let spec = two_node(2.5, 0.0, 0.0, 1000.0, c(1.0, 0.0));
        assert!(matches!(thevenin_energy(&spec), Err(Error::DarkNode { node: 1 })));
        assert!(matches!(thevenin_by_elimination(&spec), Err(Error::PivotBreakdown { node: 0 })));
    }

    #[test]
    fn lossless_detuned_network_has_no_passive_match() {
        let spec = two_node(2.5, 0.0, 0.0, 1001.0, c(1.0, 0.0));
        match matched_load(&spec) {
            Err(Error::UnphysicalMatch { gamma_th }) => assert!(gamma_th.abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
        let th = thevenin_equivalent(&spec).unwrap();
        assert!(!MatchedLoad::from_thevenin(&th, 1001.0).feasible);
    }

    #[test]
    fn matching_does_not_depend_on_drive_strength() {
        let a = matched_load(&two_node(1.3, 0.9, 0.2, 1000.4, c(1.0, 0.0))).unwrap();
        let b = matched_load(&two_node(1.3, 0.9, 0.2, 1000.4, c(-3.0, 2.0))).unwrap();
        assert_eq!(a.delta_omega, b.delta_omega);
        assert_eq!(a.gamma_load, b.gamma_load);
        assert!((b.p_max / a.p_max - 13.0).abs() < 1e-12);
    }

    #[test]
    fn grid_search_finds_the_match_on_a_small_network() {
        let spec = two_node(1.3, 0.9, 0.2, 1000.4, c(1.0, 0.0));
        let m = matched_load(&spec).unwrap();
        let grid = LoadGrid::around(&m, 0.2, 40);
        let best = grid_search_load_power(&spec, &grid).unwrap();
        assert!((best.delta_omega - m.delta_omega).abs() <= grid.delta_step());
        assert!((best.gamma_load - m.gamma_load).abs() <= grid.gamma_step());
        assert!(best.p_l <= m.p_max * (1.0 + 1e-12));
        let refined = refine_maximum(&spec, &grid, &best).unwrap();
        assert!((refined.p_l - m.p_max).abs() <= 1e-10 * m.p_max);
    }
}

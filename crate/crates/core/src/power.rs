//! Input, radiated and load power, and transfer efficiency.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::network::{LoadSpec, NetworkSpec};
use crate::steady_state::{h_tilde, SteadyState};
use crate::thevenin::TheveninEquivalent;

/// Guards the balance-residual denominator when nothing is driven.
const BALANCE_EPS: f64 = 1e-300;

/// Tolerance on the Hermiticity and reality checks of moment inputs.
const MOMENT_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerReport {
    pub p_in: f64,
    pub p_r: f64,
    pub p_l: f64,
    /// `None` when both output powers vanish.
    pub eta: Option<f64>,
    pub balance_residual: f64,
}

/// `P_in = −2 ω_d Im(Ω^* ã_d)` at the drive node.
///
/// With the steady state normalised as `(H̃ + H_L) ã = iΩ` this is the
/// rotating-frame value of `iω_d(Ω ⟨a⟩ e^{iω_d t} − c.c.)`, positive under drive.
pub fn input_power(spec: &NetworkSpec, state: &SteadyState) -> f64 {
    let a = state.amplitudes[spec.drive.node];
    -2.0 * spec.drive.omega_d * (spec.drive.rabi.conj() * a).im
}

/// `P_R = ω_d Σ γ_n |ã_n|²`.
pub fn radiated_power(spec: &NetworkSpec, state: &SteadyState) -> f64 {
    spec.drive.omega_d
        * spec
            .intrinsic_decays
            .iter()
            .zip(state.amplitudes.iter())
            .map(|(g, a)| g * a.norm_sqr())
            .sum::<f64>()
}

/// `P_L = ω_d Σ Γ_n |ã_n|²`; only the load node contributes.
pub fn load_power(spec: &NetworkSpec, state: &SteadyState) -> f64 {
    spec.drive.omega_d * spec.load.gamma_load * state.amplitudes[spec.load.node].norm_sqr()
}

/// `P_L = ω_d Γ_N |Ω_th|² / |H̃_th + H_L|²`.
pub fn load_power_thevenin(th: &TheveninEquivalent, load: &LoadSpec, omega_d: f64) -> Result<f64> {
    if load.gamma_load == 0.0 {
        return Ok(0.0);
    }
    let den = (th.h_th + load.h_load()).norm_sqr();
    if den == 0.0 {
        return Err(Error::SingularNetwork { condition: f64::INFINITY });
    }
    Ok(omega_d * load.gamma_load * th.omega_th.norm_sqr() / den)
}

/// `η = P_L / (P_L + P_R)`.
pub fn efficiency(p_l: f64, p_r: f64) -> Result<f64> {
    let total = p_l + p_r;
    if !(total > 0.0) {
        return Err(Error::UndefinedEfficiency);
    }
    Ok(p_l / total)
}

pub fn power_report(spec: &NetworkSpec, state: &SteadyState) -> PowerReport {
    let p_in = input_power(spec, state);
    let p_r = radiated_power(spec, state);
    let p_l = load_power(spec, state);
    PowerReport {
        p_in,
        p_r,
        p_l,
        eta: efficiency(p_l, p_r).ok(),
        balance_residual: (p_in - p_r - p_l).abs() / p_in.max(BALANCE_EPS),
    }
}

/// Radiated and load power from general first and second moments:
///
/// ```text
/// P_R = ½ Σ_nm (γ_n + γ_m) [ω_nm ⟨a_n† a_m⟩ + Δ_nm ⟨a_n†⟩⟨a_m⟩],   Δ_nm = δ_nm ω_d − ω_nm
/// ```
///
/// and likewise for `P_L` with the load rates. `second_moments[(n, m)]` is
/// `⟨a_n† a_m⟩`.
pub fn general_power_from_correlators(
    spec: &NetworkSpec,
    first_moments: &DVector<Complex64>,
    second_moments: &DMatrix<Complex64>,
) -> Result<(f64, f64)> {
    let n = spec.n_nodes();
    if first_moments.len() != n || second_moments.shape() != (n, n) {
        return Err(Error::InvalidMoments(format!("moment dimensions do not match {n} nodes")));
    }
    let scale = second_moments.iter().map(|z| z.norm()).fold(0.0, f64::max);
    for r in 0..n {
        for c in r..n {
            let d = (second_moments[(r, c)] - second_moments[(c, r)].conj()).norm();
            if d > MOMENT_TOLERANCE * scale.max(f64::MIN_POSITIVE) {
                return Err(Error::InvalidMoments(format!("second moments not Hermitian at ({r}, {c})")));
            }
        }
    }
    if n > 0 && scale > 0.0 {
        let min_eig = second_moments.clone().symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
        if min_eig < -MOMENT_TOLERANCE * scale {
            return Err(Error::InvalidMoments(format!("second moments not positive semidefinite (eigenvalue {min_eig:.3e})")));
        }
    }

    let w = spec.frequency_matrix();
    let wd = spec.drive.omega_d;
    let gamma = &spec.intrinsic_decays;
    let big_gamma = spec.load_decays();
    let mut p_r = Complex64::new(0.0, 0.0);
    let mut p_l = Complex64::new(0.0, 0.0);
    let mut mag_r = 0.0;
    let mut mag_l = 0.0;
    for r in 0..n {
        for c in 0..n {
            let delta = if r == c { wd } else { 0.0 } - w[(r, c)];
            let bracket = second_moments[(r, c)] * w[(r, c)] + first_moments[r].conj() * first_moments[c] * delta;
            let tr = 0.5 * (gamma[r] + gamma[c]) * bracket;
            let tl = 0.5 * (big_gamma[r] + big_gamma[c]) * bracket;
            p_r += tr;
            p_l += tl;
            mag_r += tr.norm();
            mag_l += tl.norm();
        }
    }
    for (label, p, mag) in [("P_R", p_r, mag_r), ("P_L", p_l, mag_l)] {
        if p.im.abs() > MOMENT_TOLERANCE * mag {
            return Err(Error::InvalidMoments(format!("{label} has imaginary part {:.3e}", p.im)));
        }
    }
    Ok((p_r.re, p_l.re))
}

/// Two-node efficiency `Γ_2 / (F γ_1 + γ_2 + Γ_2)` with
/// `F = |H̃_22 + H_L|² / |H̃_12|²`, evaluated at the configured load.
///
/// Requires the drive on node 0 and the load on node 1.
pub fn matched_efficiency_two_node(spec: &NetworkSpec) -> Result<f64> {
    spec.ensure_valid()?;
    if spec.n_nodes() != 2 {
        return Err(Error::UnsupportedTopology(format!("two-node formula applied to {} nodes", spec.n_nodes())));
    }
    if spec.drive.node != 0 || spec.load.node != 1 {
        return Err(Error::UnsupportedTopology("two-node formula needs drive on node 0 and load on node 1".into()));
    }
    let h = h_tilde(spec);
    let load_gamma = spec.load.gamma_load;
    let (g1, g2) = (spec.intrinsic_decays[0], spec.intrinsic_decays[1]);
    let hop = h[(0, 1)].norm_sqr();
    if hop == 0.0 {
        // Nothing reaches the load node.
        return if g1 > 0.0 || g2 + load_gamma > 0.0 { Ok(0.0) } else { Err(Error::UndefinedEfficiency) };
    }
    let f = (h[(1, 1)] + spec.load.h_load()).norm_sqr() / hop;
    efficiency(load_gamma, f * g1 + g2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{build_chain, DriveSpec};
    use crate::steady_state::solve_amplitudes;
    use crate::thevenin::{matched_load, thevenin_equivalent};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn one_node(gamma: f64, rabi: Complex64) -> NetworkSpec {
        let drive = DriveSpec { node: 0, omega_d: 1000.0, rabi };
        let load = LoadSpec { node: 0, delta_omega: 0.0, gamma_load: 0.0 };
        build_chain(1, 1000.0, 0.0, gamma, drive, load).unwrap()
    }

    fn two_node(j: f64, g1: f64, g2: f64, omega_d: f64, load: LoadSpec) -> NetworkSpec {
        let drive = DriveSpec { node: 0, omega_d, rabi: c(1.0, 0.0) };
        let mut s = build_chain(2, 1000.0, j, 0.0, drive, load).unwrap();
        s.intrinsic_decays = vec![g1, g2];
        s
    }

    #[test]
    fn undriven_powers_vanish() {
        let spec = one_node(1.0, c(0.0, 0.0));
        let st = solve_amplitudes(&spec).unwrap();
        let r = power_report(&spec, &st);
        assert_eq!((r.p_in, r.p_r, r.p_l), (0.0, 0.0, 0.0));
        assert_eq!(r.eta, None);
        assert_eq!(r.balance_residual, 0.0);
    }

    #[test]
    fn one_node_power_sign_convention() {
        let (gamma, rabi) = (0.5, 0.2);
        let spec = one_node(gamma, c(rabi, 0.0));
        let st = solve_amplitudes(&spec).unwrap();
        let expected = 4.0 * 1000.0 * rabi * rabi / gamma;
        assert!((input_power(&spec, &st) - expected).abs() < 1e-12 * expected);
        assert!((radiated_power(&spec, &st) - expected).abs() < 1e-12 * expected);
        // Complex drive: the balance holds with |Ω|².
        let spec = one_node(gamma, c(0.12, -0.16));
        let st = solve_amplitudes(&spec).unwrap();
        assert!((input_power(&spec, &st) - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn lossless_and_unloaded_cases() {
        let spec = one_node(0.0, c(1.0, 0.0));
        let st = SteadyState { amplitudes: DVector::from_element(1, c(3.0, 1.0)), residual: 0.0 };
        assert_eq!(radiated_power(&spec, &st), 0.0);
        assert_eq!(load_power(&spec, &st), 0.0);
        let th = TheveninEquivalent::new(c(-1.0, 0.5), c(1.0, 0.0), 0);
        assert_eq!(load_power_thevenin(&th, &LoadSpec { node: 0, delta_omega: 0.2, gamma_load: 0.0 }, 1000.0).unwrap(), 0.0);
    }

    #[test]
    fn matched_resonant_pair_splits_power_evenly() {
        let (j, g1) = (2.5, 1.0);
        let base = two_node(j, g1, 0.0, 1000.0, LoadSpec { node: 1, delta_omega: 0.0, gamma_load: 1.0 });
        let m = matched_load(&base).unwrap();
        let spec = base.with_load(m.load_spec(1));
        let st = solve_amplitudes(&spec).unwrap();
        let r = power_report(&spec, &st);
        let expected = 1000.0 / g1;
        assert!((r.p_l - expected).abs() < 1e-10 * expected);
        assert!((r.p_r - expected).abs() < 1e-10 * expected);
        assert!((r.eta.unwrap() - 0.5).abs() < 1e-12);
        assert!((matched_efficiency_two_node(&spec).unwrap() - 0.5).abs() < 1e-12);
        let th = thevenin_equivalent(&spec).unwrap();
        let p_th = load_power_thevenin(&th, &spec.load, 1000.0).unwrap();
        assert!((p_th - m.p_max).abs() < 1e-12 * m.p_max);
    }

    #[test]
    fn efficiency_edge_cases() {
        assert_eq!(efficiency(2.0, 0.0).unwrap(), 1.0);
        assert_eq!(efficiency(0.0, 3.0).unwrap(), 0.0);
        assert!(matches!(efficiency(0.0, 0.0), Err(Error::UndefinedEfficiency)));
    }

    #[test]
    fn strong_coupling_limit_of_two_node_efficiency() {
        let load = LoadSpec { node: 1, delta_omega: 0.0, gamma_load: 2.0 };
        let (g2, gl) = (0.5, 2.0);
        let limit = gl / (g2 + gl);
        let mut prev = f64::INFINITY;
        for &j in &[10.0, 100.0, 1000.0, 10000.0] {
            let spec = two_node(j, 1.0, g2, 1000.0, load);
            let eta = matched_efficiency_two_node(&spec).unwrap();
            let gap = (eta - limit).abs();
            assert!(gap < prev);
            prev = gap;
        }
        assert!(prev < 1e-6);
    }

    #[test]
    fn two_node_formula_rejects_other_topologies() {
        let drive = DriveSpec { node: 0, omega_d: 1000.0, rabi: c(1.0, 0.0) };
        let load = LoadSpec { node: 2, delta_omega: 0.0, gamma_load: 1.0 };
        let three = build_chain(3, 1000.0, 1.0, 1.0, drive, load).unwrap();
        assert!(matches!(matched_efficiency_two_node(&three), Err(Error::UnsupportedTopology(_))));
        let swapped = two_node(1.0, 1.0, 1.0, 1000.0, LoadSpec { node: 0, delta_omega: 0.0, gamma_load: 1.0 });
        assert!(matches!(matched_efficiency_two_node(&swapped), Err(Error::UnsupportedTopology(_))));
    }

    #[test]
    fn factorized_moments_reduce_to_closed_forms() {
        let load = LoadSpec { node: 1, delta_omega: 0.4, gamma_load: 1.7 };
        let spec = two_node(1.9, 0.8, 0.3, 1001.1, load);
        let st = solve_amplitudes(&spec).unwrap();
        let a = &st.amplitudes;
        let second = DMatrix::from_fn(2, 2, |r, c| a[r].conj() * a[c]);
        let (p_r, p_l) = general_power_from_correlators(&spec, a, &second).unwrap();
        let (cr, cl) = (radiated_power(&spec, &st), load_power(&spec, &st));
        assert!((p_r - cr).abs() < 1e-12 * cr);
        assert!((p_l - cl).abs() < 1e-12 * cl);
    }

    #[test]
    fn zero_and_invalid_moments() {
        let load = LoadSpec { node: 1, delta_omega: 0.0, gamma_load: 1.0 };
        let spec = two_node(1.0, 1.0, 1.0, 1000.0, load);
        let zero_v = DVector::zeros(2);
        let zero_m = DMatrix::zeros(2, 2);
        assert_eq!(general_power_from_correlators(&spec, &zero_v, &zero_m).unwrap(), (0.0, 0.0));
        let bad = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.5, 0.5), c(0.5, 0.5), c(1.0, 0.0)]);
        assert!(matches!(general_power_from_correlators(&spec, &zero_v, &bad), Err(Error::InvalidMoments(_))));
        let indefinite = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(2.0, 0.0), c(2.0, 0.0), c(1.0, 0.0)]);
        assert!(matches!(general_power_from_correlators(&spec, &zero_v, &indefinite), Err(Error::InvalidMoments(_))));
    }
}

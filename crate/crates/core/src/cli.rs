//! `qnet` command-line interface.
//!
//! Exit codes: 0 success, 1 other failure, 2 input error, 3 singular or dark
//! network, 4 infeasible match, 5 Fock-space capacity exceeded.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::NetworkConfig;
use crate::error::{Error, Result};
use crate::grid::{linear_grid, log_grid};
use crate::lindblad::compare_with_linear_solve;
use crate::network::{build_chain, build_random_all_to_all, DriveSpec, LoadSpec, NetworkSpec, Violation};
use crate::power::{efficiency, load_power, power_report, radiated_power, PowerReport};
use crate::steady_state::{solve_amplitudes, spectral_density_sweep};
use crate::thevenin::{
    grid_search_load_power, refine_maximum, thevenin_by_elimination, thevenin_equivalent, LoadGrid, MatchedLoad,
    TheveninEquivalent,
};

#[derive(Debug, Parser)]
#[command(name = "qnet", version, about = "Steady states, Thevenin equivalents and conjugate matching of driven bosonic networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Steady-state amplitudes and power report.
    Solve(ConfigArgs),
    /// Thevenin equivalent at the load node, by resolvent and by elimination.
    Thevenin(ConfigArgs),
    /// Conjugate-matched load and maximum load power.
    Match(MatchArgs),
    /// Spectral density or load-power sweep as CSV.
    Sweep(SweepArgs),
    /// Write a generated network config.
    Gen(GenArgs),
    /// Compare the density-matrix oracle with the linear solve.
    Oracle(OracleArgs),
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MatchArgs {
    #[command(flatten)]
    pub io: ConfigArgs,
    /// Verify the prediction by a brute-force grid search over load settings.
    #[arg(long)]
    pub grid_check: bool,
    /// Grid points per axis for --grid-check.
    #[arg(long, default_value_t = 200)]
    pub points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepVar {
    #[value(name = "omega")]
    Omega,
    #[value(name = "gamma_load")]
    GammaLoad,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub io: ConfigArgs,
    #[arg(long, value_enum)]
    pub var: SweepVar,
    #[arg(long, allow_negative_numbers = true)]
    pub min: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub max: f64,
    #[arg(long)]
    pub points: usize,
    /// Logarithmically spaced grid (requires min > 0).
    #[arg(long)]
    pub log: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GenKind {
    Chain,
    Random,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(value_enum)]
    pub kind: GenKind,
    #[arg(long, default_value_t = 50)]
    pub nodes: usize,
    #[arg(long, default_value_t = 1000.0)]
    pub omega0: f64,
    /// Chain hopping, or mean hopping of the random network.
    #[arg(long, default_value_t = 2.5, allow_negative_numbers = true)]
    pub j: f64,
    /// Standard deviation of the random hopping.
    #[arg(long, default_value_t = 1.0)]
    pub j_std: f64,
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Drive frequency; defaults to omega0 + j.
    #[arg(long)]
    pub omega_d: Option<f64>,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub rabi_re: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub rabi_im: f64,
    #[arg(long, default_value_t = 0)]
    pub drive_node: usize,
    /// Load node; defaults to the last node.
    #[arg(long)]
    pub load_node: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    pub gamma_load: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub delta_omega: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub io: ConfigArgs,
    #[arg(long, default_value_t = 5)]
    pub n_max: usize,
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Validation(_) | Error::InvalidArgument(_) => 2,
        Error::SingularNetwork { .. } | Error::DarkNode { .. } | Error::PivotBreakdown { .. } => 3,
        Error::UnphysicalMatch { .. } => 4,
        Error::CapacityError { .. } => 5,
        _ => 1,
    }
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("qnet: {e}");
            exit_code(&e)
        }
    }
}

pub fn execute(cmd: &Command) -> Result<()> {
    match cmd {
        Command::Solve(a) => emit(a.out.as_deref(), &cmd_solve(&load_spec(&a.config)?)?),
        Command::Thevenin(a) => emit(a.out.as_deref(), &cmd_thevenin(&load_spec(&a.config)?)?),
        Command::Match(a) => {
            let spec = load_spec(&a.io.config)?;
            emit(a.io.out.as_deref(), &cmd_match(&spec, a.grid_check.then_some(a.points))?)
        }
        Command::Sweep(a) => {
            let spec = load_spec(&a.io.config)?;
            let text = with_thread_cap(|| cmd_sweep(&spec, a.var, a.min, a.max, a.points, a.log))??;
            emit(a.io.out.as_deref(), &text)
        }
        Command::Gen(a) => emit(a.out.as_deref(), &cmd_gen(a)?),
        Command::Oracle(a) => emit(a.io.out.as_deref(), &cmd_oracle(&load_spec(&a.io.config)?, a.n_max)?),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text)
            .map_err(|e| Error::InvalidArgument(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_spec(path: &Path) -> Result<NetworkSpec> {
    let spec = NetworkConfig::load(path)?.to_spec()?;
    for w in spec.validate().iter().filter(|v| !v.is_error()) {
        eprintln!("qnet: {w}");
    }
    Ok(spec)
}

/// Runs `f` on a pool capped by `QNET_THREADS` when it is set.
fn with_thread_cap<R: Send>(f: impl FnOnce() -> R + Send) -> Result<R> {
    match std::env::var("QNET_THREADS") {
        Ok(v) => {
            let n: usize = v
                .trim()
                .parse()
                .ok()
                .filter(|&n| n > 0)
                .ok_or_else(|| Error::InvalidArgument(format!("QNET_THREADS must be a positive integer (got {v:?})")))?;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
        Err(_) => Ok(f()),
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

#[derive(Serialize)]
struct Amplitude {
    node: usize,
    re: f64,
    im: f64,
}

#[derive(Serialize)]
struct SolveReport {
    #[serde(flatten)]
    power: PowerReport,
    solver_residual: f64,
    amplitudes: Vec<Amplitude>,
}

pub fn cmd_solve(spec: &NetworkSpec) -> Result<String> {
    let state = solve_amplitudes(spec)?;
    let report = SolveReport {
        power: power_report(spec, &state),
        solver_residual: state.residual,
        amplitudes: state
            .amplitudes
            .iter()
            .enumerate()
            .map(|(node, a)| Amplitude { node, re: a.re, im: a.im })
            .collect(),
    };
    Ok(to_json(&report))
}

#[derive(Serialize)]
struct TheveninJson {
    load_node: usize,
    h_th_re: f64,
    h_th_im: f64,
    omega_th_re: f64,
    omega_th_im: f64,
    delta_omega_th: f64,
    gamma_th: f64,
}

impl From<&TheveninEquivalent> for TheveninJson {
    fn from(t: &TheveninEquivalent) -> Self {
        Self {
            load_node: t.load_node,
            h_th_re: t.h_th.re,
            h_th_im: t.h_th.im,
            omega_th_re: t.omega_th.re,
            omega_th_im: t.omega_th.im,
            delta_omega_th: t.delta_omega_th,
            gamma_th: t.gamma_th,
        }
    }
}

#[derive(Serialize)]
struct TheveninReport {
    #[serde(flatten)]
    resolvent: TheveninJson,
    elimination: Option<TheveninJson>,
    elimination_error: Option<String>,
    relative_discrepancy: Option<f64>,
}

fn rel_diff(a: Complex64, b: Complex64) -> f64 {
    let scale = a.norm().max(b.norm());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).norm() / scale
    }
}

pub fn cmd_thevenin(spec: &NetworkSpec) -> Result<String> {
    let th = thevenin_equivalent(spec)?;
    let report = match thevenin_by_elimination(spec) {
        Ok(el) => TheveninReport {
            resolvent: (&th).into(),
            relative_discrepancy: Some(rel_diff(th.h_th, el.h_th).max(rel_diff(th.omega_th, el.omega_th))),
            elimination: Some((&el).into()),
            elimination_error: None,
        },
        Err(e) => TheveninReport {
            resolvent: (&th).into(),
            elimination: None,
            elimination_error: Some(e.to_string()),
            relative_discrepancy: None,
        },
    };
    Ok(to_json(&report))
}

#[derive(Serialize)]
struct GridCheck {
    points: usize,
    argmax_delta_omega: f64,
    argmax_gamma_load: f64,
    /// Offset of the argmax from the prediction in grid cells, per axis.
    delta_cells: f64,
    gamma_cells: f64,
    within_one_cell: bool,
    grid_p_max: f64,
    grid_rel_discrepancy: f64,
    refined_delta_omega: f64,
    refined_gamma_load: f64,
    refined_p_max: f64,
    refined_rel_discrepancy: f64,
}

#[derive(Serialize)]
struct MatchReport {
    delta_omega: f64,
    gamma_load: f64,
    p_max: f64,
    feasible: bool,
    delta_omega_th: f64,
    gamma_th: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    grid_check: Option<GridCheck>,
}

/// Relative width of the `--grid-check` window around the prediction.
const GRID_CHECK_WIDTH: f64 = 0.1;

pub fn cmd_match(spec: &NetworkSpec, grid_points: Option<usize>) -> Result<String> {
    let th = thevenin_equivalent(spec)?;
    let m = MatchedLoad::from_thevenin(&th, spec.drive.omega_d);
    if !m.feasible {
        return Err(Error::UnphysicalMatch { gamma_th: th.gamma_th });
    }
    let grid_check = match grid_points {
        Some(points) => {
            let grid = LoadGrid::around(&m, GRID_CHECK_WIDTH, points);
            let best = grid_search_load_power(spec, &grid)?;
            let refined = refine_maximum(spec, &grid, &best)?;
            let delta_cells = (best.delta_omega - m.delta_omega).abs() / grid.delta_step();
            let gamma_cells = (best.gamma_load - m.gamma_load).abs() / grid.gamma_step();
            Some(GridCheck {
                points,
                argmax_delta_omega: best.delta_omega,
                argmax_gamma_load: best.gamma_load,
                delta_cells,
                gamma_cells,
                within_one_cell: delta_cells <= 1.0 && gamma_cells <= 1.0,
                grid_p_max: best.p_l,
                grid_rel_discrepancy: (best.p_l - m.p_max).abs() / m.p_max,
                refined_delta_omega: refined.delta_omega,
                refined_gamma_load: refined.gamma_load,
                refined_p_max: refined.p_l,
                refined_rel_discrepancy: (refined.p_l - m.p_max).abs() / m.p_max,
            })
        }
        None => None,
    };
    Ok(to_json(&MatchReport {
        delta_omega: m.delta_omega,
        gamma_load: m.gamma_load,
        p_max: m.p_max,
        feasible: m.feasible,
        delta_omega_th: th.delta_omega_th,
        gamma_th: th.gamma_th,
        grid_check,
    }))
}

fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else {
        format!("{x:.16e}")
    }
}

/// CSV sweep. `omega` gives the spectral density; `gamma_load` gives load
/// power and efficiency over the load decay rate with the load shift held at
/// its matched value `−δω_th`.
pub fn cmd_sweep(spec: &NetworkSpec, var: SweepVar, min: f64, max: f64, points: usize, log: bool) -> Result<String> {
    let grid = if log { log_grid(min, max, points)? } else { linear_grid(min, max, points)? };
    let mut out = String::new();
    match var {
        SweepVar::Omega => {
            let rows = if log {
                grid.par_iter()
                    .map(|&w| crate::steady_state::spectral_density(spec, w).map(Some).or_else(|e| match e {
                        Error::SingularNetwork { .. } => Ok(None),
                        e => Err(e),
                    }))
                    .collect::<Result<Vec<_>>>()?
                    .into_iter()
                    .zip(&grid)
                    .map(|(s, &omega)| (omega, s))
                    .collect::<Vec<_>>()
            } else {
                spectral_density_sweep(spec, min, max, points)?
                    .into_iter()
                    .map(|p| (p.omega, p.density))
                    .collect()
            };
            out.push_str("omega,S\n");
            for (omega, s) in rows {
                let _ = writeln!(out, "{},{}", fmt_f64(omega), fmt_f64(s.unwrap_or(f64::NAN)));
            }
        }
        SweepVar::GammaLoad => {
            if grid[0] < 0.0 {
                return Err(Error::InvalidArgument("gamma_load sweep needs min >= 0".into()));
            }
            let th = thevenin_equivalent(spec)?;
            let delta = -th.delta_omega_th;
            let rows: Vec<(f64, f64)> = grid
                .par_iter()
                .map(|&g| {
                    let s = spec.with_load(LoadSpec { node: spec.load.node, delta_omega: delta, gamma_load: g });
                    match solve_amplitudes(&s) {
                        Ok(st) => {
                            let (p_l, p_r) = (load_power(&s, &st), radiated_power(&s, &st));
                            Ok((p_l, efficiency(p_l, p_r).unwrap_or(f64::NAN)))
                        }
                        Err(Error::SingularNetwork { .. }) => Ok((f64::NAN, f64::NAN)),
                        Err(e) => Err(e),
                    }
                })
                .collect::<Result<_>>()?;
            let _ = writeln!(out, "# gamma_th={},delta_omega_th={}", fmt_f64(th.gamma_th), fmt_f64(th.delta_omega_th));
            out.push_str("gamma_load,p_l,eta\n");
            for (g, (p_l, eta)) in grid.iter().zip(rows) {
                let _ = writeln!(out, "{},{},{}", fmt_f64(*g), fmt_f64(p_l), fmt_f64(eta));
            }
        }
    }
    Ok(out)
}

pub fn cmd_gen(a: &GenArgs) -> Result<String> {
    if a.nodes == 0 {
        return Err(Error::Validation(vec![Violation::Empty]));
    }
    let drive = DriveSpec {
        node: a.drive_node,
        omega_d: a.omega_d.unwrap_or(a.omega0 + a.j),
        rabi: Complex64::new(a.rabi_re, a.rabi_im),
    };
    let load = LoadSpec {
        node: a.load_node.unwrap_or(a.nodes - 1),
        delta_omega: a.delta_omega,
        gamma_load: a.gamma_load,
    };
    let (spec, seed) = match a.kind {
        GenKind::Chain => (build_chain(a.nodes, a.omega0, a.j, a.gamma, drive, load)?, None),
        GenKind::Random => (
            build_random_all_to_all(a.nodes, a.omega0, a.j, a.j_std, a.gamma, a.seed, drive, load)?,
            Some(a.seed),
        ),
    };
    Ok(NetworkConfig::from_spec(&spec, seed).to_json())
}

pub fn cmd_oracle(spec: &NetworkSpec, n_max: usize) -> Result<String> {
    Ok(to_json(&compare_with_linear_solve(spec, n_max)?))
}

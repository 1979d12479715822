//! Driven dissipative bosonic networks: rotating-frame steady states,
//! single-node Thevenin reduction at the load, conjugate matching and the
//! power bookkeeping around it, plus a density-matrix oracle for small
//! networks.

pub mod cli;
pub mod config;
pub mod error;
pub mod grid;
pub mod lindblad;
pub mod linalg;
pub mod network;
pub mod power;
pub mod steady_state;
pub mod thevenin;

pub use config::NetworkConfig;
pub use error::{Error, Result};
pub use network::{build_chain, build_random_all_to_all, validate, DriveSpec, LoadSpec, NetworkSpec, Severity, Violation};
pub use power::PowerReport;
pub use steady_state::{effective_matrix, solve_amplitudes, EffectiveMatrix, SteadyState};
pub use thevenin::{matched_load, MatchedLoad, TheveninEquivalent};

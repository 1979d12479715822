use thiserror::Error;

use crate::network::Violation;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid network: {}", format_violations(.0))]
    Validation(Vec<Violation>),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("singular network matrix (condition estimate {condition:.3e})")]
    SingularNetwork { condition: f64 },

    #[error("load node {node} is dark: diagonal resolvent element vanishes at this drive frequency")]
    DarkNode { node: usize },

    #[error("zero pivot while eliminating node {node}")]
    PivotBreakdown { node: usize },

    #[error("time integration did not converge by t = {t_final}: residual {residual:.3e}")]
    ConvergenceFailure { residual: f64, t_final: f64 },

    #[error("no passive load attains the optimum: gamma_th = {gamma_th:.6e}")]
    UnphysicalMatch { gamma_th: f64 },

    #[error("unsupported topology: {0}")]
    UnsupportedTopology(String),

    #[error("invalid moments: {0}")]
    InvalidMoments(String),

    #[error("undefined efficiency: both load and radiated power vanish")]
    UndefinedEfficiency,

    #[error("Fock space too large: Liouvillian dimension {dim} exceeds {cap}")]
    CapacityError { dim: usize, cap: usize },

    #[error("steady state is not unique (rank deficiency {deficiency})")]
    NonUniqueSteadyState { deficiency: usize },

    #[error("density matrix invariant violated: {0}")]
    InvalidDensity(String),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

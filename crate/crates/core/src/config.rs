//! JSON network configuration files.
//!
//! ```json
//! {
//!   "nodes": [{"omega": 1000.0, "gamma": 1.0}, {"omega": 1000.0, "gamma": 0.0}],
//!   "edges": [{"i": 0, "j": 1, "J": 2.5}],
//!   "drive": {"node": 0, "omega_d": 1002.5, "rabi_re": 1.0, "rabi_im": 0.0},
//!   "load": {"node": 1, "delta_omega": 0.0, "gamma_load": 1.0}
//! }
//! ```
//!
//! Edges are undirected and unlisted pairs have zero coupling. Indices are
//! 0-based. An optional top-level `"seed"` records the generator seed.

use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{DriveSpec, LoadSpec, NetworkSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeEntry {
    pub omega: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeEntry {
    pub i: usize,
    pub j: usize,
    #[serde(rename = "J")]
    pub coupling: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveEntry {
    pub node: usize,
    pub omega_d: f64,
    pub rabi_re: f64,
    pub rabi_im: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadEntry {
    pub node: usize,
    pub delta_omega: f64,
    pub gamma_load: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub nodes: Vec<NodeEntry>,
    pub edges: Vec<EdgeEntry>,
    pub drive: DriveEntry,
    pub load: LoadEntry,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl NetworkConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| {
            Error::InvalidArgument(format!("config parse error at line {} column {}: {e}", e.line(), e.column()))
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidArgument(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    /// Builds and validates the network.
    pub fn to_spec(&self) -> Result<NetworkSpec> {
        let n = self.nodes.len();
        let mut couplings = DMatrix::zeros(n, n);
        let mut seen = DMatrix::from_element(n, n, false);
        for (k, e) in self.edges.iter().enumerate() {
            if e.i >= n || e.j >= n {
                return Err(Error::InvalidArgument(format!(
                    "edges[{k}]: index ({}, {}) out of range for {n} nodes",
                    e.i, e.j
                )));
            }
            if e.i == e.j {
                return Err(Error::InvalidArgument(format!("edges[{k}]: self-coupling on node {}", e.i)));
            }
            if seen[(e.i, e.j)] {
                return Err(Error::InvalidArgument(format!("edges[{k}]: duplicate edge ({}, {})", e.i, e.j)));
            }
            seen[(e.i, e.j)] = true;
            seen[(e.j, e.i)] = true;
            couplings[(e.i, e.j)] = e.coupling;
            couplings[(e.j, e.i)] = e.coupling;
        }
        let spec = NetworkSpec {
            node_frequencies: self.nodes.iter().map(|x| x.omega).collect(),
            intrinsic_decays: self.nodes.iter().map(|x| x.gamma).collect(),
            couplings,
            drive: DriveSpec {
                node: self.drive.node,
                omega_d: self.drive.omega_d,
                rabi: Complex64::new(self.drive.rabi_re, self.drive.rabi_im),
            },
            load: LoadSpec {
                node: self.load.node,
                delta_omega: self.load.delta_omega,
                gamma_load: self.load.gamma_load,
            },
        };
        spec.ensure_valid()?;
        Ok(spec)
    }

    /// Config for a spec; only nonzero couplings are listed as edges.
    pub fn from_spec(spec: &NetworkSpec, seed: Option<u64>) -> Self {
        let n = spec.n_nodes();
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                let c = spec.couplings[(i, j)];
                if c != 0.0 {
                    edges.push(EdgeEntry { i, j, coupling: c });
                }
            }
        }
        Self {
            nodes: spec
                .node_frequencies
                .iter()
                .zip(&spec.intrinsic_decays)
                .map(|(&omega, &gamma)| NodeEntry { omega, gamma })
                .collect(),
            edges,
            drive: DriveEntry {
                node: spec.drive.node,
                omega_d: spec.drive.omega_d,
                rabi_re: spec.drive.rabi.re,
                rabi_im: spec.drive.rabi.im,
            },
            load: LoadEntry {
                node: spec.load.node,
                delta_omega: spec.load.delta_omega,
                gamma_load: spec.load.gamma_load,
            },
            seed,
        }
    }
}

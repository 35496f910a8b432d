use thiserror::Error;

use crate::network::{NodeId, PipeId, Violation};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid network: {}", format_violations(.0))]
    Invalid(Vec<Violation>),

    #[error("network graph is disconnected")]
    Disconnected,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("singular linear system (pivot {pivot:.3e} in column {column})")]
    Singular { column: usize, pivot: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("Colebrook iteration did not converge (Re = {reynolds}, eps/D = {rel_roughness})")]
    ColebrookNoConvergence { reynolds: f64, rel_roughness: f64 },

    #[error("invalid loop set: {0}")]
    Loops(String),

    #[error("initial flows violate node balance at node {node} (residual {residual:.3e} m3/s)")]
    InfeasibleFlows { node: NodeId, residual: f64 },

    #[error("flows missing for pipe {0}")]
    MissingFlow(PipeId),

    #[error("negative squared pressure {squared:.3e} Pa^2 at node {node}")]
    NegativeSquaredPressure { node: NodeId, squared: f64 },

    #[error("unknown node {0}")]
    UnknownNode(NodeId),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

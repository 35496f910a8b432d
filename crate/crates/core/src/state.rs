use std::collections::BTreeMap;
use std::fmt;

use crate::network::{Network, NodeId, PipeId};
use crate::units::m3s_to_m3h;
use crate::{Error, Result};

/// Signed volumetric flow per pipe, m³/s, positive along the pipe's
/// reference orientation. Ordered like [`Network::pipes`].
#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pipes: Vec<PipeId>,
    flows: Vec<f64>,
}

impl FlowState {
    pub fn zeros(net: &Network) -> Self {
        Self {
            pipes: net.pipe_ids(),
            flows: vec![0.0; net.pipes().len()],
        }
    }

    /// Flows in network pipe order.
    pub fn from_vec(net: &Network, flows: Vec<f64>) -> Result<Self> {
        if flows.len() != net.pipes().len() {
            return Err(Error::Dimension(format!(
                "{} flows for {} pipes",
                flows.len(),
                net.pipes().len()
            )));
        }
        Ok(Self {
            pipes: net.pipe_ids(),
            flows,
        })
    }

    /// Builds a state from a per-pipe map; every pipe must be present.
    pub fn from_map(net: &Network, map: &BTreeMap<PipeId, f64>) -> Result<Self> {
        let flows = net
            .pipes()
            .iter()
            .map(|p| map.get(&p.id).copied().ok_or(Error::MissingFlow(p.id)))
            .collect::<Result<Vec<_>>>()?;
        Self::from_vec(net, flows)
    }

    pub fn pipe_ids(&self) -> &[PipeId] {
        &self.pipes
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.flows
    }

    pub fn get(&self, pipe: PipeId) -> Option<f64> {
        self.pipes.iter().position(|&p| p == pipe).map(|i| self.flows[i])
    }

    /// Same as [`get`](Self::get), in m³/h.
    pub fn get_m3h(&self, pipe: PipeId) -> Option<f64> {
        self.get(pipe).map(m3s_to_m3h)
    }

    pub fn iter(&self) -> impl Iterator<Item = (PipeId, f64)> + '_ {
        self.pipes.iter().copied().zip(self.flows.iter().copied())
    }

    pub fn to_map(&self) -> BTreeMap<PipeId, f64> {
        self.iter().collect()
    }

    /// Largest absolute per-pipe difference, m³/s.
    pub fn max_abs_diff(&self, other: &FlowState) -> f64 {
        self.flows
            .iter()
            .zip(&other.flows)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Inflow minus outflow minus demand at every node, m³/s, in network
    /// node order.
    pub fn node_residuals(&self, net: &Network) -> Vec<f64> {
        let mut r: Vec<f64> = net.nodes().iter().map(|n| -n.demand).collect();
        for (p, q) in net.pipes().iter().zip(&self.flows) {
            if let Some(i) = net.node_index(p.from) {
                r[i] -= q;
            }
            if let Some(i) = net.node_index(p.to) {
                r[i] += q;
            }
        }
        r
    }

    pub fn max_node_residual(&self, net: &Network) -> f64 {
        self.node_residuals(net).iter().fold(0.0, |m, r| m.max(r.abs()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Converged,
    MaxIterations,
    SingularSystem,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Termination::Converged => "converged",
            Termination::MaxIterations => "max-iterations",
            Termination::SingularSystem => "singular-system",
        })
    }
}

/// Everything a solver run produced.
#[derive(Debug, Clone)]
pub struct SolveReport {
    /// Initial state followed by one state per update.
    pub iterations: Vec<FlowState>,
    /// |ΣF| per loop for every entry of `iterations` (Pa² gas, Pa water).
    pub loop_residuals: Vec<Vec<f64>>,
    pub termination: Termination,
    /// m/s, from the final state.
    pub velocities: BTreeMap<PipeId, f64>,
    /// Pa; present when a source pressure was configured.
    pub node_pressures: Option<BTreeMap<NodeId, f64>>,
    /// 1-norm condition estimate of each linear system solved.
    pub condition_estimates: Vec<f64>,
    /// Update numbers (1-based) where the step was halved.
    pub damped_updates: Vec<usize>,
}

impl SolveReport {
    pub fn final_flows(&self) -> &FlowState {
        self.iterations.last().expect("report holds the initial state")
    }

    /// Number of updates performed (the initial state is not counted).
    pub fn update_count(&self) -> usize {
        self.iterations.len() - 1
    }

    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }

    pub fn max_final_loop_residual(&self) -> f64 {
        self.loop_residuals
            .last()
            .map(|r| r.iter().fold(0.0, |m: f64, x| m.max(*x)))
            .unwrap_or(0.0)
    }

    /// Pipes whose final flow runs against the initial direction.
    pub fn reversed_pipes(&self) -> Vec<PipeId> {
        let first = &self.iterations[0];
        first
            .iter()
            .zip(self.final_flows().as_slice())
            .filter(|((_, q0), q)| q0.signum() * q.signum() < 0.0)
            .map(|((p, _), _)| p)
            .collect()
    }
}

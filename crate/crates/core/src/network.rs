//! Network description: pipes, nodes, fluid, and the validation rules every
//! solver relies on.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::units::m3h_to_m3s;

/// Allowed absolute imbalance of the node demands, in m³/h.
pub const DEMAND_BALANCE_TOLERANCE_M3H: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PipeId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl fmt::Display for PipeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

/// A single conduit. `from` → `to` is the reference orientation: a positive
/// flow runs that way.
#[derive(Debug, Clone, PartialEq)]
pub struct Pipe {
    pub id: PipeId,
    pub from: NodeId,
    pub to: NodeId,
    /// Inner diameter, m.
    pub diameter: f64,
    /// Length, m.
    pub length: f64,
    /// Absolute inner-wall roughness, m.
    pub roughness: f64,
}

/// A junction with a fixed demand in m³/s. Consumption is positive, supply
/// negative.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSpec {
    pub id: NodeId,
    pub demand: f64,
}

impl NodeSpec {
    pub fn from_m3h(id: u32, demand_m3h: f64) -> Self {
        Self {
            id: NodeId(id),
            demand: m3h_to_m3s(demand_m3h),
        }
    }

    pub fn demand_m3h(&self) -> f64 {
        crate::units::m3s_to_m3h_exact(self.demand)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GasSpec {
    /// Density relative to air.
    pub relative_density: f64,
    /// Absolute operating pressure p_a, Pa.
    pub operating_pressure: f64,
    /// Normal (standard) pressure p_n, Pa.
    pub normal_pressure: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaterSpec {
    /// kg/m³
    pub density: f64,
    /// Dynamic viscosity, Pa·s.
    pub viscosity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FluidSpec {
    Gas(GasSpec),
    Water(WaterSpec),
}

impl FluidSpec {
    pub fn kind(&self) -> FluidKind {
        match self {
            FluidSpec::Gas(_) => FluidKind::Gas,
            FluidSpec::Water(_) => FluidKind::Water,
        }
    }

    /// p_n / p_a for gas (flows are quoted at normal conditions), 1 for water.
    pub fn pressure_ratio(&self) -> f64 {
        match self {
            FluidSpec::Gas(g) => g.normal_pressure / g.operating_pressure,
            FluidSpec::Water(_) => 1.0,
        }
    }

    fn fields(&self) -> Vec<(&'static str, f64)> {
        match self {
            FluidSpec::Gas(g) => vec![
                ("rel_density", g.relative_density),
                ("operating_pressure_pa", g.operating_pressure),
                ("normal_pressure_pa", g.normal_pressure),
            ],
            FluidSpec::Water(w) => vec![("density", w.density), ("viscosity", w.viscosity)],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FluidKind {
    Gas,
    Water,
}

impl fmt::Display for FluidKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FluidKind::Gas => "gas",
            FluidKind::Water => "water",
        })
    }
}

/// One explicitly supplied loop: pipes with their ±1 orientation in the loop.
pub type SignedLoop = Vec<(PipeId, i8)>;

/// A single problem found by [`validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    UnbalancedDemands { sum_m3h: f64 },
    SelfLoop(PipeId),
    PipeField { pipe: PipeId, field: &'static str, value: f64 },
    FluidField { field: &'static str, value: f64 },
    UnknownEndpoint { pipe: PipeId, node: NodeId },
    DuplicatePipe(PipeId),
    DuplicateNode(NodeId),
    UnknownReferenceNode(NodeId),
    Disconnected { unreached: Vec<NodeId> },
    NoLoops { pipes: usize, nodes: usize },
    NonFiniteDemand(NodeId),
    LoopUnknownPipe { index: usize, pipe: PipeId },
    LoopBadSign { index: usize, pipe: PipeId },
    InitialFlowUnknownPipe(PipeId),
    InitialFlowNonFinite(PipeId),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::UnbalancedDemands { sum_m3h } => {
                write!(f, "unbalanced demands (sum = {sum_m3h} m3/h)")
            }
            Violation::SelfLoop(p) => write!(f, "self-loop pipe {p}"),
            Violation::PipeField { pipe, field, value } => {
                write!(f, "pipe {pipe}: invalid {field} = {value}")
            }
            Violation::FluidField { field, value } => write!(f, "fluid: invalid {field} = {value}"),
            Violation::UnknownEndpoint { pipe, node } => {
                write!(f, "pipe {pipe}: unknown endpoint node {node}")
            }
            Violation::DuplicatePipe(p) => write!(f, "duplicate pipe id {p}"),
            Violation::DuplicateNode(n) => write!(f, "duplicate node id {n}"),
            Violation::UnknownReferenceNode(n) => write!(f, "unknown reference node {n}"),
            Violation::Disconnected { unreached } => {
                let ids: Vec<String> = unreached.iter().map(|n| n.to_string()).collect();
                write!(f, "disconnected graph (unreachable nodes: {})", ids.join(", "))
            }
            Violation::NoLoops { pipes, nodes } => {
                write!(f, "no loops: {pipes} pipes and {nodes} nodes give X - Y + 1 < 1")
            }
            Violation::NonFiniteDemand(n) => write!(f, "node {n}: non-finite demand"),
            Violation::LoopUnknownPipe { index, pipe } => {
                write!(f, "loop {}: unknown pipe {pipe}", index + 1)
            }
            Violation::LoopBadSign { index, pipe } => {
                write!(f, "loop {}: pipe {pipe} has a sign other than +1/-1", index + 1)
            }
            Violation::InitialFlowUnknownPipe(p) => write!(f, "initial flow for unknown pipe {p}"),
            Violation::InitialFlowNonFinite(p) => write!(f, "initial flow for pipe {p} is not finite"),
        }
    }
}

/// Immutable network description.
///
/// Construction never fails; call [`validate`] (or let a solver do it) to
/// find out whether the description is usable.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pipes: Vec<Pipe>,
    nodes: Vec<NodeSpec>,
    fluid: FluidSpec,
    reference_node: NodeId,
    explicit_loops: Option<Vec<SignedLoop>>,
    initial_flows: Option<BTreeMap<PipeId, f64>>,
    pipe_index: BTreeMap<PipeId, usize>,
    node_index: BTreeMap<NodeId, usize>,
}

impl Network {
    /// Builds a network. The reference node defaults to the highest node id.
    pub fn new(
        pipes: Vec<Pipe>,
        nodes: Vec<NodeSpec>,
        fluid: FluidSpec,
        reference_node: Option<NodeId>,
    ) -> Self {
        let pipe_index = pipes.iter().enumerate().map(|(i, p)| (p.id, i)).collect();
        let node_index = nodes.iter().enumerate().map(|(i, n)| (n.id, i)).collect();
        let reference_node = reference_node
            .or_else(|| nodes.iter().map(|n| n.id).max())
            .unwrap_or(NodeId(0));
        Self {
            pipes,
            nodes,
            fluid,
            reference_node,
            explicit_loops: None,
            initial_flows: None,
            pipe_index,
            node_index,
        }
    }

    pub fn with_explicit_loops(mut self, loops: Vec<SignedLoop>) -> Self {
        self.explicit_loops = Some(loops);
        self
    }

    /// Attaches an initial flow pattern (m³/s per pipe).
    pub fn with_initial_flows(mut self, flows: BTreeMap<PipeId, f64>) -> Self {
        self.initial_flows = Some(flows);
        self
    }

    pub fn with_reference_node(mut self, node: NodeId) -> Self {
        self.reference_node = node;
        self
    }

    pub fn with_fluid(mut self, fluid: FluidSpec) -> Self {
        self.fluid = fluid;
        self
    }

    /// Returns a copy with every diameter replaced through `f`.
    pub fn map_diameters(&self, mut f: impl FnMut(&Pipe) -> f64) -> Self {
        let mut out = self.clone();
        for p in &mut out.pipes {
            p.diameter = f(p);
        }
        out
    }

    pub fn pipes(&self) -> &[Pipe] {
        &self.pipes
    }

    pub fn nodes(&self) -> &[NodeSpec] {
        &self.nodes
    }

    pub fn fluid(&self) -> &FluidSpec {
        &self.fluid
    }

    pub fn reference_node(&self) -> NodeId {
        self.reference_node
    }

    pub fn explicit_loops(&self) -> Option<&[SignedLoop]> {
        self.explicit_loops.as_deref()
    }

    pub fn initial_flows(&self) -> Option<&BTreeMap<PipeId, f64>> {
        self.initial_flows.as_ref()
    }

    pub fn pipe_index(&self, id: PipeId) -> Option<usize> {
        self.pipe_index.get(&id).copied()
    }

    pub fn node_index(&self, id: NodeId) -> Option<usize> {
        self.node_index.get(&id).copied()
    }

    pub fn pipe(&self, id: PipeId) -> Option<&Pipe> {
        self.pipe_index(id).map(|i| &self.pipes[i])
    }

    pub fn pipe_ids(&self) -> Vec<PipeId> {
        self.pipes.iter().map(|p| p.id).collect()
    }

    /// Number of independent loops, X − Y + 1.
    pub fn loop_count(&self) -> isize {
        self.pipes.len() as isize - self.nodes.len() as isize + 1
    }

    /// Sum of the (negative) supply demands, as a positive m³/s figure.
    pub fn total_supply(&self) -> f64 {
        self.nodes.iter().filter(|n| n.demand < 0.0).map(|n| -n.demand).sum()
    }

    /// The node with the largest supply; falls back to the first node.
    pub fn main_source(&self) -> Option<NodeId> {
        self.nodes
            .iter()
            .min_by(|a, b| a.demand.total_cmp(&b.demand).then(a.id.cmp(&b.id)))
            .map(|n| n.id)
    }

    /// Per node, the pipes touching it as (pipe index, other node index),
    /// sorted by pipe id. Pipes with unknown endpoints are skipped.
    pub(crate) fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for (pi, p) in self.pipes.iter().enumerate() {
            if let (Some(a), Some(b)) = (self.node_index(p.from), self.node_index(p.to)) {
                adj[a].push((pi, b));
                if a != b {
                    adj[b].push((pi, a));
                }
            }
        }
        for list in &mut adj {
            list.sort_by_key(|&(pi, _)| self.pipes[pi].id);
        }
        adj
    }

    /// Node indices not reachable from the first node (in id order).
    pub(crate) fn unreachable_nodes(&self) -> Vec<NodeId> {
        let Some(start) = self.nodes.iter().map(|n| n.id).min() else {
            return Vec::new();
        };
        let adj = self.adjacency();
        let mut seen = vec![false; self.nodes.len()];
        let s = self.node_index(start).expect("start node exists");
        seen[s] = true;
        let mut queue = VecDeque::from([s]);
        while let Some(n) = queue.pop_front() {
            for &(_, m) in &adj[n] {
                if !seen[m] {
                    seen[m] = true;
                    queue.push_back(m);
                }
            }
        }
        let mut out: Vec<NodeId> = self
            .nodes
            .iter()
            .zip(&seen)
            .filter(|(_, s)| !**s)
            .map(|(n, _)| n.id)
            .collect();
        out.sort();
        out
    }
}

/// Checks every network invariant; the returned list is empty iff the
/// network is usable by the solvers.
pub fn validate(net: &Network) -> Vec<Violation> {
    let mut out = Vec::new();

    let mut seen_nodes = BTreeSet::new();
    for n in net.nodes() {
        if !seen_nodes.insert(n.id) {
            out.push(Violation::DuplicateNode(n.id));
        }
        if !n.demand.is_finite() {
            out.push(Violation::NonFiniteDemand(n.id));
        }
    }

    let mut seen_pipes = BTreeSet::new();
    for p in net.pipes() {
        if !seen_pipes.insert(p.id) {
            out.push(Violation::DuplicatePipe(p.id));
        }
        if p.from == p.to {
            out.push(Violation::SelfLoop(p.id));
        }
        for (field, value, ok) in [
            ("diameter_m", p.diameter, p.diameter > 0.0 && p.diameter.is_finite()),
            ("length_m", p.length, p.length > 0.0 && p.length.is_finite()),
            ("roughness_m", p.roughness, p.roughness >= 0.0 && p.roughness.is_finite()),
        ] {
            if !ok {
                out.push(Violation::PipeField { pipe: p.id, field, value });
            }
        }
        for node in [p.from, p.to] {
            if net.node_index(node).is_none() {
                out.push(Violation::UnknownEndpoint { pipe: p.id, node });
            }
        }
    }

    for (field, value) in net.fluid().fields() {
        if !(value > 0.0 && value.is_finite()) {
            out.push(Violation::FluidField { field, value });
        }
    }

    let sum_m3h: f64 = net.nodes().iter().map(|n| n.demand_m3h()).sum();
    if sum_m3h.is_finite() && sum_m3h.abs() > DEMAND_BALANCE_TOLERANCE_M3H {
        out.push(Violation::UnbalancedDemands { sum_m3h });
    }

    if net.node_index(net.reference_node()).is_none() {
        out.push(Violation::UnknownReferenceNode(net.reference_node()));
    }

    let unreached = net.unreachable_nodes();
    if !unreached.is_empty() {
        out.push(Violation::Disconnected { unreached });
    }

    if net.loop_count() < 1 {
        out.push(Violation::NoLoops {
            pipes: net.pipes().len(),
            nodes: net.nodes().len(),
        });
    }

    if let Some(loops) = net.explicit_loops() {
        for (index, lp) in loops.iter().enumerate() {
            for &(pipe, sign) in lp {
                if net.pipe_index(pipe).is_none() {
                    out.push(Violation::LoopUnknownPipe { index, pipe });
                }
                if sign != 1 && sign != -1 {
                    out.push(Violation::LoopBadSign { index, pipe });
                }
            }
        }
    }

    if let Some(flows) = net.initial_flows() {
        for (&pipe, &q) in flows {
            if net.pipe_index(pipe).is_none() {
                out.push(Violation::InitialFlowUnknownPipe(pipe));
            } else if !q.is_finite() {
                out.push(Violation::InitialFlowNonFinite(pipe));
            }
        }
    }

    out
}

/// Fails with [`crate::Error::Invalid`] unless `validate` is clean.
pub fn ensure_valid(net: &Network) -> crate::Result<()> {
    let v = validate(net);
    if v.is_empty() {
        Ok(())
    } else {
        Err(crate::Error::Invalid(v))
    }
}

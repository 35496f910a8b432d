//! Initial flow patterns that satisfy every node balance.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::network::Network;
use crate::state::FlowState;
use crate::topology::SpanningTree;
use crate::{Error, Result};

/// Largest node imbalance accepted for a supplied pattern, m³/s.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-9;

/// Completes a flow pattern: `link_flows` fixes every pipe outside the
/// spanning tree (entries for tree pipes are ignored) and tree pipes are
/// solved from the leaves inward so that each node balance holds.
pub fn tree_flows(net: &Network, link_flows: &[f64]) -> Result<FlowState> {
    if link_flows.len() != net.pipes().len() {
        return Err(Error::Dimension(format!(
            "{} link flows for {} pipes",
            link_flows.len(),
            net.pipes().len()
        )));
    }
    let tree = SpanningTree::build(net)?;
    let mut q: Vec<f64> = link_flows
        .iter()
        .zip(&tree.in_tree)
        .map(|(&v, &t)| if t { 0.0 } else { v })
        .collect();

    // inflow known so far at each node, from links and finished subtrees
    let mut inflow = vec![0.0; net.nodes().len()];
    for (pi, p) in net.pipes().iter().enumerate() {
        if !tree.in_tree[pi] {
            let a = net.node_index(p.from).ok_or(Error::UnknownNode(p.from))?;
            let b = net.node_index(p.to).ok_or(Error::UnknownNode(p.to))?;
            inflow[a] -= q[pi];
            inflow[b] += q[pi];
        }
    }
    for &n in tree.order.iter().skip(1).rev() {
        let (pi, up) = tree.parent[n].expect("non-root node has a parent");
        let need = net.nodes()[n].demand - inflow[n];
        let enters = net.node_index(net.pipes()[pi].to) == Some(n);
        q[pi] = if enters { need } else { -need };
        inflow[n] += need;
        inflow[up] -= need;
    }
    FlowState::from_vec(net, q)
}

/// A feasible pattern with seeded random flows on the link pipes.
pub fn random_feasible_flows(net: &Network, seed: u64) -> Result<FlowState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 0.25 * net.total_supply();
    let links: Vec<f64> = (0..net.pipes().len())
        .map(|_| if scale > 0.0 { rng.gen_range(-scale..=scale) } else { 0.0 })
        .collect();
    tree_flows(net, &links)
}

/// The network's own initial pattern when it carries one (checked for
/// feasibility), otherwise [`random_feasible_flows`] with `seed`.
pub fn feasible_initial_flows(net: &Network, seed: u64) -> Result<FlowState> {
    match net.initial_flows() {
        Some(map) => {
            let state = FlowState::from_map(net, map)?;
            check_feasible(net, &state)?;
            Ok(state)
        }
        None => random_feasible_flows(net, seed),
    }
}

pub fn check_feasible(net: &Network, state: &FlowState) -> Result<()> {
    let residuals = state.node_residuals(net);
    match residuals
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
    {
        Some((i, &r)) if r.abs() > FEASIBILITY_TOLERANCE => Err(Error::InfeasibleFlows {
            node: net.nodes()[i].id,
            residual: r,
        }),
        _ => Ok(()),
    }
}

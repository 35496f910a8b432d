use std::collections::{BTreeMap, VecDeque};

use crate::friction::FluidModel;
use crate::network::{FluidSpec, Network, NodeId};
use crate::state::FlowState;
use crate::{Error, Result};

/// Node pressures from a source pressure, walking the network breadth-first
/// (ascending node id among neighbours). Along a pipe in its flow
/// direction, gas loses F in p² and water loses F in p.
pub fn propagate_pressures(
    net: &Network,
    flows: &FlowState,
    source_node: NodeId,
    source_pressure: f64,
) -> Result<BTreeMap<NodeId, f64>> {
    let gas = matches!(net.fluid(), FluidSpec::Gas(_));
    let start = net.node_index(source_node).ok_or(Error::UnknownNode(source_node))?;
    let q = flows.as_slice();

    // signed potential drop from `from` to `to` of every pipe
    let drops = net
        .pipes()
        .iter()
        .zip(q)
        .map(|(p, &qi)| Ok(qi.signum() * net.fluid().eval(p, qi.abs(), 0.0)?.f))
        .collect::<Result<Vec<f64>>>()?;

    let mut adj = net.adjacency();
    for list in &mut adj {
        list.sort_by_key(|&(pi, other)| (net.nodes()[other].id, net.pipes()[pi].id));
    }

    let n = net.nodes().len();
    let mut potential: Vec<Option<f64>> = vec![None; n];
    potential[start] = Some(if gas { source_pressure * source_pressure } else { source_pressure });
    let mut queue = VecDeque::from([start]);
    while let Some(u) = queue.pop_front() {
        let pu = potential[u].expect("queued nodes are set");
        for &(pi, v) in &adj[u] {
            if potential[v].is_some() {
                continue;
            }
            let leaving = net.node_index(net.pipes()[pi].from) == Some(u);
            let pv = if leaving { pu - drops[pi] } else { pu + drops[pi] };
            if gas && pv < 0.0 {
                return Err(Error::NegativeSquaredPressure {
                    node: net.nodes()[v].id,
                    squared: pv,
                });
            }
            potential[v] = Some(pv);
            queue.push_back(v);
        }
    }

    net.nodes()
        .iter()
        .zip(potential)
        .map(|(node, p)| {
            let p = p.ok_or(Error::Disconnected)?;
            Ok((node.id, if gas { p.sqrt() } else { p }))
        })
        .collect()
}

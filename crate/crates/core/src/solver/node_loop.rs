use crate::network::Network;
use crate::numerics::{condition_estimate, solve_linear, DenseSystem};
use crate::state::FlowState;
use crate::topology::{LoopBasis, NodeMatrix};
use crate::{Error, Result};

use super::LoopEval;

/// Stacks the node balances (top, one row per non-reference node, rhs the
/// node demand) over the linearised loop equations (bottom):
///
/// Σᵢ s(ℓ,i)·|F′ᵢ|·Qᵢ = −ΣF(ℓ) + Σᵢ s(ℓ,i)·Qᵢ·|F′ᵢ|
///
/// with Qᵢ the signed flows of the current iterate.
pub fn assemble_node_loop_system(
    net: &Network,
    node_matrix: &NodeMatrix,
    basis: &LoopBasis,
    flows: &FlowState,
    eval: &LoopEval,
) -> Result<DenseSystem> {
    let x = net.pipes().len();
    if node_matrix.rows() + basis.len() != x || node_matrix.cols() != x || eval.terms.len() != basis.len() {
        return Err(Error::Dimension(format!(
            "{} node rows + {} loops for {x} pipes",
            node_matrix.rows(),
            basis.len()
        )));
    }
    if flows.as_slice().len() != x {
        return Err(Error::Dimension(format!("{} flows for {x} pipes", flows.as_slice().len())));
    }

    let mut matrix = Vec::with_capacity(x);
    let mut rhs = Vec::with_capacity(x);
    for (node, row) in node_matrix.nodes.iter().zip(&node_matrix.entries) {
        matrix.push(row.iter().map(|&v| v as f64).collect());
        let i = net.node_index(*node).ok_or(Error::UnknownNode(*node))?;
        rhs.push(net.nodes()[i].demand);
    }
    for (sum, terms) in eval.sums.iter().zip(&eval.terms) {
        let mut row = vec![0.0; x];
        let mut b = -sum;
        for t in terms {
            let s = t.sign as f64;
            row[t.pipe_index] = s * t.slope;
            b += s * t.flow * t.slope;
        }
        matrix.push(row);
        rhs.push(b);
    }
    DenseSystem::new(matrix, rhs)
}

/// New flows, or `None` when the system is singular.
pub(super) fn step(
    net: &Network,
    node_matrix: &NodeMatrix,
    basis: &LoopBasis,
    flows: &FlowState,
    eval: &LoopEval,
    conditions: &mut Vec<f64>,
) -> Result<Option<Vec<f64>>> {
    let sys = assemble_node_loop_system(net, node_matrix, basis, flows, eval)?;
    conditions.push(condition_estimate(&sys));
    match solve_linear(&sys) {
        Ok(q) => Ok(Some(q)),
        Err(Error::Singular { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

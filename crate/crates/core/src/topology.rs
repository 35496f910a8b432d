//! Node incidence matrix and independent loop sets.

use std::collections::{BTreeSet, VecDeque};

use crate::network::{Network, NodeId, PipeId};
use crate::{Error, Result};

/// Node–pipe incidence with the reference node's row left out.
///
/// Entry −1 where the pipe's reference orientation leaves the row's node,
/// +1 where it enters, 0 otherwise.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeMatrix {
    pub nodes: Vec<NodeId>,
    pub pipes: Vec<PipeId>,
    pub entries: Vec<Vec<i8>>,
}

impl NodeMatrix {
    pub fn rows(&self) -> usize {
        self.entries.len()
    }

    pub fn cols(&self) -> usize {
        self.pipes.len()
    }

    pub fn row(&self, node: NodeId) -> Option<&[i8]> {
        self.nodes
            .iter()
            .position(|&n| n == node)
            .map(|i| self.entries[i].as_slice())
    }
}

pub fn build_node_matrix(net: &Network) -> NodeMatrix {
    let reference = net.reference_node();
    let mut nodes = Vec::new();
    let mut entries = Vec::new();
    for n in net.nodes().iter().filter(|n| n.id != reference) {
        let row = net
            .pipes()
            .iter()
            .map(|p| {
                if p.from == n.id {
                    -1
                } else if p.to == n.id {
                    1
                } else {
                    0
                }
            })
            .collect();
        nodes.push(n.id);
        entries.push(row);
    }
    NodeMatrix {
        nodes,
        pipes: net.pipe_ids(),
        entries,
    }
}

/// A set of independent loops as a dense ±1 matrix: rows are loops,
/// columns follow the network's pipe order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoopBasis {
    pipes: Vec<PipeId>,
    rows: Vec<Vec<i8>>,
}

impl LoopBasis {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn pipes(&self) -> &[PipeId] {
        &self.pipes
    }

    pub fn rows(&self) -> &[Vec<i8>] {
        &self.rows
    }

    pub fn entry(&self, loop_index: usize, pipe_index: usize) -> i8 {
        self.rows[loop_index][pipe_index]
    }

    /// Nonzero entries of one loop as (pipe index, sign).
    pub fn members(&self, loop_index: usize) -> impl Iterator<Item = (usize, i8)> + '_ {
        self.rows[loop_index]
            .iter()
            .enumerate()
            .filter(|(_, s)| **s != 0)
            .map(|(i, s)| (i, *s))
    }

    /// Loop `l` as a signed pipe-id list.
    pub fn signed_pipes(&self, loop_index: usize) -> Vec<(PipeId, i8)> {
        self.members(loop_index).map(|(i, s)| (self.pipes[i], s)).collect()
    }

    /// Pipes that belong to at least one loop.
    pub fn pipes_in_loops(&self) -> Vec<bool> {
        (0..self.pipes.len())
            .map(|i| self.rows.iter().any(|r| r[i] != 0))
            .collect()
    }
}

/// Breadth-first spanning tree, started at the lowest node id and scanning
/// incident pipes in ascending id order.
#[derive(Debug, Clone)]
pub(crate) struct SpanningTree {
    /// Per node index: (pipe index, parent node index); `None` at the root.
    pub parent: Vec<Option<(usize, usize)>>,
    /// Node indices in discovery order.
    pub order: Vec<usize>,
    pub depth: Vec<usize>,
    pub in_tree: Vec<bool>,
}

impl SpanningTree {
    pub fn build(net: &Network) -> Result<Self> {
        let n = net.nodes().len();
        let root = net
            .nodes()
            .iter()
            .enumerate()
            .min_by_key(|(_, node)| node.id)
            .map(|(i, _)| i)
            .ok_or(Error::Disconnected)?;
        let adj = net.adjacency();
        let mut parent = vec![None; n];
        let mut depth = vec![0; n];
        let mut seen = vec![false; n];
        let mut in_tree = vec![false; net.pipes().len()];
        let mut order = vec![root];
        seen[root] = true;
        let mut queue = VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            for &(pi, v) in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    parent[v] = Some((pi, u));
                    depth[v] = depth[u] + 1;
                    in_tree[pi] = true;
                    order.push(v);
                    queue.push_back(v);
                }
            }
        }
        if order.len() != n {
            return Err(Error::Disconnected);
        }
        Ok(Self {
            parent,
            order,
            depth,
            in_tree,
        })
    }
}

/// One fundamental loop per link (non-tree) pipe. The link is traversed
/// along its reference orientation, so its own entry is +1.
pub fn derive_loop_basis(net: &Network) -> Result<LoopBasis> {
    let tree = SpanningTree::build(net)?;
    let x = net.pipes().len();
    let mut links: Vec<usize> = (0..x).filter(|&i| !tree.in_tree[i]).collect();
    links.sort_by_key(|&i| net.pipes()[i].id);

    let node_of = |id: NodeId| net.node_index(id).expect("validated endpoint");
    let mut rows = Vec::with_capacity(links.len());
    for link in links {
        let pipe = &net.pipes()[link];
        let mut row = vec![0i8; x];
        row[link] = 1;
        // Close the loop: walk the tree from `to` back to `from`.
        let mut a = node_of(pipe.to);
        let mut b = node_of(pipe.from);
        let mut tail = Vec::new();
        while a != b {
            if tree.depth[a] >= tree.depth[b] {
                let (pi, up) = tree.parent[a].expect("non-root has a parent");
                row[pi] += if node_of(net.pipes()[pi].from) == a { 1 } else { -1 };
                a = up;
            } else {
                let (pi, up) = tree.parent[b].expect("non-root has a parent");
                // traversed later, from `up` down to `b`
                tail.push((pi, up));
                b = up;
            }
        }
        for (pi, up) in tail {
            row[pi] += if node_of(net.pipes()[pi].from) == up { 1 } else { -1 };
        }
        rows.push(row);
    }
    Ok(LoopBasis {
        pipes: net.pipe_ids(),
        rows,
    })
}

/// Adopts the network's explicitly listed loops after checking that each
/// is a simple closed cycle, that there are X − Y + 1 of them, and that
/// they are independent.
pub fn adopt_explicit_loops(net: &Network) -> Result<LoopBasis> {
    let loops = net
        .explicit_loops()
        .ok_or_else(|| Error::Loops("network has no explicit loops".into()))?;
    let expected = net.loop_count().max(0) as usize;
    if loops.len() != expected {
        return Err(Error::Loops(format!(
            "wrong loop count: {} supplied, X - Y + 1 = {expected}",
            loops.len()
        )));
    }

    let x = net.pipes().len();
    let mut rows = Vec::with_capacity(loops.len());
    for (li, lp) in loops.iter().enumerate() {
        let mut row = vec![0i8; x];
        for &(pipe, sign) in lp {
            let pi = net
                .pipe_index(pipe)
                .ok_or_else(|| Error::Loops(format!("loop {}: unknown pipe {pipe}", li + 1)))?;
            if sign != 1 && sign != -1 {
                return Err(Error::Loops(format!("loop {}: bad sign on pipe {pipe}", li + 1)));
            }
            if row[pi] != 0 {
                return Err(Error::Loops(format!("loop {}: pipe {pipe} repeated", li + 1)));
            }
            row[pi] = sign;
        }
        check_simple_cycle(net, &row).map_err(|why| Error::Loops(format!("loop {}: {why}", li + 1)))?;
        rows.push(row);
    }

    if rank(&rows) < rows.len() {
        return Err(Error::Loops("rank-deficient loop set".into()));
    }
    Ok(LoopBasis {
        pipes: net.pipe_ids(),
        rows,
    })
}

/// Explicit loops when the network lists them, otherwise a derived basis.
pub fn loop_basis(net: &Network) -> Result<LoopBasis> {
    if net.explicit_loops().is_some() {
        adopt_explicit_loops(net)
    } else {
        derive_loop_basis(net)
    }
}

fn check_simple_cycle(net: &Network, row: &[i8]) -> std::result::Result<(), String> {
    let n = net.nodes().len();
    let mut balance = vec![0i32; n];
    let mut degree = vec![0u32; n];
    let mut members = Vec::new();
    for (pi, &s) in row.iter().enumerate() {
        if s == 0 {
            continue;
        }
        let p = &net.pipes()[pi];
        let (Some(a), Some(b)) = (net.node_index(p.from), net.node_index(p.to)) else {
            return Err(format!("pipe {} has an unknown endpoint", p.id));
        };
        balance[a] -= s as i32;
        balance[b] += s as i32;
        degree[a] += 1;
        degree[b] += 1;
        members.push((a, b));
    }
    if members.len() < 2 {
        return Err("not a closed cycle (fewer than two pipes)".into());
    }
    if let Some(i) = balance.iter().position(|&b| b != 0) {
        return Err(format!(
            "signs are inconsistent or the cycle is open at node {}",
            net.nodes()[i].id
        ));
    }
    if degree.iter().any(|&d| d != 0 && d != 2) {
        return Err("not a simple cycle".into());
    }
    // connected?
    let mut reached = BTreeSet::from([members[0].0]);
    let mut changed = true;
    while changed {
        changed = false;
        for &(a, b) in &members {
            if reached.contains(&a) != reached.contains(&b) {
                reached.insert(a);
                reached.insert(b);
                changed = true;
            }
        }
    }
    if reached.len() != degree.iter().filter(|&&d| d > 0).count() {
        return Err("pipes form more than one cycle".into());
    }
    Ok(())
}

fn rank(rows: &[Vec<i8>]) -> usize {
    let mut m: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| r.iter().map(|&v| v as f64).collect())
        .collect();
    let cols = m.first().map_or(0, |r| r.len());
    let mut rank = 0;
    for c in 0..cols {
        let Some(p) = (rank..m.len()).max_by(|&a, &b| m[a][c].abs().total_cmp(&m[b][c].abs()))
        else {
            break;
        };
        if m[p][c].abs() < 1e-9 {
            continue;
        }
        m.swap(rank, p);
        for r in rank + 1..m.len() {
            let f = m[r][c] / m[rank][c];
            if f != 0.0 {
                for k in c..cols {
                    m[r][k] -= f * m[rank][k];
                }
            }
        }
        rank += 1;
    }
    rank
}

//! Steady-state flow distribution in looped pipe networks carrying natural
//! gas or water.
//!
//! Three iterative solvers share one network model: the node-loop method,
//! which solves node balances and linearised loop equations together for
//! the pipe flows themselves, and the original and improved Hardy Cross
//! methods, which solve for loop flow corrections. An inverse mode keeps
//! flows fixed and adjusts diameters until every loop balances.


#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]
pub mod error;
pub mod fixtures;
pub mod friction;
pub mod initial;
pub mod io;
pub mod network;
pub mod numerics;
pub mod sizing;
pub mod solver;
pub mod state;
pub mod topology;
pub mod units;

pub use error::{Error, Result};
pub use friction::{FluidModel, PipeEval};
pub use initial::{feasible_initial_flows, random_feasible_flows, tree_flows};
pub use network::{
    validate, FluidKind, FluidSpec, GasSpec, Network, NodeId, NodeSpec, Pipe, PipeId, Violation,
    WaterSpec,
};
pub use sizing::{optimize_diameters, SizingConfig, SizingReport, SizingTermination};
pub use solver::{
    propagate_pressures, solve, solve_hardy_cross_improved, solve_hardy_cross_original,
    solve_node_loop, InitialGuess, Method, SolverConfig,
};
pub use state::{FlowState, SolveReport, Termination};
pub use topology::{LoopBasis, NodeMatrix};

//! Iterative flow solvers.
//!
//! All three methods share the same loop evaluation and stopping rule and
//! differ only in how one update is computed:
//!
//! * node-loop: node balances and linearised loop equations are stacked into
//!   one X×X system whose solution is the new flow in every pipe;
//! * improved Hardy Cross: all loop corrections solved together from the
//!   loop Jacobian;
//! * original Hardy Cross: each loop correction computed on its own.
//!
//! Flows carry their sign against the pipe reference orientation, so the
//! corrections need no direction bookkeeping: a negative result is simply a
//! reversed flow.

mod hardy_cross;
mod node_loop;
mod pressure;

use std::fmt;
use std::str::FromStr;

use crate::friction::{velocity, FluidModel, PipeEval};
use crate::initial::{check_feasible, feasible_initial_flows, random_feasible_flows};
use crate::network::{ensure_valid, FluidKind, Network, NodeId};
use crate::state::{FlowState, SolveReport, Termination};
use crate::topology::{loop_basis, LoopBasis};
use crate::units::m3h_to_m3s;
use crate::{Error, Result};

pub use hardy_cross::{hardy_cross_corrections, loop_jacobian};
pub use node_loop::assemble_node_loop_system;
pub use pressure::propagate_pressures;

/// Default loop-residual tolerance for gas networks, Pa².
pub const GAS_RESIDUAL_TOLERANCE: f64 = 1e3;
/// Default loop-residual tolerance for water networks, Pa.
pub const WATER_RESIDUAL_TOLERANCE: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    #[default]
    NodeLoop,
    HardyCross,
    HardyCrossImproved,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::NodeLoop, Method::HardyCross, Method::HardyCrossImproved];

    pub fn name(self) -> &'static str {
        match self {
            Method::NodeLoop => "node-loop",
            Method::HardyCross => "hardy-cross",
            Method::HardyCrossImproved => "hardy-cross-improved",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown method `{s}` (node-loop, hardy-cross, hardy-cross-improved)"))
    }
}

/// Where the first iterate comes from.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum InitialGuess {
    /// The network's own pattern, or a seed-0 random feasible pattern when it
    /// has none.
    #[default]
    Network,
    /// A random feasible pattern, ignoring any pattern in the network.
    Seeded(u64),
    Given(FlowState),
}

impl InitialGuess {
    pub fn resolve(&self, net: &Network) -> Result<FlowState> {
        let state = match self {
            InitialGuess::Network => feasible_initial_flows(net, 0)?,
            InitialGuess::Seeded(seed) => random_feasible_flows(net, *seed)?,
            InitialGuess::Given(s) => {
                if s.pipe_ids() != net.pipe_ids().as_slice() {
                    return Err(Error::Dimension("initial flows do not match the network's pipes".into()));
                }
                s.clone()
            }
        };
        check_feasible(net, &state)?;
        Ok(state)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub method: Method,
    /// Largest per-pipe change between successive iterates, m³/h.
    pub flow_tolerance: f64,
    /// Largest |ΣF| over the loops; `None` picks the fluid default.
    pub residual_tolerance: Option<f64>,
    pub max_iterations: usize,
    /// F′ is evaluated at no less than this flow, m³/s.
    pub derivative_flow_floor: f64,
    /// Halve an update once when it grows the worst loop residual tenfold.
    pub damping: bool,
    pub initial: InitialGuess,
    /// Absolute source pressure for node pressures, Pa.
    pub source_pressure: Option<f64>,
    /// Defaults to the node with the largest supply.
    pub source_node: Option<NodeId>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: Method::NodeLoop,
            flow_tolerance: 0.01,
            residual_tolerance: None,
            max_iterations: 50,
            derivative_flow_floor: 1e-7,
            damping: false,
            initial: InitialGuess::Network,
            source_pressure: None,
            source_node: None,
        }
    }
}

impl SolverConfig {
    pub fn with_method(method: Method) -> Self {
        Self {
            method,
            ..Self::default()
        }
    }

    pub fn residual_tolerance_for(&self, kind: FluidKind) -> f64 {
        self.residual_tolerance.unwrap_or(match kind {
            FluidKind::Gas => GAS_RESIDUAL_TOLERANCE,
            FluidKind::Water => WATER_RESIDUAL_TOLERANCE,
        })
    }

    fn check(&self) -> Result<()> {
        let tol_ok = self.flow_tolerance > 0.0 && self.residual_tolerance.is_none_or(|t| t > 0.0);
        if !tol_ok || self.max_iterations < 1 || !(self.derivative_flow_floor >= 0.0) {
            return Err(Error::Domain(format!("invalid solver configuration: {self:?}")));
        }
        Ok(())
    }
}

/// One loop member at the current iterate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopTerm {
    pub pipe_index: usize,
    /// Loop-matrix entry, ±1.
    pub sign: i8,
    /// Signed flow, m³/s.
    pub flow: f64,
    /// |F′| at the current flow (floored).
    pub slope: f64,
}

/// Loop sums and slopes at one iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopEval {
    /// Signed ΣF per loop.
    pub sums: Vec<f64>,
    pub terms: Vec<Vec<LoopTerm>>,
    /// Per pipe, F and F′ at |Q|.
    pub pipes: Vec<PipeEval>,
}

impl LoopEval {
    pub fn abs_sums(&self) -> Vec<f64> {
        self.sums.iter().map(|s| s.abs()).collect()
    }

    pub fn max_abs_sum(&self) -> f64 {
        self.sums.iter().fold(0.0, |m, s| m.max(s.abs()))
    }
}

/// ΣF(ℓ) = Σ s(ℓ,i)·sign(Qᵢ)·F(|Qᵢ|) for every loop, with the slopes
/// needed by the linearised updates.
pub fn evaluate_loops(
    net: &Network,
    basis: &LoopBasis,
    flows: &FlowState,
    derivative_floor: f64,
) -> Result<LoopEval> {
    let fluid = net.fluid();
    let q = flows.as_slice();
    let pipes = net
        .pipes()
        .iter()
        .zip(q)
        .map(|(p, &qi)| {
            if !qi.is_finite() {
                return Err(Error::Domain(format!("non-finite flow in pipe {}", p.id)));
            }
            fluid.eval(p, qi.abs(), derivative_floor)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut sums = Vec::with_capacity(basis.len());
    let mut terms = Vec::with_capacity(basis.len());
    for l in 0..basis.len() {
        let mut sum = 0.0;
        let mut row = Vec::new();
        for (i, s) in basis.members(l) {
            sum += s as f64 * q[i].signum() * pipes[i].f;
            row.push(LoopTerm {
                pipe_index: i,
                sign: s,
                flow: q[i],
                slope: pipes[i].df_dq.abs(),
            });
        }
        sums.push(sum);
        terms.push(row);
    }
    Ok(LoopEval { sums, terms, pipes })
}

/// Runs the configured method.
pub fn solve(net: &Network, config: &SolverConfig) -> Result<SolveReport> {
    ensure_valid(net)?;
    config.check()?;
    let basis = loop_basis(net)?;
    let initial = config.initial.resolve(net)?;
    solve_with_basis(net, &basis, initial, config)
}

pub fn solve_node_loop(net: &Network, config: &SolverConfig) -> Result<SolveReport> {
    solve(net, &SolverConfig { method: Method::NodeLoop, ..config.clone() })
}

pub fn solve_hardy_cross_original(net: &Network, config: &SolverConfig) -> Result<SolveReport> {
    solve(net, &SolverConfig { method: Method::HardyCross, ..config.clone() })
}

pub fn solve_hardy_cross_improved(net: &Network, config: &SolverConfig) -> Result<SolveReport> {
    solve(net, &SolverConfig { method: Method::HardyCrossImproved, ..config.clone() })
}

/// Iterates from `initial` with an already chosen loop basis.
pub fn solve_with_basis(
    net: &Network,
    basis: &LoopBasis,
    initial: FlowState,
    config: &SolverConfig,
) -> Result<SolveReport> {
    config.check()?;
    let res_tol = config.residual_tolerance_for(net.fluid().kind());
    let flow_tol = m3h_to_m3s(config.flow_tolerance);
    let floor = config.derivative_flow_floor;
    let node_matrix = crate::topology::build_node_matrix(net);

    let mut flows = initial;
    let mut eval = evaluate_loops(net, basis, &flows, floor)?;
    let mut iterations = vec![flows.clone()];
    let mut loop_residuals = vec![eval.abs_sums()];
    let mut condition_estimates = Vec::new();
    let mut damped_updates = Vec::new();
    let mut termination = Termination::MaxIterations;

    for k in 1..=config.max_iterations {
        let proposal = match config.method {
            Method::NodeLoop => {
                node_loop::step(net, &node_matrix, basis, &flows, &eval, &mut condition_estimates)?
            }
            Method::HardyCrossImproved => {
                hardy_cross::improved_step(basis, &flows, &eval, &mut condition_estimates)?
            }
            Method::HardyCross => hardy_cross::original_step(basis, &flows, &eval)?,
        };
        let Some(proposal) = proposal else {
            termination = Termination::SingularSystem;
            break;
        };
        let mut next = FlowState::from_vec(net, proposal)?;
        let mut next_eval = evaluate_loops(net, basis, &next, floor)?;

        if config.damping && next_eval.max_abs_sum() > 10.0 * eval.max_abs_sum() {
            let half: Vec<f64> = flows
                .as_slice()
                .iter()
                .zip(next.as_slice())
                .map(|(a, b)| a + 0.5 * (b - a))
                .collect();
            next = FlowState::from_vec(net, half)?;
            next_eval = evaluate_loops(net, basis, &next, floor)?;
            damped_updates.push(k);
        }

        let change = next.max_abs_diff(&flows);
        iterations.push(next.clone());
        loop_residuals.push(next_eval.abs_sums());
        flows = next;
        eval = next_eval;
        if change <= flow_tol && eval.max_abs_sum() <= res_tol {
            termination = Termination::Converged;
            break;
        }
    }

    let velocities = net
        .pipes()
        .iter()
        .zip(flows.as_slice())
        .map(|(p, &q)| Ok((p.id, velocity(net.fluid(), q, p.diameter)?)))
        .collect::<Result<_>>()?;

    let node_pressures = match config.source_pressure {
        Some(p0) => {
            let source = config
                .source_node
                .or_else(|| net.main_source())
                .ok_or_else(|| Error::Domain("network has no nodes".into()))?;
            Some(propagate_pressures(net, &flows, source, p0)?)
        }
        None => None,
    };

    Ok(SolveReport {
        iterations,
        loop_residuals,
        termination,
        velocities,
        node_pressures,
        condition_estimates,
        damped_updates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::network::PipeId;

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("newton".parse::<Method>().is_err());
    }

    #[test]
    fn zero_flows_have_zero_sums() {
        let net = fixtures::gas_network();
        let basis = loop_basis(&net).unwrap();
        let e = evaluate_loops(&net, &basis, &FlowState::zeros(&net), 1e-7).unwrap();
        assert!(e.sums.iter().all(|&s| s == 0.0));
        assert!(e.terms.iter().flatten().all(|t| t.slope > 0.0));
    }

    #[test]
    fn fixture_initial_loop_sums() {
        let net = fixtures::gas_network();
        let basis = loop_basis(&net).unwrap();
        let init = feasible_initial_flows(&net, 0).unwrap();
        let e = evaluate_loops(&net, &basis, &init, 1e-7).unwrap();
        assert!(((e.sums[0] + 851_330_634.0) / 851_330_634.0).abs() < 5e-3, "{}", e.sums[0]);

        let net = fixtures::water_network();
        let e = evaluate_loops(&net, &basis, &init, 1e-7).unwrap();
        assert!(((e.sums[2] - 4171.0) / 4171.0).abs() < 1e-2, "{}", e.sums[2]);
    }

    #[test]
    fn fixture_gas_node_loop_converges() {
        let net = fixtures::gas_network();
        let r = solve_node_loop(&net, &SolverConfig::default()).unwrap();
        assert!(r.converged());
        let f = r.final_flows();
        for (p, q) in [(1, 1228.19), (4, 3328.19), (15, 560.05)] {
            assert!((f.get_m3h(PipeId(p)).unwrap() - q).abs() <= 1.0);
        }
        assert!(r.update_count() <= 6);
    }

    #[test]
    fn invalid_config_rejected() {
        let net = fixtures::gas_network();
        let cfg = SolverConfig {
            max_iterations: 0,
            ..SolverConfig::default()
        };
        assert!(matches!(solve(&net, &cfg), Err(Error::Domain(_))));
    }
}

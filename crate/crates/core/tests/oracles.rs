//! Independent checks: exact integer rank, hand-rolled node balances,
//! path sums for pressures, bisection for Colebrook, random networks.

use std::collections::BTreeMap;

use loopflow::friction::{colebrook_lambda, colebrook_residual, darcy_weisbach_f, renouard_f, FluidModel};
use loopflow::topology::{build_node_matrix, derive_loop_basis, loop_basis};
use loopflow::units::{m3h_to_m3s, m3s_to_m3h};
use loopflow::{
    fixtures, optimize_diameters, propagate_pressures, solve, tree_flows, FlowState, FluidSpec,
    GasSpec, InitialGuess, Method, Network, NodeId, NodeSpec, Pipe, PipeId, SizingConfig,
    SolverConfig, WaterSpec,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Rank by fraction-free (Bareiss) elimination in exact integer arithmetic.
fn bareiss_rank(rows: &[Vec<i64>]) -> usize {
    let mut m: Vec<Vec<i128>> = rows.iter().map(|r| r.iter().map(|&v| v as i128).collect()).collect();
    let (n, cols) = (m.len(), m.first().map_or(0, |r| r.len()));
    let mut rank = 0;
    let mut prev: i128 = 1;
    for c in 0..cols {
        let Some(p) = (rank..n).find(|&r| m[r][c] != 0) else { continue };
        m.swap(rank, p);
        for r in rank + 1..n {
            for k in c + 1..cols {
                m[r][k] = (m[r][k] * m[rank][c] - m[rank][k] * m[r][c]) / prev;
            }
            m[r][c] = 0;
        }
        prev = m[rank][c];
        rank += 1;
        if rank == n {
            break;
        }
    }
    rank
}

fn loop_rows(net: &Network, derived: bool) -> Vec<Vec<i64>> {
    let basis = if derived { derive_loop_basis(net) } else { loop_basis(net) }.unwrap();
    basis.rows().iter().map(|r| r.iter().map(|&v| v as i64).collect()).collect()
}

fn without_loops(net: &Network) -> Network {
    let mut n = Network::new(net.pipes().to_vec(), net.nodes().to_vec(), *net.fluid(), Some(net.reference_node()));
    if let Some(q) = net.initial_flows() {
        n = n.with_initial_flows(q.clone());
    }
    n
}

/// Inflow minus outflow minus demand at every node, straight from the pipe list.
fn brute_force_balance(net: &Network, flows: &[f64]) -> BTreeMap<NodeId, f64> {
    let mut bal: BTreeMap<NodeId, f64> = net.nodes().iter().map(|n| (n.id, -n.demand)).collect();
    for (p, &q) in net.pipes().iter().zip(flows) {
        *bal.get_mut(&p.from).unwrap() -= q;
        *bal.get_mut(&p.to).unwrap() += q;
    }
    bal
}

/// Random connected network: a random spanning tree plus extra pipes.
fn random_network(rng: &mut ChaCha8Rng, water: bool) -> Network {
    let n = rng.gen_range(4..9u32);
    let mut pipes = Vec::new();
    let add = |rng: &mut ChaCha8Rng, pipes: &mut Vec<Pipe>, a: u32, b: u32| {
        let id = PipeId(pipes.len() as u32 + 1);
        pipes.push(Pipe {
            id,
            from: NodeId(a),
            to: NodeId(b),
            diameter: rng.gen_range(0.1..0.5),
            length: rng.gen_range(50.0..500.0),
            roughness: 2e-5,
        });
    };
    for v in 2..=n {
        let u = rng.gen_range(1..v);
        if rng.gen_bool(0.5) { add(rng, &mut pipes, u, v) } else { add(rng, &mut pipes, v, u) }
    }
    let extra = rng.gen_range(1..5);
    while pipes.len() < (n - 1) as usize + extra {
        let a = rng.gen_range(1..=n);
        let b = rng.gen_range(1..=n);
        if a != b {
            add(rng, &mut pipes, a, b);
        }
    }
    let mut demands: Vec<f64> = (1..n).map(|_| rng.gen_range(10.0..500.0)).collect();
    demands.insert(0, -demands.iter().sum::<f64>());
    let nodes = demands.iter().enumerate().map(|(i, &d)| NodeSpec::from_m3h(i as u32 + 1, d)).collect();
    let fluid = if water {
        FluidSpec::Water(WaterSpec { density: 1000.0, viscosity: 0.00089 })
    } else {
        FluidSpec::Gas(GasSpec { relative_density: 0.6, operating_pressure: 4e5, normal_pressure: 1e5 })
    };
    Network::new(pipes, nodes, fluid, None)
}

#[test]
fn loop_matrices_have_full_rank() {
    for net in [fixtures::gas_network(), without_loops(&fixtures::gas_network())] {
        for derived in [false, true] {
            let rows = loop_rows(&net, derived);
            assert_eq!(rows.len() as isize, net.loop_count());
            assert_eq!(bareiss_rank(&rows), rows.len());
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let net = random_network(&mut rng, false);
        let rows = loop_rows(&net, true);
        assert_eq!(rows.len() as isize, net.loop_count());
        assert_eq!(bareiss_rank(&rows), rows.len());
    }
}

#[test]
fn stacked_system_is_structurally_nonsingular() {
    let net = fixtures::gas_network();
    let nm = build_node_matrix(&net);
    let mut rows: Vec<Vec<i64>> = nm.entries.iter().map(|r| r.iter().map(|&v| v as i64).collect()).collect();
    rows.extend(loop_rows(&net, false));
    assert_eq!(rows.len(), 15);
    assert_eq!(bareiss_rank(&rows), 15);
}

#[test]
fn bareiss_agrees_with_known_ranks() {
    assert_eq!(bareiss_rank(&[vec![1, 2], vec![2, 4]]), 1);
    assert_eq!(bareiss_rank(&[vec![0, 1], vec![1, 0]]), 2);
    assert_eq!(bareiss_rank(&[vec![1, -1, 0], vec![0, 1, -1], vec![1, 0, -1]]), 2);
}

#[test]
fn loops_are_circulations() {
    // every loop row is orthogonal to every node row: pushing flow round a
    // loop never changes a node balance
    for net in [fixtures::gas_network(), without_loops(&fixtures::gas_network())] {
        let nm = build_node_matrix(&net);
        let basis = loop_basis(&net).unwrap();
        for lrow in basis.rows() {
            for nrow in &nm.entries {
                let dot: i64 = lrow.iter().zip(nrow).map(|(&a, &b)| a as i64 * b as i64).sum();
                assert_eq!(dot, 0);
            }
        }
        let base = tree_flows(&net, &[0.0; 15]).unwrap();
        for (l, lrow) in basis.rows().iter().enumerate() {
            let q: Vec<f64> = base.as_slice().iter().zip(lrow).map(|(q, &s)| q + 0.3 * s as f64).collect();
            let bal = brute_force_balance(&net, &q);
            assert!(bal.values().all(|b| b.abs() < 1e-12), "loop {}", l + 1);
        }
    }
}

#[test]
fn every_iterate_balances_every_node() {
    for net in [fixtures::gas_network(), fixtures::water_network()] {
        for m in Method::ALL {
            let r = solve(&net, &SolverConfig::with_method(m)).unwrap();
            for state in &r.iterations {
                let worst = brute_force_balance(&net, state.as_slice())
                    .values()
                    .fold(0.0_f64, |w, b| w.max(b.abs()));
                assert!(m3s_to_m3h(worst) <= 1e-6, "{m}: {worst}");
            }
        }
    }
}

#[test]
fn node_loop_and_improved_hardy_cross_share_iterates() {
    // from a feasible start both solve the same Newton step
    for net in [fixtures::gas_network(), fixtures::water_network()] {
        let a = solve(&net, &SolverConfig::with_method(Method::NodeLoop)).unwrap();
        let b = solve(&net, &SolverConfig::with_method(Method::HardyCrossImproved)).unwrap();
        assert_eq!(a.iterations.len(), b.iterations.len());
        for (x, y) in a.iterations.iter().zip(&b.iterations) {
            assert!(m3s_to_m3h(x.max_abs_diff(y)) < 1e-6);
        }
    }
}

#[test]
fn derived_loops_give_the_same_solution() {
    for net in [fixtures::gas_network(), fixtures::water_network()] {
        let explicit = solve(&net, &SolverConfig::default()).unwrap();
        let derived = solve(&without_loops(&net), &SolverConfig::default()).unwrap();
        assert!(derived.converged());
        assert!(m3s_to_m3h(explicit.final_flows().max_abs_diff(derived.final_flows())) <= 0.02);
    }
}

#[test]
fn gas_pressure_is_path_independent() {
    let net = fixtures::gas_network();
    let r = solve(&net, &SolverConfig { source_pressure: Some(4e5), ..SolverConfig::default() }).unwrap();
    let q = r.final_flows();
    let FluidSpec::Gas(g) = *net.fluid() else { unreachable!() };

    // p² at node 11 along a chain of (pipe, travelled from->to?) steps
    let walk = |steps: &[(u32, bool)]| {
        steps.iter().fold(4e5_f64 * 4e5, |p2, &(id, forward)| {
            let p = net.pipe(PipeId(id)).unwrap();
            let qi = q.get(PipeId(id)).unwrap();
            let drop = qi.signum() * renouard_f(g.relative_density, p.length, qi.abs(), p.diameter).unwrap();
            if forward { p2 - drop } else { p2 + drop }
        })
    };
    // 1 -> 2 -> 3 -> 7 -> 11 and 1 -> 6 -> 5 -> 11
    let a = walk(&[(4, true), (1, true), (5, true), (6, false)]);
    let b = walk(&[(14, true), (13, true), (11, true)]);
    let tol = SolverConfig::default().residual_tolerance_for(net.fluid().kind());
    assert!((a - b).abs() <= 2.0 * tol, "{a} vs {b}");
    let p11 = r.node_pressures.unwrap()[&NodeId(11)];
    assert!((p11 * p11 - a).abs() <= 2.0 * tol);
}

#[test]
fn water_pressures_fall_along_the_flow() {
    let net = fixtures::water_network();
    let r = solve(&net, &SolverConfig::default()).unwrap();
    let q = r.final_flows();
    for source in [4e5, 1e6] {
        let p = propagate_pressures(&net, q, NodeId(1), source).unwrap();
        for pipe in net.pipes() {
            let qi = q.get(pipe.id).unwrap();
            let (up, down) = if qi >= 0.0 { (pipe.from, pipe.to) } else { (pipe.to, pipe.from) };
            assert!(p[&up] >= p[&down] - 1.0, "pipe {}", pipe.id);
        }
        if source == 1e6 {
            assert!(p.values().all(|&v| v > 0.0));
        }
    }
    // at 4e5 Pa the far end of the network drops below zero
    let p = propagate_pressures(&net, q, NodeId(1), 4e5).unwrap();
    assert!(p[&NodeId(9)] < 0.0);
}

#[test]
fn colebrook_matches_bisection() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..500 {
        let re = 10f64.powf(rng.gen_range(3.7..8.0));
        let rr = if rng.gen_bool(0.1) { 0.0 } else { 10f64.powf(rng.gen_range(-7.0..-1.5)) };
        // signed form, decreasing in lambda
        let g = |lam: f64| {
            let x = 1.0 / lam.sqrt();
            x + 2.0 * (2.51 * x / re + rr / 3.71).log10()
        };
        let (mut lo, mut hi) = (1e-4_f64, 0.2_f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) * g(lo) <= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let got = colebrook_lambda(re, rr).unwrap();
        assert!((got - 0.5 * (lo + hi)).abs() <= 1e-10, "Re {re}, e/d {rr}");
        assert!(colebrook_residual(got, re, rr) <= 1e-9);
    }
}

#[test]
fn random_networks_agree_across_methods() {
    // Node-loop and improved Hardy Cross must always converge. The original
    // method corrects every loop from the same iterate and can settle into a
    // two-cycle when neighbouring loops share a dominant pipe; it must then
    // stop cleanly at max-iterations, and agree whenever it does converge.
    // Its convergence is linear with rates up to ~0.98 here, so a 0.01 m3/h
    // step can sit well over 0.02 m3/h from the fixed point; it is run to a
    // tighter step tolerance while the agreement threshold stays 0.02 m3/h.
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cases = 60;
    let mut original_cycles = 0;
    for case in 0..cases {
        let net = random_network(&mut rng, case % 2 == 1);
        let run = |m: Method| {
            let (flow_tolerance, max_iterations) = if m == Method::HardyCross { (1e-5, 5000) } else { (0.01, 500) };
            let cfg = SolverConfig {
                max_iterations,
                flow_tolerance,
                initial: InitialGuess::Seeded(case),
                ..SolverConfig::with_method(m)
            };
            solve(&net, &cfg).unwrap()
        };
        let reference = run(Method::NodeLoop);
        assert!(reference.converged(), "case {case}: node-loop {}", reference.termination);
        assert!(m3s_to_m3h(reference.final_flows().max_node_residual(&net)) <= 1e-6);
        for m in [Method::HardyCrossImproved, Method::HardyCross] {
            let r = run(m);
            assert!(m3s_to_m3h(r.final_flows().max_node_residual(&net)) <= 1e-6);
            if m == Method::HardyCross && !r.converged() {
                assert_eq!(r.termination, loopflow::Termination::MaxIterations);
                original_cycles += 1;
                continue;
            }
            assert!(r.converged(), "case {case}: {m} {}", r.termination);
            let d = m3s_to_m3h(r.final_flows().max_abs_diff(reference.final_flows()));
            assert!(d <= 0.02, "case {case}: {m} differs by {d}");
        }
    }
    eprintln!("original Hardy Cross cycled on {original_cycles} of {cases} random networks");
    assert!(original_cycles * 4 < cases, "{original_cycles} of {cases}");
}

#[test]
fn water_sizing_restores_balance() {
    let net = fixtures::water_network();
    let basis = loop_basis(&net).unwrap();
    let flows = solve(&net, &SolverConfig { flow_tolerance: 1e-9, residual_tolerance: Some(1e-6), ..SolverConfig::default() })
        .unwrap()
        .final_flows()
        .clone();
    let perturbed = net.map_diameters(|p| p.diameter * if p.id.0 % 3 == 0 { 1.08 } else { 0.97 });
    let r = optimize_diameters(&perturbed, &basis, &SizingConfig::new(flows.clone())).unwrap();
    assert!(r.converged(), "{}", r.termination);
    // the sized network, solved forward, carries the fixed flows again
    let resolved = solve(&r.apply(&perturbed), &SolverConfig { initial: InitialGuess::Given(flows.clone()), ..SolverConfig::default() }).unwrap();
    assert!(m3s_to_m3h(resolved.final_flows().max_abs_diff(&flows)) <= 1.0);
    // direct check of one loop with the sized diameters
    let sized = r.apply(&perturbed);
    let FluidSpec::Water(w) = *sized.fluid() else { unreachable!() };
    let sum: f64 = basis
        .signed_pipes(0)
        .iter()
        .map(|&(id, s)| {
            let p = sized.pipe(id).unwrap();
            let qi = flows.get(id).unwrap();
            let (_, lam) = w.friction(p, qi.abs()).unwrap();
            s as f64 * qi.signum() * darcy_weisbach_f(lam, p.length, qi.abs(), p.diameter, w.density).unwrap()
        })
        .sum();
    assert!(sum.abs() <= 1.0, "{sum}");
    let _ = sized.fluid().eval(sized.pipe(PipeId(1)).unwrap(), m3h_to_m3s(10.0), 0.0).unwrap();
}

#[test]
fn singular_start_is_reported_not_raised() {
    // two parallel pipes with no flow at all: the derivative floor keeps the
    // system solvable, so the run converges immediately
    let pipes = vec![
        Pipe { id: PipeId(1), from: NodeId(1), to: NodeId(2), diameter: 0.2, length: 100.0, roughness: 2e-5 },
        Pipe { id: PipeId(2), from: NodeId(1), to: NodeId(2), diameter: 0.2, length: 100.0, roughness: 2e-5 },
    ];
    let nodes = vec![NodeSpec::from_m3h(1, 0.0), NodeSpec::from_m3h(2, 0.0)];
    let net = Network::new(pipes, nodes, FluidSpec::Gas(GasSpec { relative_density: 0.6, operating_pressure: 4e5, normal_pressure: 1e5 }), None);
    let cfg = SolverConfig { initial: InitialGuess::Given(FlowState::zeros(&net)), ..SolverConfig::default() };
    for m in Method::ALL {
        let r = solve(&net, &SolverConfig { method: m, ..cfg.clone() }).unwrap();
        assert!(r.converged());
        assert_eq!(r.final_flows().as_slice(), &[0.0, 0.0]);
    }
    // with no derivative floor the slopes vanish and the run stops cleanly
    let r = solve(&net, &SolverConfig { derivative_flow_floor: 0.0, ..cfg }).unwrap();
    assert_eq!(r.termination, loopflow::Termination::SingularSystem);
}
